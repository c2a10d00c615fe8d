#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "skewcast/error.hpp"

namespace skewcast {

enum class ModelKind { General, Compiled };

inline const char* to_string(ModelKind kind) {
  return kind == ModelKind::General ? "general" : "compiled";
}

/// Catalog entry for one deployable model variant.
struct ModelProfile {
  std::string id;
  ModelKind kind = ModelKind::General;
  std::string skew_key = "N/A";  ///< "N/A" for general models, else the skew it serves
  long long params = 0;          ///< parameter count, biases included
  long long macs = 0;            ///< multiply-accumulates per frame
  double accuracy = 0.0;         ///< expected top-1 accuracy on its target mix
  std::string network_ref;       ///< where the weights live (path or registry key)

  void validate() const {
    if (id.empty()) throw Error(ErrorCode::InvalidArgument, "model id is empty");
    if (params <= 0) throw Error(ErrorCode::InvalidArgument, "model " + id + ": params must be positive");
    if (macs <= 0) throw Error(ErrorCode::InvalidArgument, "model " + id + ": macs must be positive");
    if (!(accuracy >= 0.0 && accuracy <= 1.0)) {
      throw Error(ErrorCode::InvalidArgument, "model " + id + ": accuracy must be in [0, 1]");
    }
    const bool general = kind == ModelKind::General;
    if (general != (skew_key == "N/A")) {
      throw Error(ErrorCode::InvalidArgument,
                  "model " + id + ": skew_key must be \"N/A\" exactly for general models");
    }
  }
};

/// Keep only efficiency-frontier members: no survivor is matched or beaten on
/// both cost and accuracy by another entry. Ties keep the earliest-registered
/// member. Survivors come back sorted by macs, strictly increasing in both axes.
inline std::vector<ModelProfile> pareto_filter(std::vector<ModelProfile> members) {
  if (members.empty()) return members;
  std::vector<std::size_t> order(members.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (members[a].macs != members[b].macs) return members[a].macs < members[b].macs;
    if (members[a].accuracy != members[b].accuracy) return members[a].accuracy > members[b].accuracy;
    return a < b;
  });
  std::vector<ModelProfile> out;
  double best_accuracy = -1.0;
  for (std::size_t idx : order) {
    if (members[idx].accuracy > best_accuracy) {
      out.push_back(members[idx]);
      best_accuracy = members[idx].accuracy;
    }
  }
  return out;
}

/// A cost-ordered ladder of models serving one skew (or the general case).
struct Cascade {
  std::string skew_key = "N/A";
  std::vector<ModelProfile> members;  ///< macs ascending, accuracy ascending

  void validate() const {
    if (members.empty()) throw Error(ErrorCode::EmptyInput, "cascade has no members");
    for (const auto& m : members) m.validate();
    for (std::size_t i = 1; i < members.size(); ++i) {
      if (members[i].macs <= members[i - 1].macs || members[i].accuracy <= members[i - 1].accuracy) {
        throw Error(ErrorCode::InvalidArgument,
                    "cascade " + skew_key + ": members must strictly increase in macs and accuracy");
      }
    }
  }

  const ModelProfile& top() const {
    if (members.empty()) throw Error(ErrorCode::EmptyInput, "cascade has no members");
    return members.back();
  }
};

inline Cascade make_cascade(const std::string& skew_key, std::vector<ModelProfile> members) {
  Cascade cascade;
  cascade.skew_key = skew_key;
  cascade.members = pareto_filter(std::move(members));
  cascade.validate();
  return cascade;
}

/// Thread-safe registry of model profiles, grouped into per-skew cascades.
class ModelBank {
 public:
  void register_model(const ModelProfile& profile) {
    profile.validate();
    std::unique_lock lock(mutex_);
    if (by_id_.count(profile.id)) {
      throw Error(ErrorCode::DuplicateModelId, "model " + profile.id + " already registered");
    }
    by_id_.emplace(profile.id, profile);
    insertion_order_.push_back(profile.id);
  }

  bool contains(const std::string& id) const {
    std::shared_lock lock(mutex_);
    return by_id_.count(id) > 0;
  }

  ModelProfile lookup(const std::string& id) const {
    std::shared_lock lock(mutex_);
    auto it = by_id_.find(id);
    if (it == by_id_.end()) throw Error(ErrorCode::UnknownModelId, "no model named " + id);
    return it->second;
  }

  /// All profiles serving a skew key, in registration order.
  std::vector<ModelProfile> models_for(const std::string& skew_key) const {
    std::shared_lock lock(mutex_);
    std::vector<ModelProfile> out;
    for (const auto& id : insertion_order_) {
      const auto& m = by_id_.at(id);
      if (m.skew_key == skew_key) out.push_back(m);
    }
    return out;
  }

  /// Frontier cascade for a skew key; empty optional when nothing serves it.
  std::optional<Cascade> cascade_for(const std::string& skew_key) const {
    auto members = models_for(skew_key);
    if (members.empty()) return std::nullopt;
    return make_cascade(skew_key, std::move(members));
  }

  bool has_skew(const std::string& skew_key) const {
    std::shared_lock lock(mutex_);
    for (const auto& [id, m] : by_id_) {
      if (m.skew_key == skew_key) return true;
    }
    return false;
  }

  std::vector<ModelProfile> all() const {
    std::shared_lock lock(mutex_);
    std::vector<ModelProfile> out;
    out.reserve(insertion_order_.size());
    for (const auto& id : insertion_order_) out.push_back(by_id_.at(id));
    return out;
  }

  std::size_t size() const {
    std::shared_lock lock(mutex_);
    return by_id_.size();
  }

 private:
  mutable std::shared_mutex mutex_;
  std::map<std::string, ModelProfile> by_id_;
  std::vector<std::string> insertion_order_;
};

}  // namespace skewcast
