#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "skewcast/distribution.hpp"
#include "skewcast/error.hpp"
#include "skewcast/model_bank.hpp"
#include "skewcast/rng.hpp"

namespace skewcast {

/// Where classifier outputs come from during simulation.
class SoftmaxSource {
 public:
  virtual ~SoftmaxSource() = default;

  /// Softmax vector for one frame under a given model. The dominant-set
  /// context is the stream's ground-truth skew, used for difficulty shaping.
  virtual ClassDistribution emit(const ModelProfile& model, std::size_t true_label,
                                 const std::vector<std::size_t>* dominant,
                                 std::uint64_t frame) const = 0;

  /// Expected top-1 accuracy of a model, optionally on a skew's classes only.
  virtual double accuracy_of(const ModelProfile& model,
                             const std::vector<std::size_t>* dominant) const = 0;
};

/// Synthetic classifier behavior. Each model has a declared base accuracy;
/// running on a skew whose classes are easy to tell apart lifts the
/// effective accuracy toward a cap. Errors land on ring-confusable classes
/// (neighbors modulo the universe), and the true label keeps the runner-up
/// mass so downstream reweighting has something to recover.
struct BackendConfig {
  std::map<std::string, double> base_accuracy;  ///< keyed by ModelProfile::network_ref
  double correct_peak_lo = 0.70;  ///< peak mass range when the argmax is right
  double correct_peak_hi = 0.97;
  double error_peak_lo = 0.45;    ///< peak mass range when the argmax is wrong
  double error_peak_hi = 0.75;
  double runner_fraction = 0.5;   ///< share of residual mass on the runner-up slot
  std::size_t ring_radius = 2;    ///< classes within +/- radius are confusable
  double difficulty_weight = 0.0; ///< 0 disables skew easiness shaping
  double accuracy_cap = 0.93;     ///< effective accuracy ceiling under easy skews
  std::uint64_t seed = 0;

  void validate() const {
    for (const auto& [ref, a] : base_accuracy) {
      if (!(a > 0.0 && a <= 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "base accuracy for " + ref + " must be in (0, 1]");
      }
    }
    if (!(correct_peak_lo > 0.0 && correct_peak_lo <= correct_peak_hi && correct_peak_hi <= 1.0) ||
        !(error_peak_lo > 0.0 && error_peak_lo <= error_peak_hi && error_peak_hi <= 1.0)) {
      throw Error(ErrorCode::InvalidArgument, "peak mass ranges must satisfy 0 < lo <= hi <= 1");
    }
    if (!(runner_fraction >= 0.0 && runner_fraction <= 1.0)) {
      throw Error(ErrorCode::InvalidArgument, "runner_fraction must be in [0, 1]");
    }
    if (ring_radius < 1) throw Error(ErrorCode::InvalidArgument, "ring_radius must be at least 1");
    if (!(difficulty_weight >= 0.0 && difficulty_weight <= 1.0)) {
      throw Error(ErrorCode::InvalidArgument, "difficulty_weight must be in [0, 1]");
    }
    if (!(accuracy_cap > 0.0 && accuracy_cap <= 1.0)) {
      throw Error(ErrorCode::InvalidArgument, "accuracy_cap must be in (0, 1]");
    }
  }
};

class ConfusionBackend : public SoftmaxSource {
 public:
  ConfusionBackend(BackendConfig config, std::size_t universe)
      : config_(std::move(config)), universe_(universe) {
    config_.validate();
    if (universe_ <= 2 * config_.ring_radius) {
      throw Error(ErrorCode::InvalidArgument,
                  "universe must exceed twice the ring radius for distinct confusables");
    }
  }

  std::size_t universe() const { return universe_; }
  const BackendConfig& config() const { return config_; }

  double base_accuracy(const ModelProfile& model) const {
    auto it = config_.base_accuracy.find(model.network_ref);
    if (it == config_.base_accuracy.end()) {
      throw Error(ErrorCode::UnknownModelId,
                  "backend has no accuracy entry for " + model.network_ref);
    }
    return it->second;
  }

  /// Fraction of dominant classes with no other dominant class inside their
  /// confusable ring: 1 when the skew is perfectly separable, 0 when every
  /// class has a confusable sibling in the set.
  double easiness(const std::vector<std::size_t>& dominant) const {
    if (dominant.empty()) return 0.0;
    std::size_t isolated = 0;
    for (std::size_t c : dominant) {
      bool clash = false;
      for (std::size_t step = 1; step <= config_.ring_radius && !clash; ++step) {
        const std::size_t up = (c + step) % universe_;
        const std::size_t down = (c + universe_ - step) % universe_;
        clash = std::binary_search(dominant.begin(), dominant.end(), up) ||
                std::binary_search(dominant.begin(), dominant.end(), down);
      }
      if (!clash) ++isolated;
    }
    return static_cast<double>(isolated) / static_cast<double>(dominant.size());
  }

  double accuracy_of(const ModelProfile& model,
                     const std::vector<std::size_t>* dominant) const override {
    const double base = base_accuracy(model);
    if (!dominant || config_.difficulty_weight == 0.0) return base;
    const double lift = (config_.accuracy_cap - base) * config_.difficulty_weight;
    return lift > 0.0 ? base + lift * easiness(*dominant) : base;
  }

  ClassDistribution emit(const ModelProfile& model, std::size_t true_label,
                         const std::vector<std::size_t>* dominant,
                         std::uint64_t frame) const override {
    if (true_label >= universe_) {
      throw Error(ErrorCode::InvalidArgument, "true label outside the class universe");
    }
    const bool in_skew =
        dominant && std::binary_search(dominant->begin(), dominant->end(), true_label);
    const double a = in_skew ? accuracy_of(model, dominant) : base_accuracy(model);

    // One substream per frame; every variate is drawn regardless of branch so
    // paired runs with different models stay on common random numbers.
    HashRng rng(config_.seed, 0x10001ULL + frame);
    const double u_correct = rng.uniform01();
    const double peak_correct = rng.uniform(config_.correct_peak_lo, config_.correct_peak_hi);
    const double peak_error = rng.uniform(config_.error_peak_lo, config_.error_peak_hi);
    const std::size_t pick_error = static_cast<std::size_t>(rng.uniform_below(2 * config_.ring_radius));
    const std::size_t pick_runner = static_cast<std::size_t>(rng.uniform_below(2 * config_.ring_radius));

    const bool correct = u_correct < a;
    const std::size_t peak_class = correct ? true_label : ring_neighbor(true_label, pick_error);
    const std::size_t runner_class =
        correct ? ring_neighbor(true_label, pick_runner) : true_label;
    const double peak = correct ? peak_correct : peak_error;
    const double runner = config_.runner_fraction * (1.0 - peak);

    ClassDistribution out(universe_, 0.0);
    const double rest = (1.0 - peak - runner) / static_cast<double>(universe_ - 2);
    for (double& v : out) v = rest;
    out[peak_class] = peak;
    out[runner_class] = runner;
    normalize_in_place(out);
    return out;
  }

 private:
  std::size_t ring_neighbor(std::size_t label, std::size_t pick) const {
    // picks 0..2r-1 map to offsets +1..+r, -1..-r
    const std::size_t step = pick % config_.ring_radius + 1;
    if (pick < config_.ring_radius) return (label + step) % universe_;
    return (label + universe_ - step) % universe_;
  }

  BackendConfig config_;
  std::size_t universe_;
};

/// Replays previously captured softmax vectors keyed by frame index.
class TraceBackend : public SoftmaxSource {
 public:
  explicit TraceBackend(std::map<std::uint64_t, ClassDistribution> frames)
      : frames_(std::move(frames)) {
    for (const auto& [frame, v] : frames_) validate_distribution(v, "trace frame");
  }

  ClassDistribution emit(const ModelProfile&, std::size_t, const std::vector<std::size_t>*,
                         std::uint64_t frame) const override {
    auto it = frames_.find(frame);
    if (it == frames_.end()) {
      throw Error(ErrorCode::InvalidArgument, "trace has no frame " + std::to_string(frame));
    }
    return it->second;
  }

  double accuracy_of(const ModelProfile& model, const std::vector<std::size_t>*) const override {
    return model.accuracy;
  }

 private:
  std::map<std::uint64_t, ClassDistribution> frames_;
};

}  // namespace skewcast
