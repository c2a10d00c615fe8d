#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "skewcast/error.hpp"
#include "skewcast/model_bank.hpp"
#include "skewcast/perforation.hpp"
#include "skewcast/profiler.hpp"

namespace skewcast {

/// Energy accounting for one run.
struct Budget {
  double remain_energy = 0.0;    ///< joules
  double remaining_time = 0.0;   ///< seconds
  double frame_rate = 3.0;       ///< frames per second
  double energy_per_mac = 1e-8;  ///< joules per multiply-accumulate (declared proxy)

  void validate() const {
    if (!(remain_energy > 0.0)) throw Error(ErrorCode::InvalidArgument, "remain_energy must be positive");
    if (!(remaining_time > 0.0)) throw Error(ErrorCode::InvalidArgument, "remaining_time must be positive");
    if (!(frame_rate > 0.0)) throw Error(ErrorCode::InvalidArgument, "frame_rate must be positive");
    if (!(energy_per_mac > 0.0)) throw Error(ErrorCode::InvalidArgument, "energy_per_mac must be positive");
  }
};

/// Joules available per frame: remaining energy spread over remaining frames.
/// A drained (or overdrawn) budget yields 0, forcing the cheapest model.
inline double compute_epf(const Budget& b) {
  if (!(b.remaining_time > 0.0)) throw Error(ErrorCode::InvalidArgument, "remaining_time must be positive");
  if (!(b.frame_rate > 0.0)) throw Error(ErrorCode::InvalidArgument, "frame_rate must be positive");
  if (b.remain_energy <= 0.0) return 0.0;
  return b.remain_energy / (b.remaining_time * b.frame_rate);
}

/// Most accurate member whose per-frame energy fits the budget; ties go to
/// the cheaper model, then to registration order. With nothing affordable the
/// cheapest member serves anyway rather than dropping frames.
inline ModelProfile choose_model(double epf, const std::vector<ModelProfile>& members,
                                 double energy_per_mac) {
  if (members.empty()) throw Error(ErrorCode::EmptyInput, "no models to choose from");
  const ModelProfile* best = nullptr;
  for (const auto& m : members) {
    if (static_cast<double>(m.macs) * energy_per_mac > epf) continue;
    if (!best || m.accuracy > best->accuracy ||
        (m.accuracy == best->accuracy && m.macs < best->macs)) {
      best = &m;
    }
  }
  if (best) return *best;
  const ModelProfile* cheapest = &members.front();
  for (const auto& m : members) {
    if (m.macs < cheapest->macs ||
        (m.macs == cheapest->macs && m.accuracy > cheapest->accuracy)) {
      cheapest = &m;
    }
  }
  return *cheapest;
}

/// Bank-level selection: serve the skew's own models when any exist, fall
/// back to the general pool otherwise.
inline ModelProfile choose_model(double epf, const std::optional<SkewEstimate>& skew,
                                 const ModelBank& bank, double energy_per_mac) {
  std::vector<ModelProfile> members;
  if (skew) {
    members = bank.models_for(skew_key_of(skew->dominant));
  }
  if (members.empty()) {
    members = bank.models_for("N/A");
  }
  return choose_model(epf, members, energy_per_mac);
}

enum class SchedulerMode { Detecting, Interpretation, CompilationPending };

inline const char* to_string(SchedulerMode mode) {
  switch (mode) {
    case SchedulerMode::Detecting: return "detecting";
    case SchedulerMode::Interpretation: return "interpretation";
    case SchedulerMode::CompilationPending: return "compilation-pending";
  }
  return "unknown";
}

struct SchedulerState {
  std::optional<SkewEstimate> current_skew;
  SchedulerMode mode = SchedulerMode::Detecting;

  std::string skew_key() const {
    return current_skew ? skew_key_of(current_skew->dominant) : std::string("N/A");
  }
};

enum class SkewEventKind { Detected, Changed, Ended };

inline const char* to_string(SkewEventKind kind) {
  switch (kind) {
    case SkewEventKind::Detected: return "detected";
    case SkewEventKind::Changed: return "changed";
    case SkewEventKind::Ended: return "ended";
  }
  return "unknown";
}

/// Skew-event reaction. A detection enters interpretation with the estimate
/// live, counts the appearance, and flags compilation-pending once the skew
/// runs hot without a registered specialist. Change and end both fall back to
/// detecting on the general pool.
inline SchedulerState on_skew_event(SchedulerState state, SkewEventKind event,
                                    const std::optional<SkewEstimate>& skew, HotTracker& tracker,
                                    const ModelBank& bank) {
  switch (event) {
    case SkewEventKind::Detected: {
      if (!skew) throw Error(ErrorCode::InvalidArgument, "detected event carries no estimate");
      state.current_skew = skew;
      const std::string key = skew_key_of(skew->dominant);
      tracker.remember_estimate(key, *skew);
      const HeatStatus heat = tracker.record_appearance(key);
      state.mode = (heat == HeatStatus::Hot && !bank.has_skew(key))
                       ? SchedulerMode::CompilationPending
                       : SchedulerMode::Interpretation;
      break;
    }
    case SkewEventKind::Changed:
    case SkewEventKind::Ended:
      state.current_skew.reset();
      state.mode = SchedulerMode::Detecting;
      break;
  }
  return state;
}

struct CompileOutcome {
  std::size_t compiled = 0;
  std::vector<std::pair<std::string, std::string>> errors;  ///< (skew_key, message)
};

/// Drain the pending-compile queue, but only while charging. Each key is
/// compiled independently; a failure is recorded and the drain continues.
inline CompileOutcome run_compile_queue(HotTracker& tracker, ModelBank& bank, bool charging,
                                        const Cascade& general_cascade, double target_accuracy,
                                        double delta, const SkewEvaluator& evaluator) {
  CompileOutcome outcome;
  if (!charging) return outcome;
  while (auto key = tracker.next_pending()) {
    try {
      auto estimate = tracker.estimate_for(*key);
      if (!estimate) {
        throw Error(ErrorCode::InvalidArgument, "no remembered estimate for skew " + *key);
      }
      compile_for_skew(bank, general_cascade, *estimate, target_accuracy, delta, evaluator);
      ++outcome.compiled;
    } catch (const std::exception& e) {
      outcome.errors.emplace_back(*key, e.what());
    }
  }
  return outcome;
}

}  // namespace skewcast
