#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "skewcast/backend.hpp"
#include "skewcast/distribution.hpp"
#include "skewcast/error.hpp"
#include "skewcast/model_bank.hpp"
#include "skewcast/probability_layer.hpp"
#include "skewcast/profiler.hpp"
#include "skewcast/rng.hpp"
#include "skewcast/scheduler.hpp"

namespace skewcast {

/// One stretch of stream with a fixed skew.
struct SegmentSpec {
  std::size_t n_dominant = 1;
  double p = 1.0;                             ///< probability a frame comes from the dominant set
  std::size_t duration_frames = 1800;         ///< 10 simulated minutes at 3 fps
  std::vector<std::size_t> dominant_classes;  ///< explicit set; drawn from the seed when empty
  std::uint64_t seed = 0;
};

struct StreamSpec {
  std::vector<SegmentSpec> segments;
  double frame_interval = 1.0 / 3.0;  ///< seconds between frames
  std::size_t universe = 100;

  void validate() const {
    if (segments.empty()) throw Error(ErrorCode::EmptyInput, "stream has no segments");
    if (!(frame_interval > 0.0)) throw Error(ErrorCode::InvalidArgument, "frame_interval must be positive");
    if (universe < 1) throw Error(ErrorCode::InvalidArgument, "universe must be at least 1");
    for (std::size_t s = 0; s < segments.size(); ++s) {
      const auto& seg = segments[s];
      if (seg.n_dominant < 1 || seg.n_dominant > universe) {
        throw Error(ErrorCode::InvalidArgument,
                    "segment " + std::to_string(s) + ": n_dominant must be in [1, universe]");
      }
      if (!(seg.p > 0.0 && seg.p <= 1.0)) {
        throw Error(ErrorCode::InvalidArgument,
                    "segment " + std::to_string(s) + ": p must be in (0, 1]");
      }
      if (seg.duration_frames < 1) {
        throw Error(ErrorCode::InvalidArgument,
                    "segment " + std::to_string(s) + ": duration must be at least 1 frame");
      }
      if (!seg.dominant_classes.empty()) {
        if (seg.dominant_classes.size() != seg.n_dominant) {
          throw Error(ErrorCode::InvalidArgument,
                      "segment " + std::to_string(s) + ": explicit dominant list must have n_dominant entries");
        }
        for (std::size_t c : seg.dominant_classes) {
          if (c >= universe) {
            throw Error(ErrorCode::InvalidArgument,
                        "segment " + std::to_string(s) + ": dominant class outside universe");
          }
        }
      }
    }
  }

  std::size_t total_frames() const {
    std::size_t n = 0;
    for (const auto& s : segments) n += s.duration_frames;
    return n;
  }
};

/// The dominant set a segment actually uses: the explicit list when given,
/// otherwise n_dominant distinct classes drawn from (stream seed, segment seed).
inline std::vector<std::size_t> segment_dominants(const SegmentSpec& segment, std::size_t universe,
                                                  std::uint64_t stream_seed) {
  std::vector<std::size_t> out;
  if (!segment.dominant_classes.empty()) {
    out = segment.dominant_classes;
  } else {
    std::vector<std::size_t> pool(universe);
    for (std::size_t i = 0; i < universe; ++i) pool[i] = i;
    HashRng rng(stream_seed ^ splitmix64(segment.seed), 0x5eedULL);
    for (std::size_t i = 0; i < segment.n_dominant; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.uniform_below(universe - i));
      std::swap(pool[i], pool[j]);
    }
    out.assign(pool.begin(), pool.begin() + segment.n_dominant);
  }
  std::sort(out.begin(), out.end());
  return out;
}

struct StreamFrame {
  std::uint64_t index = 0;
  std::size_t label = 0;
  std::size_t segment = 0;
};

/// Materialize the labeled stream. Each frame draws from the segment's
/// dominant set with probability p (uniformly within), else uniformly from
/// the remaining classes. Fully determined by (spec, seed).
inline std::vector<StreamFrame> generate_stream(const StreamSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::vector<StreamFrame> frames;
  frames.reserve(spec.total_frames());
  std::uint64_t index = 0;
  for (std::size_t s = 0; s < spec.segments.size(); ++s) {
    const auto& seg = spec.segments[s];
    const auto dominants = segment_dominants(seg, spec.universe, seed);
    std::vector<std::size_t> rest;
    rest.reserve(spec.universe - dominants.size());
    for (std::size_t c = 0; c < spec.universe; ++c) {
      if (!std::binary_search(dominants.begin(), dominants.end(), c)) rest.push_back(c);
    }
    for (std::size_t f = 0; f < seg.duration_frames; ++f, ++index) {
      HashRng rng(seed, 0x20000ULL + index);
      const bool from_dominant = rest.empty() || rng.uniform01() < seg.p;
      const auto& pool = from_dominant ? dominants : rest;
      const std::size_t label = pool[rng.uniform_below(pool.size())];
      frames.push_back({index, label, s});
    }
  }
  return frames;
}

struct EngineToggles {
  bool scheduling = true;   ///< off: the top general model runs every frame
  bool rescaling = true;    ///< off: raw softmax argmax
  bool profiling = true;    ///< off: no skew detection, no events
  bool compilation = true;  ///< off: charging windows never compile
};

struct SimConfig {
  StreamSpec stream;
  Budget budget;
  ProfilerConfig profiler;
  RescaleConfig rescale;
  double target_accuracy = 0.70;        ///< compile-time selection target
  double delta = 0.02;                  ///< selection tolerance
  double actionability_fraction = 0.5;  ///< estimates spanning more of the universe are ignored
  double actionability_mass = 0.6;      ///< min smoothed mass the dominant set must carry
  double actionability_lift = 10.0;     ///< min ratio of in-set to out-set mean share
  bool charging_between_segments = true;
  EngineToggles toggles;
  std::uint64_t seed = 0;
};

struct FrameRecord {
  std::uint64_t frame = 0;
  std::size_t segment = 0;
  std::size_t true_label = 0;
  std::string model_id;
  long long macs = 0;
  bool bypassed = false;
  bool rescaled = false;
  std::size_t predicted = 0;
};

struct SkewEventRecord {
  std::uint64_t frame = 0;
  SkewEventKind kind = SkewEventKind::Detected;
  std::string skew_key;
};

struct CompileRecord {
  std::uint64_t frame = 0;
  std::string skew_key;
  std::string model_id;
};

struct RunAggregates {
  std::size_t total_frames = 0;
  double accuracy = 0.0;
  double mean_macs_per_frame = 0.0;
  std::string modal_model_id;
  long long modal_model_params = 0;
  std::size_t skew_event_count = 0;
  std::size_t compile_count = 0;
};

struct RunReport {
  std::vector<FrameRecord> frames;
  std::vector<SkewEventRecord> skew_events;
  std::vector<CompileRecord> compiles;
  double energy_initial = 0.0;
  double energy_spent = 0.0;
  RunAggregates aggregates;
};

/// Aggregates recounted from the per-frame records.
inline RunAggregates compute_metrics(const RunReport& report) {
  if (report.frames.empty()) throw Error(ErrorCode::EmptyInput, "report has no frames");
  RunAggregates agg;
  agg.total_frames = report.frames.size();
  std::size_t correct = 0;
  long long macs = 0;
  std::map<std::string, std::size_t> model_counts;
  for (const auto& f : report.frames) {
    if (f.predicted == f.true_label) ++correct;
    macs += f.macs;
    ++model_counts[f.model_id];
  }
  agg.accuracy = static_cast<double>(correct) / static_cast<double>(agg.total_frames);
  agg.mean_macs_per_frame = static_cast<double>(macs) / static_cast<double>(agg.total_frames);
  std::size_t best = 0;
  for (const auto& [id, count] : model_counts) {
    if (count > best) {
      best = count;
      agg.modal_model_id = id;
    }
  }
  agg.skew_event_count = report.skew_events.size();
  agg.compile_count = report.compiles.size();
  return agg;
}

/// Drive the whole system over a synthesized stream: per frame the scheduler
/// picks the affordable model, the backend emits a softmax, the probability
/// layer reweights it while an estimate is live, and the profiler consumes
/// the prediction. Segment boundaries act as charging windows: pending
/// compilations run and epoch detection restarts.
inline RunReport run_end_to_end(const SimConfig& config, ModelBank& bank,
                                const SoftmaxSource& source) {
  config.stream.validate();
  config.profiler.validate();
  config.rescale.validate();
  if (config.rescale.train_priors.size() != config.stream.universe) {
    throw Error(ErrorCode::DimensionMismatch,
                "train priors must cover the stream's class universe");
  }
  auto general = bank.cascade_for("N/A");
  if (!general) throw Error(ErrorCode::EmptyInput, "bank has no general models");
  const ModelProfile general_top = general->top();
  const double epm = config.budget.energy_per_mac;
  const double frame_rate = config.budget.frame_rate;
  if (!(frame_rate > 0.0)) throw Error(ErrorCode::InvalidArgument, "frame_rate must be positive");
  if (!(epm > 0.0)) throw Error(ErrorCode::InvalidArgument, "energy_per_mac must be positive");

  const auto frames = generate_stream(config.stream, config.seed);
  std::vector<std::vector<std::size_t>> dominants_by_segment;
  for (const auto& seg : config.stream.segments) {
    dominants_by_segment.push_back(segment_dominants(seg, config.stream.universe, config.seed));
  }

  SkewProfiler profiler(config.stream.universe, config.profiler);
  HotTracker tracker(config.profiler.pi_h);
  SchedulerState state;
  RunReport report;
  report.energy_initial = config.budget.remain_energy;
  double energy = config.budget.remain_energy;

  std::deque<std::size_t> recent_predictions;
  std::deque<bool> recent_bypassed;
  const SkewEvaluator compile_evaluator = [&source](const ModelProfile& m, const SkewEstimate& s) {
    return source.accuracy_of(m, &s.dominant);
  };

  auto dispatch = [&](SkewEventKind kind, const std::optional<SkewEstimate>& est,
                      std::uint64_t frame_index) {
    const std::string key = kind == SkewEventKind::Detected && est ? skew_key_of(est->dominant)
                                                                   : state.skew_key();
    state = on_skew_event(state, kind, est, tracker, bank);
    report.skew_events.push_back({frame_index, kind, key});
  };

  // Three conditions make an estimate worth acting on: the dominant set is
  // small relative to the universe, it carries most of the prediction mass,
  // and its classes are heavily overrepresented against the rest. In a young
  // epoch over a uniform stream, chance-inflated classes clear the profiler's
  // dominance threshold, but such sets never pair high mass with high lift.
  auto actionable = [&](const SkewEstimate& est) {
    if (est.dominant.empty()) return false;
    const auto k = static_cast<double>(est.dominant.size());
    const auto n = static_cast<double>(config.stream.universe);
    if (k > config.actionability_fraction * n) return false;
    double mass = 0.0;
    for (std::size_t c : est.dominant) mass += est.distribution[c];
    if (mass < config.actionability_mass) return false;
    if (k >= n) return false;
    // mass/k >= lift * (1 - mass)/(n - k), kept division-free
    return mass * (n - k) >= config.actionability_lift * (1.0 - mass) * k;
  };

  auto charging_window = [&](std::uint64_t frame_index) {
    if (config.toggles.compilation) {
      const std::deque<std::string> pending = tracker.pending();
      run_compile_queue(tracker, bank, true, *general, config.target_accuracy, config.delta,
                        compile_evaluator);
      for (const auto& key : pending) {
        for (const auto& m : bank.models_for(key)) {
          report.compiles.push_back({frame_index, key, m.id});
        }
      }
    }
    if (config.toggles.profiling) {
      if (state.current_skew) dispatch(SkewEventKind::Ended, std::nullopt, frame_index);
      profiler.reset();
      recent_predictions.clear();
      recent_bypassed.clear();
    }
  };

  for (std::size_t i = 0; i < frames.size(); ++i) {
    const StreamFrame& frame = frames[i];
    if (i > 0 && frame.segment != frames[i - 1].segment && config.charging_between_segments) {
      charging_window(frame.index);
    }

    ModelProfile model = general_top;
    if (config.toggles.scheduling) {
      const std::size_t frames_left = frames.size() - i;
      Budget now = config.budget;
      now.remain_energy = energy;
      now.remaining_time = static_cast<double>(frames_left) / frame_rate;
      model = choose_model(compute_epf(now), state.current_skew, bank, epm);
    }

    const auto& segment_set = dominants_by_segment[frame.segment];
    const ClassDistribution softmax = source.emit(model, frame.label, &segment_set, frame.index);
    const bool bypassed = softmax[argmax(softmax)] >= config.rescale.bypass_threshold;
    ClassDistribution decision = softmax;
    bool rescaled = false;
    if (config.toggles.rescaling && state.current_skew && !bypassed) {
      decision = rescale(softmax, state.current_skew->distribution, config.rescale.train_priors);
      rescaled = true;
    }
    const std::size_t predicted = argmax(decision);
    energy -= static_cast<double>(model.macs) * epm;
    report.energy_spent += static_cast<double>(model.macs) * epm;
    report.frames.push_back({frame.index, frame.segment, frame.label, model.id, model.macs,
                             bypassed, rescaled, predicted});

    if (!config.toggles.profiling) continue;

    const auto emitted = profiler.ingest(predicted);
    recent_predictions.push_back(predicted);
    recent_bypassed.push_back(bypassed);
    while (recent_predictions.size() > config.profiler.w_min) {
      recent_predictions.pop_front();
      recent_bypassed.pop_front();
    }

    if (emitted) {
      if (!actionable(*emitted)) {
        if (state.current_skew) dispatch(SkewEventKind::Ended, std::nullopt, frame.index);
      } else if (!state.current_skew) {
        dispatch(SkewEventKind::Detected, *emitted, frame.index);
      } else if (state.current_skew->dominant == emitted->dominant) {
        state.current_skew = *emitted;
        tracker.remember_estimate(skew_key_of(emitted->dominant), *emitted);
      } else {
        dispatch(SkewEventKind::Changed, std::nullopt, frame.index);
        dispatch(SkewEventKind::Detected, *emitted, frame.index);
      }
    } else if (profiler.last_transition() == SkewTransition::Ended && state.current_skew) {
      dispatch(SkewEventKind::Ended, std::nullopt, frame.index);
    }

    if (state.current_skew &&
        recent_predictions.size() >= config.profiler.w_min &&
        detect_change(std::vector<std::size_t>(recent_predictions.begin(), recent_predictions.end()),
                      std::vector<bool>(recent_bypassed.begin(), recent_bypassed.end()),
                      *state.current_skew, config.profiler)) {
      dispatch(SkewEventKind::Ended, std::nullopt, frame.index);
      profiler.reset();
      recent_predictions.clear();
      recent_bypassed.clear();
    }
  }

  report.aggregates = compute_metrics(report);
  if (bank.contains(report.aggregates.modal_model_id)) {
    report.aggregates.modal_model_params = bank.lookup(report.aggregates.modal_model_id).params;
  }
  return report;
}

}  // namespace skewcast
