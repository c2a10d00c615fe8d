#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "skewcast/distribution.hpp"
#include "skewcast/error.hpp"
#include "skewcast/model_bank.hpp"
#include "skewcast/network.hpp"
#include "skewcast/profiler.hpp"

namespace skewcast {

struct Cost {
  long long macs = 0;
  long long params = 0;
};

struct ForwardStats {
  long long macs = 0;  ///< multiply-accumulates actually executed
};

namespace detail {

/// For each channel of a feature map, an equivalence label: channels sharing a
/// label hold identical values by construction (copies made during recovery).
/// Folding convolution weights over labels is what keeps masked-layer inputs
/// cheap without changing results.
using ChannelSources = std::vector<std::size_t>;

inline ChannelSources distinct_sources(std::size_t c) {
  ChannelSources src(c);
  for (std::size_t i = 0; i < c; ++i) src[i] = i;
  return src;
}

/// First physical channel per distinct label, in first-appearance order.
inline std::vector<std::size_t> representatives(const ChannelSources& src) {
  std::vector<std::size_t> reps;
  std::map<std::size_t, std::size_t> seen;  // label -> representative physical index
  for (std::size_t c = 0; c < src.size(); ++c) {
    if (seen.emplace(src[c], c).second) reps.push_back(c);
  }
  return reps;
}

/// Fill target for each masked channel: nearest kept channel below, wrapping
/// to the highest kept channel when none exists below.
inline std::vector<std::size_t> fill_sources(const std::vector<bool>& keep) {
  std::size_t highest_kept = keep.size();
  for (std::size_t c = keep.size(); c-- > 0;) {
    if (keep[c]) {
      highest_kept = c;
      break;
    }
  }
  std::vector<std::size_t> fill(keep.size());
  std::size_t last_kept = highest_kept;  // wrap target until a lower kept channel appears
  for (std::size_t c = 0; c < keep.size(); ++c) {
    if (keep[c]) last_kept = c;
    fill[c] = keep[c] ? c : last_kept;
  }
  return fill;
}

/// Spatial subsample by step (rows/cols 0, step, 2*step, ...).
inline Tensor subsample(const Tensor& in, std::size_t step) {
  if (step == 1) return in;
  TensorShape s{(in.shape.h + step - 1) / step, (in.shape.w + step - 1) / step, in.shape.c};
  Tensor out(s);
  for (std::size_t y = 0; y < s.h; ++y)
    for (std::size_t x = 0; x < s.w; ++x)
      for (std::size_t c = 0; c < s.c; ++c) out.at(y, x, c) = in.at(y * step, x * step, c);
  return out;
}

/// Nearest-neighbor upsample: out(y, x) = in(y / factor, x / factor).
inline Tensor upsample(const Tensor& in, TensorShape target, std::size_t factor) {
  Tensor out(target);
  for (std::size_t y = 0; y < target.h; ++y)
    for (std::size_t x = 0; x < target.w; ++x)
      for (std::size_t c = 0; c < target.c; ++c) out.at(y, x, c) = in.at(y / factor, x / factor, c);
  return out;
}

/// Channel-width adjustment for a skipped layer: tile cyclically when the map
/// is too narrow, take the leading channels when too wide.
inline void adjust_channels(Tensor& map, ChannelSources& src, std::size_t want) {
  const std::size_t have = map.shape.c;
  if (have == want) return;
  Tensor out(TensorShape{map.shape.h, map.shape.w, want});
  ChannelSources out_src(want);
  for (std::size_t y = 0; y < map.shape.h; ++y)
    for (std::size_t x = 0; x < map.shape.w; ++x)
      for (std::size_t c = 0; c < want; ++c) out.at(y, x, c) = map.at(y, x, c % have);
  for (std::size_t c = 0; c < want; ++c) out_src[c] = src[c % have];
  map = std::move(out);
  src = std::move(out_src);
}

inline std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

}  // namespace detail

/// Run the network under a perforation plan. Masked-off conv layers pass the
/// previous map through (spatially subsampled by the layer stride, channels
/// tiled or truncated to the layer width); masked channels of active layers
/// are filled from the nearest kept channel below, wrapping; stride-boosted
/// layers compute on a coarser grid and are restored by nearest-neighbor
/// upsampling. Every hidden map keeps the shape the unmasked network produces.
inline ClassDistribution forward(const Network& net, const MaskSet& mask, const Tensor& input,
                                 ForwardStats* stats = nullptr) {
  mask.validate(net);
  if (!(input.shape == net.input_shape)) {
    throw Error(ErrorCode::ShapeInconsistent,
                "input is " + input.shape.str() + ", network expects " + net.input_shape.str());
  }
  Tensor map = input;
  detail::ChannelSources src = detail::distinct_sources(input.shape.c);
  long long macs = 0;
  std::size_t ci = 0;

  for (std::size_t li = 0; li < net.layers.size(); ++li) {
    const LayerSpec& layer = net.layers[li];
    switch (layer.kind) {
      case LayerKind::Conv: {
        const TensorShape out_shape = Network::layer_output_shape(layer, map.shape, li);
        if (!mask.layer_on[ci]) {
          map = detail::subsample(map, layer.stride);
          detail::adjust_channels(map, src, layer.out_channels);
          ++ci;
          break;
        }
        const std::size_t boost = mask.stride_boost[ci];
        const std::size_t step = layer.stride * boost;
        const std::size_t d = layer.kernel;
        const std::size_t pad = (d - 1) / 2;
        const TensorShape small{detail::ceil_div(map.shape.h, step),
                                detail::ceil_div(map.shape.w, step), layer.out_channels};
        const auto reps = detail::representatives(src);
        const bool identity = reps.size() == map.shape.c;

        // Weights folded over duplicate input channels, rep-major access.
        std::vector<float> folded;
        if (!identity) {
          folded.assign(layer.out_channels * d * d * reps.size(), 0.0f);
          std::map<std::size_t, std::size_t> rep_slot;
          for (std::size_t r = 0; r < reps.size(); ++r) rep_slot[src[reps[r]]] = r;
          for (std::size_t k = 0; k < layer.out_channels; ++k)
            for (std::size_t ky = 0; ky < d; ++ky)
              for (std::size_t kx = 0; kx < d; ++kx)
                for (std::size_t c = 0; c < map.shape.c; ++c) {
                  const std::size_t slot = rep_slot.at(src[c]);
                  folded[((k * d + ky) * d + kx) * reps.size() + slot] +=
                      layer.weights[((k * d + ky) * d + kx) * map.shape.c + c];
                }
        }
        auto weight_at = [&](std::size_t k, std::size_t ky, std::size_t kx, std::size_t r) {
          return identity ? layer.weights[((k * d + ky) * d + kx) * map.shape.c + reps[r]]
                          : folded[((k * d + ky) * d + kx) * reps.size() + r];
        };

        Tensor out(small);
        for (std::size_t k = 0; k < layer.out_channels; ++k) {
          if (!mask.channel_keep[ci][k]) continue;
          for (std::size_t y = 0; y < small.h; ++y) {
            for (std::size_t x = 0; x < small.w; ++x) {
              float acc = layer.bias[k];
              for (std::size_t ky = 0; ky < d; ++ky) {
                for (std::size_t kx = 0; kx < d; ++kx) {
                  const long long in_y = static_cast<long long>(y * step + ky) - static_cast<long long>(pad);
                  const long long in_x = static_cast<long long>(x * step + kx) - static_cast<long long>(pad);
                  const bool inside = in_y >= 0 && in_y < static_cast<long long>(map.shape.h) &&
                                      in_x >= 0 && in_x < static_cast<long long>(map.shape.w);
                  for (std::size_t r = 0; r < reps.size(); ++r) {
                    const float v = inside ? map.at(static_cast<std::size_t>(in_y),
                                                    static_cast<std::size_t>(in_x), reps[r])
                                           : 0.0f;
                    acc += v * weight_at(k, ky, kx, r);
                    ++macs;
                  }
                }
              }
              if (layer.activation == Activation::Relu && acc < 0.0f) acc = 0.0f;
              out.at(y, x, k) = acc;
            }
          }
        }

        detail::ChannelSources out_src(layer.out_channels);
        const auto fill = detail::fill_sources(mask.channel_keep[ci]);
        for (std::size_t k = 0; k < layer.out_channels; ++k) {
          out_src[k] = fill[k];
          if (mask.channel_keep[ci][k]) continue;
          for (std::size_t y = 0; y < small.h; ++y)
            for (std::size_t x = 0; x < small.w; ++x) out.at(y, x, k) = out.at(y, x, fill[k]);
        }

        map = boost == 1 ? std::move(out) : detail::upsample(out, out_shape, boost);
        src = std::move(out_src);
        ++ci;
        break;
      }
      case LayerKind::GlobalAveragePool: {
        Tensor out(TensorShape{1, 1, map.shape.c});
        const float denom = static_cast<float>(map.shape.h * map.shape.w);
        for (std::size_t c = 0; c < map.shape.c; ++c) {
          float sum = 0.0f;
          for (std::size_t y = 0; y < map.shape.h; ++y)
            for (std::size_t x = 0; x < map.shape.w; ++x) sum += map.at(y, x, c);
          out.at(0, 0, c) = sum / denom;
        }
        map = std::move(out);
        break;
      }
      case LayerKind::FullyConnected: {
        if (layer.in_channels != map.shape.volume()) {
          throw Error(ErrorCode::ShapeInconsistent,
                      "layer " + std::to_string(li) + ": fully-connected expects " +
                          std::to_string(layer.in_channels) + " inputs, got " +
                          std::to_string(map.shape.volume()));
        }
        Tensor out(TensorShape{1, 1, layer.out_channels});
        for (std::size_t o = 0; o < layer.out_channels; ++o) {
          float acc = layer.bias[o];
          for (std::size_t i = 0; i < layer.in_channels; ++i) {
            acc += map.data[i] * layer.weights[o * layer.in_channels + i];
            ++macs;
          }
          if (layer.activation == Activation::Relu && acc < 0.0f) acc = 0.0f;
          out.at(0, 0, o) = acc;
        }
        map = std::move(out);
        src = detail::distinct_sources(layer.out_channels);
        break;
      }
      case LayerKind::Softmax: {
        if (map.shape.h != 1 || map.shape.w != 1) {
          throw Error(ErrorCode::ShapeInconsistent,
                      "layer " + std::to_string(li) + ": softmax input must be a 1x1 vector");
        }
        ClassDistribution logits(map.data.begin(), map.data.end());
        const double peak = *std::max_element(logits.begin(), logits.end());
        double total = 0.0;
        for (double& v : logits) {
          v = std::exp(v - peak);
          total += v;
        }
        for (double& v : logits) v /= total;
        if (stats) stats->macs = macs;
        return logits;
      }
    }
  }
  throw Error(ErrorCode::InvalidArgument, "network has no softmax output layer");
}

/// Analytic cost of running the network under a mask. Conv layers cost
/// grid_h * grid_w * kept_out * d * d * distinct_in multiply-accumulates on
/// the (possibly boosted) grid; parameters count folded kept weights plus
/// kept biases. Skipped layers cost nothing. Matches the instrumented
/// forward pass exactly.
inline Cost cost_of(const Network& net, const MaskSet& mask) {
  mask.validate(net);
  Cost cost;
  TensorShape shape = net.input_shape;
  detail::ChannelSources src = detail::distinct_sources(shape.c);
  std::size_t ci = 0;
  for (std::size_t li = 0; li < net.layers.size(); ++li) {
    const LayerSpec& layer = net.layers[li];
    switch (layer.kind) {
      case LayerKind::Conv: {
        const TensorShape out_shape = Network::layer_output_shape(layer, shape, li);
        if (!mask.layer_on[ci]) {
          detail::ChannelSources out_src(layer.out_channels);
          for (std::size_t c = 0; c < layer.out_channels; ++c) out_src[c] = src[c % shape.c];
          src = std::move(out_src);
          shape = out_shape;
          ++ci;
          break;
        }
        const std::size_t step = layer.stride * mask.stride_boost[ci];
        const std::size_t grid_h = detail::ceil_div(shape.h, step);
        const std::size_t grid_w = detail::ceil_div(shape.w, step);
        const std::size_t distinct_in = detail::representatives(src).size();
        std::size_t kept_out = 0;
        for (bool b : mask.channel_keep[ci]) kept_out += b ? 1 : 0;
        const long long kernel_area = static_cast<long long>(layer.kernel) * layer.kernel;
        cost.macs += static_cast<long long>(grid_h) * grid_w * kept_out * kernel_area * distinct_in;
        cost.params += static_cast<long long>(kept_out) * kernel_area * distinct_in + kept_out;

        const auto fill = detail::fill_sources(mask.channel_keep[ci]);
        detail::ChannelSources out_src(layer.out_channels);
        for (std::size_t c = 0; c < layer.out_channels; ++c) out_src[c] = fill[c];
        src = std::move(out_src);
        shape = out_shape;
        ++ci;
        break;
      }
      case LayerKind::GlobalAveragePool:
        shape = TensorShape{1, 1, shape.c};
        break;
      case LayerKind::FullyConnected:
        cost.macs += static_cast<long long>(layer.in_channels) * layer.out_channels;
        cost.params += static_cast<long long>(layer.in_channels) * layer.out_channels +
                       static_cast<long long>(layer.out_channels);
        shape = TensorShape{1, 1, layer.out_channels};
        src = detail::distinct_sources(layer.out_channels);
        break;
      case LayerKind::Softmax:
        break;
    }
  }
  return cost;
}

struct EvalSample {
  Tensor input;
  std::size_t label = 0;
};
using EvalSet = std::vector<EvalSample>;

/// Top-1 accuracy over the evaluation set; with a skew given, only samples
/// whose label belongs to the dominant set are scored.
inline double evaluate(const Network& net, const MaskSet& mask, const EvalSet& evalset,
                       const std::optional<SkewEstimate>& skew = std::nullopt) {
  if (evalset.empty()) throw Error(ErrorCode::EmptyInput, "evaluation set is empty");
  std::size_t scored = 0, correct = 0;
  for (const auto& sample : evalset) {
    if (sample.label >= net.n_classes) {
      throw Error(ErrorCode::InvalidArgument,
                  "evaluation label " + std::to_string(sample.label) + " outside n_classes");
    }
    if (skew && !std::binary_search(skew->dominant.begin(), skew->dominant.end(), sample.label)) {
      continue;
    }
    ++scored;
    if (argmax(forward(net, mask, sample.input)) == sample.label) ++correct;
  }
  if (scored == 0) {
    throw Error(ErrorCode::EmptyInput, "no evaluation samples match the skew's dominant classes");
  }
  return static_cast<double>(correct) / static_cast<double>(scored);
}

struct PruneSnapshot {
  MaskSet mask;
  long long macs = 0;
  long long params = 0;
  double accuracy = 0.0;
};

struct PruneConfig {
  std::size_t channel_group_divisor = 8;  ///< groups of max(1, C/8) channels
  std::size_t max_stride_boost = 4;
  bool include_initial = true;  ///< record the unpruned network as snapshot 0
};

/// Accuracy of a candidate mask; lets callers swap real evaluation sets for
/// declared oracles.
using MaskEvaluator = std::function<double(const Network&, const MaskSet&)>;

namespace detail {

struct PruneCandidate {
  enum class Kind { LayerOff, ChannelGroupOff, StrideBoost } kind;
  std::size_t conv_index;
  std::size_t group_begin = 0;
  std::size_t group_end = 0;

  MaskSet applied_to(const MaskSet& base) const {
    MaskSet m = base;
    switch (kind) {
      case Kind::LayerOff: m.layer_on[conv_index] = false; break;
      case Kind::ChannelGroupOff:
        for (std::size_t c = group_begin; c < group_end; ++c) m.channel_keep[conv_index][c] = false;
        break;
      case Kind::StrideBoost: m.stride_boost[conv_index] *= 2; break;
    }
    return m;
  }
};

inline std::vector<PruneCandidate> enumerate_candidates(const Network& net, const MaskSet& mask,
                                                        const PruneConfig& config) {
  std::vector<PruneCandidate> out;
  std::size_t on_layers = 0;
  for (bool b : mask.layer_on) on_layers += b ? 1 : 0;
  std::size_t ci = 0;
  for (const auto& layer : net.layers) {
    if (layer.kind != LayerKind::Conv) continue;
    if (mask.layer_on[ci]) {
      if (on_layers > 1) {
        out.push_back({PruneCandidate::Kind::LayerOff, ci});
      }
      const std::size_t c_total = layer.out_channels;
      const std::size_t group = std::max<std::size_t>(1, c_total / config.channel_group_divisor);
      std::size_t kept = 0;
      for (bool b : mask.channel_keep[ci]) kept += b ? 1 : 0;
      for (std::size_t begin = 0; begin < c_total; begin += group) {
        const std::size_t end = std::min(begin + group, c_total);
        bool fully_kept = true;
        for (std::size_t c = begin; c < end; ++c) fully_kept = fully_kept && mask.channel_keep[ci][c];
        if (fully_kept && kept > end - begin) {
          out.push_back({PruneCandidate::Kind::ChannelGroupOff, ci, begin, end});
        }
      }
      if (mask.stride_boost[ci] * 2 <= config.max_stride_boost) {
        out.push_back({PruneCandidate::Kind::StrideBoost, ci});
      }
    }
    ++ci;
  }
  return out;
}

}  // namespace detail

/// Greedy, training-free pruning. Each round tries every remaining removal
/// position, keeps the one costing the least accuracy, and records the state.
/// Candidates that fail to shrink the mac count are skipped, so the recorded
/// cost sequence strictly decreases and the loop always terminates.
inline std::vector<PruneSnapshot> greedy_prune(const Network& net, const MaskEvaluator& evaluator,
                                               const PruneConfig& config = {}) {
  net.validate();
  MaskSet mask = MaskSet::all_on(net);
  std::vector<PruneSnapshot> snapshots;
  Cost current = cost_of(net, mask);
  if (config.include_initial) {
    snapshots.push_back({mask, current.macs, current.params, evaluator(net, mask)});
  }
  while (true) {
    const auto candidates = detail::enumerate_candidates(net, mask, config);
    bool applied = false;
    double best_accuracy = -1.0;
    MaskSet best_mask;
    Cost best_cost;
    for (const auto& cand : candidates) {
      MaskSet trial = cand.applied_to(mask);
      const Cost trial_cost = cost_of(net, trial);
      if (trial_cost.macs >= current.macs) continue;
      const double acc = evaluator(net, trial);
      if (acc > best_accuracy) {
        best_accuracy = acc;
        best_mask = std::move(trial);
        best_cost = trial_cost;
        applied = true;
      }
    }
    if (!applied) break;
    mask = std::move(best_mask);
    current = best_cost;
    snapshots.push_back({mask, current.macs, current.params, best_accuracy});
  }
  return snapshots;
}

/// Convenience wrapper: prune against top-1 accuracy on a held-out set.
inline std::vector<PruneSnapshot> greedy_prune(const Network& net, const EvalSet& evalset,
                                               const PruneConfig& config = {}) {
  return greedy_prune(
      net,
      [&evalset](const Network& n, const MaskSet& m) { return evaluate(n, m, evalset); },
      config);
}

/// Turn prune snapshots into a general-purpose cascade: one profile per
/// snapshot, Pareto-filtered to the efficiency frontier. This single ladder
/// is what every skew gets selected from.
inline Cascade build_cascade(const std::vector<PruneSnapshot>& snapshots,
                             const std::string& id_prefix = "prune") {
  if (snapshots.empty()) throw Error(ErrorCode::EmptyInput, "no snapshots to build from");
  std::vector<ModelProfile> members;
  for (std::size_t i = 0; i < snapshots.size(); ++i) {
    ModelProfile p;
    p.id = id_prefix + "-r" + std::to_string(i);
    p.kind = ModelKind::General;
    p.skew_key = "N/A";
    p.params = snapshots[i].params;
    p.macs = snapshots[i].macs;
    p.accuracy = snapshots[i].accuracy;
    p.network_ref = p.id;
    members.push_back(std::move(p));
  }
  return make_cascade("N/A", std::move(members));
}

struct SelectionResult {
  ModelProfile profile;
  std::size_t index = 0;
  double measured_accuracy = 0.0;
  bool target_met = true;
  std::size_t evaluator_calls = 0;
};

/// Cheapest cascade member whose measured accuracy reaches target - delta,
/// found by bisection. The evaluator is memoized; distinct calls stay within
/// ceil(log2(size)) + 1. When even the top member falls short, the top member
/// comes back flagged as unmet.
inline SelectionResult binary_search_select(const Cascade& cascade, double target_accuracy,
                                            double delta,
                                            const std::function<double(std::size_t)>& evaluator) {
  cascade.validate();
  if (!(target_accuracy > 0.0 && target_accuracy <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "target accuracy must be in (0, 1]");
  }
  if (delta < 0.0) throw Error(ErrorCode::InvalidArgument, "delta must be nonnegative");

  std::vector<std::optional<double>> memo(cascade.members.size());
  std::size_t calls = 0;
  auto measured = [&](std::size_t i) {
    if (!memo[i]) {
      memo[i] = evaluator(i);
      ++calls;
    }
    return *memo[i];
  };
  auto feasible = [&](std::size_t i) { return measured(i) >= target_accuracy - delta; };

  std::size_t lo = 0, hi = cascade.members.size() - 1;
  while (lo < hi) {
    const std::size_t mid = lo + (hi - lo) / 2;
    if (feasible(mid)) {
      hi = mid;
    } else {
      lo = mid + 1;
    }
  }
  SelectionResult result;
  result.index = lo;
  result.target_met = feasible(lo);
  result.measured_accuracy = measured(lo);
  result.profile = cascade.members[lo];
  result.evaluator_calls = calls;
  return result;
}

/// Per-skew accuracy of a cascade member.
using SkewEvaluator = std::function<double(const ModelProfile&, const SkewEstimate&)>;

/// Compilation entry point: select from the shared general cascade against
/// the skew's own data and register the winner under the skew key. Calling
/// again for a key already served returns the registered model untouched.
inline ModelProfile compile_for_skew(ModelBank& bank, const Cascade& general_cascade,
                                     const SkewEstimate& skew, double target_accuracy,
                                     double delta, const SkewEvaluator& evaluator) {
  const std::string key = skew_key_of(skew.dominant);
  if (auto existing = bank.cascade_for(key)) {
    return existing->members.front();
  }
  SelectionResult sel = binary_search_select(
      general_cascade, target_accuracy, delta,
      [&](std::size_t i) { return evaluator(general_cascade.members[i], skew); });
  ModelProfile compiled = sel.profile;
  compiled.id = "skew-" + key + "-" + sel.profile.id;
  compiled.kind = ModelKind::Compiled;
  compiled.skew_key = key;
  compiled.accuracy = sel.measured_accuracy;
  compiled.network_ref = sel.profile.network_ref;
  bank.register_model(compiled);
  return compiled;
}

}  // namespace skewcast
