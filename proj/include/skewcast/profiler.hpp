#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "skewcast/distribution.hpp"
#include "skewcast/error.hpp"

namespace skewcast {

enum class DistanceMetric { Linf, L1 };

/// Knobs for windowed skew detection and the hot/cold dichotomy.
struct ProfilerConfig {
  std::size_t w_min = 30;             ///< frames per detection window
  double pi_r = 2.0;                  ///< max count distance for two windows to share an epoch
  double dominance_threshold = 0.04;  ///< min epoch frequency for a class to count as dominant
  double change_fraction = 0.2;       ///< confident out-of-skew fraction that triggers a restart
  std::size_t pi_h = 3;               ///< appearances before a skew is considered hot
  double smoothing = 1e-3;            ///< Laplace mass added per class when estimating priors
  DistanceMetric metric = DistanceMetric::Linf;

  /// Defaults sized to a class universe: dominance at twice the uniform share.
  static ProfilerConfig defaults(std::size_t n_universe) {
    if (n_universe == 0) throw Error(ErrorCode::EmptyInput, "class universe is empty");
    ProfilerConfig config;
    config.dominance_threshold = std::min(0.9, 2.0 / static_cast<double>(n_universe));
    return config;
  }

  void validate() const {
    if (w_min < 1) throw Error(ErrorCode::InvalidArgument, "w_min must be at least 1");
    if (pi_r < 0.0) throw Error(ErrorCode::InvalidArgument, "pi_r must be nonnegative");
    if (!(dominance_threshold > 0.0 && dominance_threshold < 1.0)) {
      throw Error(ErrorCode::InvalidArgument, "dominance_threshold must be in (0, 1)");
    }
    if (!(change_fraction > 0.0 && change_fraction < 1.0)) {
      throw Error(ErrorCode::InvalidArgument, "change_fraction must be in (0, 1)");
    }
    if (pi_h < 1) throw Error(ErrorCode::InvalidArgument, "pi_h must be at least 1");
    if (!(smoothing > 0.0)) throw Error(ErrorCode::InvalidArgument, "smoothing must be positive");
  }
};

/// Per-class appearance counts over one closed window.
struct WindowRecord {
  std::vector<long long> counts;
  std::size_t window_len = 0;
};

/// Count distance between two equal-length windows.
inline long long window_distance(const WindowRecord& a, const WindowRecord& b,
                                 DistanceMetric metric = DistanceMetric::Linf) {
  if (a.window_len != b.window_len || a.counts.size() != b.counts.size()) {
    throw Error(ErrorCode::DimensionMismatch, "window records have mismatched shape");
  }
  long long dist = 0;
  for (std::size_t c = 0; c < a.counts.size(); ++c) {
    long long d = a.counts[c] - b.counts[c];
    if (d < 0) d = -d;
    if (metric == DistanceMetric::Linf) {
      dist = std::max(dist, d);
    } else {
      dist += d;
    }
  }
  return dist;
}

/// Skew description distilled from one epoch of predictions.
struct SkewEstimate {
  std::vector<std::size_t> dominant;  ///< sorted class ids carrying the skew
  ClassDistribution distribution;     ///< smoothed frequencies over the full universe
  std::size_t epoch_len = 0;          ///< frames accumulated into this estimate
};

/// Canonical registry key for a dominant set.
inline std::string skew_key_of(const std::vector<std::size_t>& dominant) {
  std::string key;
  for (std::size_t i = 0; i < dominant.size(); ++i) {
    if (i) key += '-';
    key += std::to_string(dominant[i]);
  }
  return key;
}

/// Distill per-class epoch counts into dominant set + smoothed distribution.
/// Classes at or above the dominance threshold form the dominant set; when
/// none qualifies the observed support stands in, so the set is never empty.
inline SkewEstimate estimate_skew(const std::vector<long long>& epoch_counts,
                                  std::size_t epoch_len, const ProfilerConfig& config) {
  if (epoch_counts.empty() || epoch_len == 0) {
    throw Error(ErrorCode::EmptyInput, "epoch has no frames");
  }
  SkewEstimate est;
  est.epoch_len = epoch_len;
  const double n = static_cast<double>(epoch_counts.size());
  const double total = static_cast<double>(epoch_len);
  est.distribution.resize(epoch_counts.size());
  for (std::size_t c = 0; c < epoch_counts.size(); ++c) {
    est.distribution[c] =
        (static_cast<double>(epoch_counts[c]) + config.smoothing) / (total + config.smoothing * n);
    if (static_cast<double>(epoch_counts[c]) / total >= config.dominance_threshold) {
      est.dominant.push_back(c);
    }
  }
  if (est.dominant.empty()) {
    for (std::size_t c = 0; c < epoch_counts.size(); ++c) {
      if (epoch_counts[c] > 0) est.dominant.push_back(c);
    }
  }
  return est;
}

/// True when confidently-predicted classes keep landing outside the skew.
/// Looks at the trailing w_min frames; a frame counts against the estimate
/// when it bypassed rescaling and its prediction is not in the dominant set.
inline bool detect_change(const std::vector<std::size_t>& predictions,
                          const std::vector<bool>& bypassed, const SkewEstimate& estimate,
                          const ProfilerConfig& config) {
  if (predictions.size() != bypassed.size()) {
    throw Error(ErrorCode::DimensionMismatch, "predictions and bypass flags differ in length");
  }
  if (predictions.empty()) return false;
  const std::size_t window = std::min(config.w_min, predictions.size());
  const std::size_t begin = predictions.size() - window;
  std::size_t outside = 0;
  for (std::size_t i = begin; i < predictions.size(); ++i) {
    if (!bypassed[i]) continue;
    if (!std::binary_search(estimate.dominant.begin(), estimate.dominant.end(), predictions[i])) {
      ++outside;
    }
  }
  return static_cast<double>(outside) / static_cast<double>(window) > config.change_fraction;
}

enum class HeatStatus { Cold, Hot };

/// Appearance counter deciding which skews earn a specialized cascade.
class HotTracker {
 public:
  explicit HotTracker(std::size_t pi_h = 3) : pi_h_(pi_h) {}

  /// Count one appearance; the first crossing of pi_h enqueues the key.
  HeatStatus record_appearance(const std::string& skew_key) {
    auto& count = appearances_[skew_key];
    ++count;
    if (count >= static_cast<long long>(pi_h_) && !hot_.count(skew_key)) {
      hot_.insert({skew_key, true});
      pending_compile_.push_back(skew_key);
    }
    return status(skew_key);
  }

  HeatStatus status(const std::string& skew_key) const {
    return hot_.count(skew_key) ? HeatStatus::Hot : HeatStatus::Cold;
  }

  long long appearances(const std::string& skew_key) const {
    auto it = appearances_.find(skew_key);
    return it == appearances_.end() ? 0 : it->second;
  }

  /// Keep the freshest estimate per key so a later compile has its target.
  void remember_estimate(const std::string& skew_key, const SkewEstimate& estimate) {
    estimates_[skew_key] = estimate;
  }

  std::optional<SkewEstimate> estimate_for(const std::string& skew_key) const {
    auto it = estimates_.find(skew_key);
    if (it == estimates_.end()) return std::nullopt;
    return it->second;
  }

  bool has_pending() const { return !pending_compile_.empty(); }

  std::optional<std::string> next_pending() {
    if (pending_compile_.empty()) return std::nullopt;
    std::string key = pending_compile_.front();
    pending_compile_.pop_front();
    return key;
  }

  const std::deque<std::string>& pending() const { return pending_compile_; }

 private:
  std::size_t pi_h_;
  std::map<std::string, long long> appearances_;
  std::map<std::string, bool> hot_;
  std::map<std::string, SkewEstimate> estimates_;
  std::deque<std::string> pending_compile_;
};

/// What a window close did to the active estimate.
enum class SkewTransition { None, Began, Continued, Changed, Ended };

/// Windowed epoch detector. Predictions stream in one at a time; every w_min
/// frames the window closes and is compared against the previous window. Near
/// windows concatenate into an epoch whose running estimate is emitted; a far
/// window breaks the epoch, and the previous estimate survives one grace
/// window before the detector drops to no-skew.
class SkewProfiler {
 public:
  SkewProfiler(std::size_t n_universe, ProfilerConfig config)
      : n_(n_universe), config_(config), open_counts_(n_universe, 0) {
    if (n_universe == 0) throw Error(ErrorCode::EmptyInput, "class universe is empty");
    config_.validate();
  }

  /// Feed one prediction; an updated estimate comes back on confirming closes.
  std::optional<SkewEstimate> ingest(std::size_t y) {
    if (y >= n_) {
      throw Error(ErrorCode::InvalidArgument,
                  "class id " + std::to_string(y) + " outside universe of " + std::to_string(n_));
    }
    last_transition_ = SkewTransition::None;
    ++open_counts_[y];
    ++open_len_;
    if (open_len_ < config_.w_min) return std::nullopt;
    return close_window();
  }

  const std::optional<SkewEstimate>& active() const { return active_; }
  bool in_grace() const { return grace_; }
  SkewTransition last_transition() const { return last_transition_; }
  std::size_t universe() const { return n_; }
  const ProfilerConfig& config() const { return config_; }

  /// Drop all window/epoch state and any active estimate.
  void reset() {
    std::fill(open_counts_.begin(), open_counts_.end(), 0);
    open_len_ = 0;
    prev_window_.reset();
    epoch_counts_.assign(n_, 0);
    epoch_len_ = 0;
    grace_ = false;
    if (active_) last_transition_ = SkewTransition::Ended;
    active_.reset();
  }

 private:
  std::optional<SkewEstimate> close_window() {
    WindowRecord closed{open_counts_, open_len_};
    std::fill(open_counts_.begin(), open_counts_.end(), 0);
    open_len_ = 0;

    std::optional<SkewEstimate> emitted;
    if (!prev_window_) {
      start_epoch(closed);
    } else {
      const long long dist = window_distance(*prev_window_, closed, config_.metric);
      if (static_cast<double>(dist) <= config_.pi_r) {
        extend_epoch(closed);
        emitted = estimate_skew(epoch_counts_, epoch_len_, config_);
        apply_emission(*emitted);
      } else {
        handle_break(closed);
      }
    }
    prev_window_ = std::move(closed);
    return emitted;
  }

  void start_epoch(const WindowRecord& w) {
    epoch_counts_ = w.counts;
    epoch_len_ = w.window_len;
  }

  void extend_epoch(const WindowRecord& w) {
    if (epoch_len_ == 0) {
      start_epoch(w);
      return;
    }
    for (std::size_t c = 0; c < n_; ++c) epoch_counts_[c] += w.counts[c];
    epoch_len_ += w.window_len;
  }

  void apply_emission(const SkewEstimate& est) {
    if (!active_) {
      last_transition_ = SkewTransition::Began;
    } else if (active_->dominant == est.dominant) {
      last_transition_ = SkewTransition::Continued;
    } else {
      last_transition_ = SkewTransition::Changed;
    }
    active_ = est;
    grace_ = false;
  }

  void handle_break(const WindowRecord& w) {
    start_epoch(w);
    if (active_ && !grace_) {
      grace_ = true;  // old estimate stays live for one more window
    } else if (active_ && grace_) {
      active_.reset();
      grace_ = false;
      last_transition_ = SkewTransition::Ended;
    }
  }

  std::size_t n_;
  ProfilerConfig config_;
  std::vector<long long> open_counts_;
  std::size_t open_len_ = 0;
  std::optional<WindowRecord> prev_window_;
  std::vector<long long> epoch_counts_;
  std::size_t epoch_len_ = 0;
  std::optional<SkewEstimate> active_;
  bool grace_ = false;
  SkewTransition last_transition_ = SkewTransition::None;
};

}  // namespace skewcast
