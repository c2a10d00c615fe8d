#pragma once

#include <cstddef>
#include <string>

#include "skewcast/distribution.hpp"
#include "skewcast/error.hpp"

namespace skewcast {

/// Settings for posterior rescaling at inference time.
struct RescaleConfig {
  ClassDistribution train_priors;  ///< class frequencies the classifier was fit under
  double bypass_threshold = 0.9;   ///< skip rescaling when the top posterior is at least this

  void validate() const {
    validate_distribution(train_priors, "train_priors");
    for (std::size_t i = 0; i < train_priors.size(); ++i) {
      if (train_priors[i] <= 0.0) {
        throw Error(ErrorCode::InvalidArgument,
                    "train_priors[" + std::to_string(i) + "] must be strictly positive");
      }
    }
    if (!(bypass_threshold > 0.0 && bypass_threshold <= 1.0)) {
      throw Error(ErrorCode::InvalidArgument, "bypass_threshold must be in (0, 1]");
    }
  }
};

/// Reweight a posterior toward deployment-time class frequencies.
///
/// Each entry is multiplied by the ratio of the current prior to the training
/// prior, then the vector is renormalized:
///
///   r_i = (q_i / s_i) * p_i / sum_j (q_j / s_j) * p_j
///
/// Classes absent from the current prior (q_i = 0) end with zero mass.
inline ClassDistribution rescale(const ClassDistribution& posterior,
                                 const ClassDistribution& current_priors,
                                 const ClassDistribution& train_priors) {
  validate_distribution(posterior, "posterior");
  validate_distribution(current_priors, "current_priors");
  validate_distribution(train_priors, "train_priors");
  if (posterior.size() != current_priors.size() || posterior.size() != train_priors.size()) {
    throw Error(ErrorCode::DimensionMismatch,
                "posterior, current_priors and train_priors must have equal length");
  }
  ClassDistribution out(posterior.size());
  double total = 0.0;
  for (std::size_t i = 0; i < posterior.size(); ++i) {
    if (train_priors[i] <= 0.0) {
      throw Error(ErrorCode::InvalidArgument,
                  "train_priors[" + std::to_string(i) + "] must be strictly positive");
    }
    out[i] = current_priors[i] / train_priors[i] * posterior[i];
    total += out[i];
  }
  if (total <= 0.0) {
    throw Error(ErrorCode::ZeroDenominator,
                "rescaled posterior has zero total mass; current priors exclude "
                "every class the posterior supports");
  }
  for (double& v : out) v /= total;
  return out;
}

/// Rescale unless the classifier is already confident.
///
/// When the largest posterior entry reaches the bypass threshold the vector is
/// returned untouched; prior reweighting only arbitrates uncertain frames.
inline ClassDistribution rescale_with_bypass(const ClassDistribution& posterior,
                                             const ClassDistribution& current_priors,
                                             const RescaleConfig& config) {
  validate_distribution(posterior, "posterior");
  if (posterior[argmax(posterior)] >= config.bypass_threshold) {
    return posterior;
  }
  return rescale(posterior, current_priors, config.train_priors);
}

/// Final label decision: argmax of the (possibly bypassed) rescaled posterior.
inline std::size_t predict(const ClassDistribution& posterior,
                           const ClassDistribution& current_priors,
                           const RescaleConfig& config) {
  return argmax(rescale_with_bypass(posterior, current_priors, config));
}

}  // namespace skewcast
