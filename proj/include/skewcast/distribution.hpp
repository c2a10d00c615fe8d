#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "skewcast/error.hpp"
#include "skewcast/rng.hpp"

namespace skewcast {

/// Probability vector over class indices 0..n-1.
using ClassDistribution = std::vector<double>;

inline constexpr double kDistributionTolerance = 1e-9;

inline void validate_distribution(const ClassDistribution& p, const std::string& what) {
  if (p.empty()) {
    throw Error(ErrorCode::EmptyInput, what + " is empty");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!(p[i] >= 0.0) || !std::isfinite(p[i])) {
      throw Error(ErrorCode::InvalidArgument,
                  what + "[" + std::to_string(i) + "] is negative or non-finite");
    }
    sum += p[i];
  }
  if (std::fabs(sum - 1.0) > kDistributionTolerance) {
    throw Error(ErrorCode::InvalidArgument,
                what + " sums to " + std::to_string(sum) + ", expected 1");
  }
}

inline ClassDistribution uniform_distribution(std::size_t n) {
  if (n == 0) throw Error(ErrorCode::EmptyInput, "uniform distribution over zero classes");
  return ClassDistribution(n, 1.0 / static_cast<double>(n));
}

inline std::size_t argmax(const ClassDistribution& p) {
  if (p.empty()) throw Error(ErrorCode::EmptyInput, "argmax of empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < p.size(); ++i) {
    if (p[i] > p[best]) best = i;
  }
  return best;
}

/// Draw an index from a distribution using one uniform variate.
inline std::size_t sample_index(const ClassDistribution& p, double u) {
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    acc += p[i];
    if (u < acc) return i;
  }
  return p.size() - 1;
}

inline std::size_t sample_index(const ClassDistribution& p, HashRng& rng) {
  return sample_index(p, rng.uniform01());
}

inline void normalize_in_place(ClassDistribution& p) {
  double sum = 0.0;
  for (double v : p) sum += v;
  if (sum <= 0.0) {
    throw Error(ErrorCode::ZeroDenominator, "normalizing a vector with zero total mass");
  }
  for (double& v : p) v /= sum;
}

}  // namespace skewcast
