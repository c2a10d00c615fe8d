#pragma once

#include <cstdint>

namespace skewcast {

// splitmix64 step; good avalanche, cheap, and stateless given the input.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Counter-based RNG. Draws are a pure function of (seed, stream, counter),
/// so independently keyed substreams stay aligned no matter how many values
/// other parts of the program consume. That keeps paired comparisons (same
/// stream, different engine setting) on common random numbers.
class HashRng {
 public:
  explicit HashRng(std::uint64_t seed, std::uint64_t stream = 0)
      : seed_(splitmix64(seed ^ (0xa5a5a5a5a5a5a5a5ULL + stream * 0x9e3779b97f4a7c15ULL))),
        counter_(0) {}

  std::uint64_t next() {
    return splitmix64(seed_ ^ splitmix64(counter_++));
  }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform01() {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t uniform_below(std::uint64_t n) {
    return next() % n;
  }

  double uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform01();
  }

  /// A child generator keyed off this one; deterministic per (label, index).
  HashRng child(std::uint64_t label, std::uint64_t index) const {
    return HashRng(seed_ ^ splitmix64(label * 0x9e3779b97f4a7c15ULL + 0x632be59bd9b4e019ULL),
                   index);
  }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_;
};

}  // namespace skewcast
