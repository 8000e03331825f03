#pragma once

// Counter-based random numbers: the value for (seed, stream, counter) is the
// SplitMix64 finalizer of a linear combination, so every draw is addressable
// and identical on every platform.

#include <cmath>
#include <cstdint>

namespace hamshape {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream) : key_(splitmix64(seed ^ splitmix64(stream))) {}

  std::uint64_t bits(std::uint64_t counter) const {
    return splitmix64(key_ + counter * 0xD1B54A32D192ED03ull);
  }
  /// Uniform in [0, 1) with 53 random bits.
  double uniform(std::uint64_t counter) const {
    return static_cast<double>(bits(counter) >> 11) * 0x1.0p-53;
  }
  double uniform(std::uint64_t counter, double lo, double hi) const {
    return lo + (hi - lo) * uniform(counter);
  }

  /// Sequential convenience over the counter.
  double next(double lo = 0.0, double hi = 1.0) { return uniform(counter_++, lo, hi); }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace hamshape
