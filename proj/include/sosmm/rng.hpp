#pragma once

// Counter-based generator: the k-th draw of stream `seed` is
// splitmix64(seed + (k + 1) * 0x9E3779B97F4A7C15).  Doubles take the top 53 bits.

#include <cstdint>

namespace sosmm {

inline std::uint64_t splitmix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t counter = 0) : seed_(seed), counter_(counter) {}

  std::uint64_t next_u64() {
    ++counter_;
    return splitmix64(seed_ + counter_ * 0x9E3779B97F4A7C15ULL);
  }
  /// Uniform on [0, 1).
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_;
};

}  // namespace sosmm
