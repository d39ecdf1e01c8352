#pragma once

#include <cstdint>

namespace hybridsim {

/// SplitMix64 finalizer; bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Counter-based generator keyed by (seed, stream). Draw k is a pure function
/// of the key and k, so ensembles are reproducible regardless of scheduling
/// and a longer run extends a shorter one with the same key draw for draw.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
      : base_(mix64(mix64(seed) ^ (stream + 0x632BE59BD9B4E019ULL))) {}

  std::uint64_t bits(std::uint64_t counter) const { return mix64(base_ + counter * 0x9E3779B97F4A7C15ULL); }

  /// Uniform double in [0,1) with 53 random bits.
  double uniform(std::uint64_t counter) const { return static_cast<double>(bits(counter) >> 11) * 0x1.0p-53; }

 private:
  std::uint64_t base_;
};

}  // namespace hybridsim
