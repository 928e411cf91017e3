#pragma once

#include <cstdint>
#include <vector>

#include "selfnorm/normal.hpp"

namespace selfnorm {

// SplitMix64 finalizer used as a 64-bit hash.
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Counter-based seed derivation: every (seed, stream) pair maps to a
// well-separated generator state, so independent substreams can be handed to
// parallel workers and the results stay bitwise identical to sequential runs.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return mix64(seed + 0x9E3779B97F4A7C15ULL * (stream + 1));
}

class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t state) : state_(state) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    return mix64(z);
  }

  // Uniform on the open interval (0,1).
  double next_uniform() {
    return static_cast<double>(next() >> 11) * 0x1.0p-53 + 0x1.0p-54;
  }

  // Standard normal via the inverse CDF; keeps every stream deterministic
  // without rejection steps.
  double next_normal() { return normal_quantile(next_uniform()); }

  // Unbiased integer in [0, bound) by rejection (Lemire-style), independent of
  // any standard-library distribution implementation.
  std::uint64_t next_bounded(std::uint64_t bound) {
    const std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
      const std::uint64_t r = next();
      if (r >= threshold) return r % bound;
    }
  }

 private:
  std::uint64_t state_;
};

inline SplitMix64 substream(std::uint64_t seed, std::uint64_t stream) {
  return SplitMix64(derive_seed(seed, stream));
}

template <typename T>
void shuffle(std::vector<T>& values, SplitMix64& gen) {
  for (std::size_t i = values.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(gen.next_bounded(i));
    std::swap(values[i - 1], values[j]);
  }
}

}  // namespace selfnorm
