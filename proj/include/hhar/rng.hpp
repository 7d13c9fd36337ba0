#pragma once

#include "hhar/types.hpp"

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

namespace hhar {

/// Deterministic random source. The same seed yields the same stream for the
/// lifetime of a binary, which is all the reproducibility contracts require.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  Real uniform(Real lo, Real hi) {
    return std::uniform_real_distribution<Real>(lo, hi)(engine_);
  }

  Real normal(Real mean, Real stddev) {
    return std::normal_distribution<Real>(mean, stddev)(engine_);
  }

  /// Uniform integer in [0, n).
  std::size_t below(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    std::shuffle(v.begin(), v.end(), engine_);
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

inline Rng seed_rng(std::uint64_t seed) { return Rng(seed); }

}  // namespace hhar
