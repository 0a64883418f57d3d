#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

namespace mlrank {

/// Deterministic random source. All stochastic code in the library draws
/// from this class so that a run is reproducible bit-for-bit from a single
/// 64-bit seed, independent of platform or standard-library vendor. The
/// engine is std::mt19937_64 (its output sequence is fixed by the standard);
/// the distributions on top of it are implemented here because the std::
/// distribution classes are not portable across implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(mix_(seed)) {}

  /// Derive an independent child stream. Children with distinct stream ids
  /// are decorrelated from each other and from the parent.
  Rng spawn(std::uint64_t stream) const {
    return Rng(mix_(seed_ ^ (0x9e3779b97f4a7c15ULL * (stream + 1))));
  }

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform double in [0, 1) with 53 bits of precision.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in the inclusive range [lo, hi], unbiased
  /// (bitmask rejection).
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    const auto range = static_cast<std::uint64_t>(hi - lo) + 1;  // hi >= lo
    if (range == 1) return lo;
    const std::uint64_t mask = ~0ULL >> std::countl_zero(range - 1);
    std::uint64_t draw;
    do {
      draw = next_u64() & mask;
    } while (draw >= range);
    return lo + static_cast<std::int64_t>(draw);
  }

  /// Standard normal via Box-Muller. One value per call (the sine twin is
  /// discarded to keep the draw count predictable).
  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]: keeps the log finite
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  double normal(double mean, double stddev) {
    return mean + stddev * normal();
  }

  /// Fisher-Yates permutation of {0, ..., n-1}.
  std::vector<std::size_t> permutation(std::size_t n) {
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    for (std::size_t i = n; i > 1; --i) {
      const auto j = static_cast<std::size_t>(
          uniform_int(0, static_cast<std::int64_t>(i) - 1));
      std::swap(perm[i - 1], perm[j]);
    }
    return perm;
  }

 private:
  // splitmix64 finalizer; spreads low-entropy seeds over the full state.
  static std::uint64_t mix_(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace mlrank
