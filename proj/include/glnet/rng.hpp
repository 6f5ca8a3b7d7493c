#pragma once

// Deterministic random source. The engine is std::mt19937_64 (its output
// sequence is fixed by the standard); the distributions are hand-rolled
// because the standard library's distribution algorithms are
// implementation-defined and would break bitwise reproducibility of datasets,
// parameter init, and training runs across toolchains.

#include <cstdint>
#include <random>

namespace glnet {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t u64() { return eng_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n), n >= 1. Multiply-shift map (deterministic, and
  // bias is negligible for the small n used here).
  std::int64_t uniform_int(std::int64_t n) {
    const unsigned __int128 wide =
        static_cast<unsigned __int128>(eng_()) * static_cast<unsigned __int128>(n);
    return static_cast<std::int64_t>(wide >> 64);
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Derive an independent child stream (e.g. one per group/image) without
  // disturbing the parent sequence beyond one draw.
  Rng fork() { return Rng(eng_() ^ 0x9e3779b97f4a7c15ULL); }

 private:
  std::mt19937_64 eng_;
};

}  // namespace glnet
