#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

#include "censored_hybrid/common.hpp"

namespace censored_hybrid {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

// SplitMix64 finalizer; the whole derivation scheme below is pure integer
// arithmetic so any process (or language) can recompute a stream seed.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ull;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBull;
  z ^= z >> 31;
  return z;
}

// All randomness flows from one top-level seed. A stream is named by a
// purpose tag plus an index, e.g. seed_for(seed, "case", k) for the k-th
// generated case or seed_for(seed, "restart", r) for restart r. Distinct
// tags give unrelated streams; consumers never share an engine, which is
// what makes parallel execution bit-identical to sequential.
inline std::uint64_t seed_for(std::uint64_t seed, std::string_view purpose,
                              std::uint64_t index = 0) {
  std::uint64_t s = mix64(seed ^ fnv1a64(purpose));
  return mix64(s + index * kGolden);
}

// Counter-mode SplitMix64 engine with Box-Muller normals.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += kGolden;
    return mix64(state_);
  }

  // [0, 1)
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Unbiased integer in [0, n) via rejection.
  std::uint64_t below(std::uint64_t n) {
    std::uint64_t threshold = (0 - n) % n;
    std::uint64_t x = next_u64();
    while (x < threshold) x = next_u64();
    return x % n;
  }

  // Standard normal, Box-Muller with u1 in (0, 1] so the log stays finite.
  // The second variate of each pair is cached in the engine.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 1.0 - uniform01();
    double u2 = uniform01();
    double r = std::sqrt(-2.0 * std::log(u1));
    double t = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(t);
    has_spare_ = true;
    return r * std::cos(t);
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace censored_hybrid
