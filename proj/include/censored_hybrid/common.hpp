#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace censored_hybrid {

// Error taxonomy maps 1:1 onto CLI exit codes: ConfigError -> 2,
// DataError -> 3, NumericError -> 4.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
// Stage-1 recovery guard: |theta(1)| below tol_div. Callers must not proceed
// to stage 2 after catching this.
struct DegenerateLeadingEntry : NumericError {
  using NumericError::NumericError;
};

// FNV-1a 64-bit. Used both for seed derivation tags and artifact
// fingerprints; incremental form so structs can hash field by field.
class Fnv1a {
 public:
  void bytes(const void* data, std::size_t len) {
    auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
      h_ ^= p[i];
      h_ *= 0x100000001B3ull;
    }
  }
  void str(std::string_view s) { bytes(s.data(), s.size()); }
  void u64(std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    bytes(b, 8);
  }
  void f64(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    u64(bits);
  }
  std::uint64_t value() const { return h_; }

 private:
  std::uint64_t h_ = 0xCBF29CE484222325ull;
};

inline std::uint64_t fnv1a64(std::string_view s) {
  Fnv1a h;
  h.str(s);
  return h.value();
}

// Subgradient convention for |t| used across the losses: sign(0) = 0.
inline double sign0(double t) { return t > 0.0 ? 1.0 : (t < 0.0 ? -1.0 : 0.0); }

inline std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[v & 0xF];
    v >>= 4;
  }
  return out;
}

// Parallelism cap shared by every parallel loop in the library. Work is
// always partitioned the same way regardless of this value; thread count
// affects wall time only, never results.
inline unsigned thread_count() {
  if (const char* env = std::getenv("CENSORED_HYBRID_THREADS")) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end != env && v >= 1) return static_cast<unsigned>(std::min(v, 256L));
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1u : hw;
}

// Runs fn(i) for i in [0, n) on up to thread_count() threads. Each index is
// processed exactly once; fn must write only to its own slots.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn, unsigned max_threads = 0) {
  unsigned tc = max_threads ? max_threads : thread_count();
  tc = static_cast<unsigned>(std::min<std::size_t>(tc, n));
  if (tc <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(tc);
  for (unsigned t = 0; t < tc; ++t) {
    pool.emplace_back([t, tc, n, &fn] {
      for (std::size_t i = t; i < n; i += tc) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace censored_hybrid
