#pragma once

#include <cmath>
#include <cstdint>

#include "dts/types.hpp"

namespace dts {

// SplitMix64 finalizer; also used to decorrelate seed/purpose pairs.
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Purpose tags for per-run substreams. Values are part of the reproducibility
// contract: changing them changes every seeded output.
enum class Stream : std::uint64_t {
  kInstance = 1,
  kContexts = 2,
  kRewards = 3,
  kAgent = 4,
  kSetup = 5,
  kTrain = 6,
  kEval = 7,
};

// Counter-based SplitMix64 generator. Deterministic across platforms and
// invocations, unlike the standard library distributions. Every normal()
// consumes exactly two uniforms, so stream layouts are predictable.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  static Rng stream(std::uint64_t seed, Stream purpose) {
    const auto tag = static_cast<std::uint64_t>(purpose);
    return Rng(mix64(seed + 0x9E3779B97F4A7C15ULL * (tag + 1)));
  }

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    return mix64(state_);
  }

  // Uniform on [0, 1) with 53 random bits.
  Real uniform01() { return static_cast<Real>(next_u64() >> 11) * 0x1.0p-53; }

  Real uniform(Real a, Real b) { return a + (b - a) * uniform01(); }

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

  Real normal() {
    // Box-Muller; 1 - u keeps the log argument in (0, 1].
    const Real u1 = 1.0 - uniform01();
    const Real u2 = uniform01();
    constexpr Real two_pi = 6.283185307179586476925286766559;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
  }

  Vec normal_vec(Index n) {
    Vec v(n);
    for (Index i = 0; i < n; ++i) v[i] = normal();
    return v;
  }

  Vec uniform_vec(Index n, Real a, Real b) {
    Vec v(n);
    for (Index i = 0; i < n; ++i) v[i] = uniform(a, b);
    return v;
  }

  Mat uniform_mat(Index rows, Index cols, Real a, Real b) {
    Mat m(rows, cols);
    for (Index r = 0; r < rows; ++r)
      for (Index c = 0; c < cols; ++c) m(r, c) = uniform(a, b);
    return m;
  }

 private:
  std::uint64_t state_;
};

}  // namespace dts
