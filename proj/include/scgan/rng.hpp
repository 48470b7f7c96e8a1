#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace scgan {

// splitmix64; used to whiten (seed, stream, counter) keys into engine seeds.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Deterministic RNG. std::mt19937_64 has a fully specified sequence, and all
// distributions are hand-rolled below, so identical seeds give identical
// streams on every platform and standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // inclusive range, unbiased via rejection
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return lo + static_cast<std::int64_t>(x % span);
  }

  // Box-Muller, spare discarded so each draw consumes exactly two words.
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925 * u2);
  }

  bool coin() { return (next_u64() & 1u) != 0; }

 private:
  std::mt19937_64 gen_;
};

// Independent stream keyed by (seed, stream id, counter). Streams derived from
// the same master seed never have to share engine state, which is what makes
// checkpoint resume replay the exact sampling sequence of an unbroken run.
inline Rng keyed_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter = 0) {
  return Rng(mix64(mix64(seed ^ 0x5c6f9d2ba1e83f4dull) ^ mix64(stream) ^ mix64(counter ^ 0x94d0c7b3ull)));
}

}  // namespace scgan
