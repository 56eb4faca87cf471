#pragma once
// Self-contained deterministic randomness. Every random draw in the project
// goes through these streams, so any artifact is reproducible from one seed.

#include <bit>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>

namespace orsa {

inline constexpr std::uint64_t kGolden64 = 0x9e3779b97f4a7c15ull;

// splitmix64 finalizer
constexpr std::uint64_t mix_bits(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// order-sensitive combiner for seed derivation and sample hashing
constexpr std::uint64_t hash2(std::uint64_t a, std::uint64_t b) {
  return mix_bits((a + kGolden64) ^ mix_bits(b + kGolden64));
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += kGolden64);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // uniform in [0, 1)
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // uniform index in [0, n); uniform01() < 1 keeps the result below n
  std::size_t uniform_index(std::size_t n) {
    return static_cast<std::size_t>(uniform01() * static_cast<double>(n));
  }

  // Box-Muller, one variate per call. Always consumes exactly two uniforms so
  // the stream position does not depend on previous draws.
  double normal(double mu, double sigma) {
    double u1 = 1.0 - uniform01();  // (0, 1]
    double u2 = uniform01();
    double r = std::sqrt(-2.0 * std::log(u1));
    return mu + sigma * r * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::uint64_t state_;
};

inline Rng derive_stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  return Rng(hash2(hash2(seed, a), b));
}

// Keyed hash of a sample's exact bit pattern. Used where a draw must be a
// deterministic function of the input point rather than of a stream position.
inline std::uint64_t hash_sample(std::uint64_t key, std::span<const double> s) {
  std::uint64_t h = key;
  for (double v : s) h = hash2(h, std::bit_cast<std::uint64_t>(v));
  return h;
}

inline double hash_to_unit(std::uint64_t h) {
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

}  // namespace orsa
