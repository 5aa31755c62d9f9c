#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace supercut {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives an independent stream seed from a base seed and a tuple of keys,
/// e.g. (seed, view_id, sp_id). Order of keys matters.
inline std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::int64_t> keys) {
  std::uint64_t h = splitmix64(seed);
  for (auto k : keys) h = splitmix64(h ^ static_cast<std::uint64_t>(k));
  return h;
}

using Rng = std::mt19937_64;

/// Uniform double in [lo, hi) computed from raw engine bits so results do not
/// depend on the standard library's distribution implementation.
inline double uniform(Rng& rng, double lo = 0.0, double hi = 1.0) {
  const double unit = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * unit;
}

/// Uniform integer in [0, n). n must be > 0.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  // Rejection keeps the draw unbiased.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

/// Standard normal via Box-Muller on `uniform`.
inline double normal(Rng& rng) {
  double u1;
  do {
    u1 = uniform(rng);
  } while (u1 <= 0.0);
  const double u2 = uniform(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

}  // namespace supercut
