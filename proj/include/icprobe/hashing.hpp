#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>
#include <vector>

namespace icprobe {

// Stable across platforms and runs; used wherever a seed is derived from text.
constexpr uint64_t fnv1a64(std::string_view s, uint64_t h = 1469598103934665603ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

constexpr uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr uint64_t mix(uint64_t a, uint64_t b) { return splitmix64(a ^ splitmix64(b)); }

// Uniform in (0, 1).
inline double hash_uniform(uint64_t key) {
  return (static_cast<double>(splitmix64(key) >> 11) + 0.5) * 0x1.0p-53;
}

// Standard normal via Box-Muller on two hashed uniforms.
inline double hash_normal(uint64_t key) {
  double u1 = hash_uniform(key);
  double u2 = hash_uniform(key ^ 0x5851f42d4c957f2dULL);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

inline std::vector<double> hash_normal_vector(uint64_t key, int dim) {
  std::vector<double> v(static_cast<size_t>(dim));
  for (int i = 0; i < dim; ++i) v[static_cast<size_t>(i)] = hash_normal(mix(key, static_cast<uint64_t>(i) + 1));
  return v;
}

}  // namespace icprobe
