#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace aide::noise {

// Stateless noise keyed by (seed, call content). Identical keys give identical
// draws regardless of call order or thread, which is what makes the mock
// backends reproducible under concurrent use.

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t hash_string(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

constexpr std::uint64_t combine(std::uint64_t a, std::uint64_t b) {
  return splitmix64(a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2)));
}

/// Uniform in (0, 1).
inline double uniform(std::uint64_t key) {
  return (static_cast<double>(splitmix64(key) >> 11) + 0.5) * (1.0 / 9007199254740992.0);
}

/// Standard normal draw via Box-Muller on two derived uniforms.
inline double gaussian(std::uint64_t key) {
  const double u1 = uniform(combine(key, 1));
  const double u2 = uniform(combine(key, 2));
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace aide::noise
