#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace twosided {

// SplitMix64 finalizer. Used only to derive seeds, never as a reward source.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Deterministic seed derivation: mix_seed(master, a, b, c) is stable across
// platforms and releases. Streams derived with different tuples are treated as
// independent.
constexpr std::uint64_t mix_seed(std::uint64_t master, std::uint64_t a,
                                 std::uint64_t b = 0, std::uint64_t c = 0) noexcept {
  std::uint64_t h = splitmix64(master);
  h = splitmix64(h ^ (a + 0x632be59bd9b4e019ULL));
  h = splitmix64(h ^ (b + 0x8cb92ba72f3d8dd7ULL));
  h = splitmix64(h ^ (c + 0xd6e8feb86659fd93ULL));
  return h;
}

// Seed domains. Changing any of these changes every derived stream.
namespace seed_domain {
inline constexpr std::uint64_t instance = 1;
inline constexpr std::uint64_t run = 2;
inline constexpr std::uint64_t arm_ranking = 3;
inline constexpr std::uint64_t player_reward = 4;
inline constexpr std::uint64_t arm_reward = 5;
}  // namespace seed_domain

using Rng = std::mt19937_64;

// Uniform on the open interval (0, 1) from the top 53 bits. std::uniform_real_distribution
// is not used because its output is implementation-defined.
inline double uniform_open01(Rng& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

// Box-Muller, one variate per call (two engine draws), so every call consumes
// a fixed amount of the stream.
inline double standard_normal(Rng& rng) {
  const double u1 = uniform_open01(rng);
  const double u2 = uniform_open01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace twosided
