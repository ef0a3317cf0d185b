#pragma once

#include <vector>

#include "twosided/twosided.hpp"

namespace twosided::testing {

// Players A, B, C and arms X, Y, Z with two stable matchings:
// player-optimal {A-X, B-Y, C-Z}, player-pessimal {A-Y, B-X, C-Z}.
inline MarketInstance two_stable_market(double noise = 1.0) {
  return MarketInstance({{0.9, 0.6, 0.3}, {0.6, 0.9, 0.3}, {0.9, 0.6, 0.3}},
                        {{0.6, 0.9, 0.3}, {0.9, 0.6, 0.3}, {0.9, 0.6, 0.3}}, noise);
}

// 2x2 with every gap equal to 0.4 and a unique stable matching {0-0, 1-1}.
inline MarketInstance wide_gap_2x2(double noise = 0.0) {
  return MarketInstance({{0.9, 0.5}, {0.5, 0.9}}, {{0.9, 0.5}, {0.5, 0.9}}, noise);
}

inline RunConfig config_for(Algorithm alg, std::int64_t horizon, std::uint64_t seed) {
  RunConfig c;
  c.algorithm = alg;
  c.horizon = horizon;
  c.seed = seed;
  return c;
}

}  // namespace twosided::testing
