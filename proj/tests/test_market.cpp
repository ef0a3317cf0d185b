#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <limits>

#include "helpers.hpp"
#include "twosided/market.hpp"

using namespace twosided;
using twosided::testing::two_stable_market;

namespace {

Matching make(std::vector<int> p2a) { return Matching(std::move(p2a)); }

// Brute force over all N! assignments of players to arms for K <= 4,
// including partial matchings, to cross-check is_stable.
bool brute_force_stable(const Matching& mt, const MarketInstance& m) {
  const auto holder = mt.arm_to_player(m.n_arms());
  for (int i = 0; i < m.n_players(); ++i) {
    for (int j = 0; j < m.n_arms(); ++j) {
      const int cur = mt.arm_of(i);
      const bool player_wants = cur == kUnmatched || m.player_mean(i, j) > m.player_mean(i, cur);
      const bool arm_wants = holder[j] == kUnmatched || m.arm_mean(j, i) > m.arm_mean(j, holder[j]);
      if (cur != j && player_wants && arm_wants) return false;
    }
  }
  return true;
}

}  // namespace

TEST(MarketInstance, RejectsMorePlayersThanArms) {
  EXPECT_THROW(MarketInstance({{0.1}, {0.2}}, {{0.1, 0.2}}), ConfigError);
}

TEST(MarketInstance, RejectsTiesAndRaggedRows) {
  EXPECT_THROW(MarketInstance({{0.5, 0.5}}, {{0.1}, {0.2}}), TieError);
  EXPECT_THROW(MarketInstance({{0.5, 0.4}}, {{0.1}, {0.2, 0.3}}), ConfigError);
  EXPECT_THROW(MarketInstance({{0.5, std::nan("")}}, {{0.1}, {0.2}}), ConfigError);
  EXPECT_THROW(MarketInstance({{0.5, 0.4}}, {{0.1}, {0.2}}, -1.0), ConfigError);
}

TEST(SampleMarket, DeterministicPerSeed) {
  const auto a = sample_market(5, 5, 1.0, 17);
  const auto b = sample_market(5, 5, 1.0, 17);
  const auto c = sample_market(5, 5, 1.0, 18);
  EXPECT_EQ(a, b);
  EXPECT_NE(a.player_means(), c.player_means());
  for (const auto& row : a.player_means()) {
    for (double v : row) {
      EXPECT_GT(v, 0.0);
      EXPECT_LT(v, 1.0);
    }
  }
}

TEST(SampleMarket, GridSamplingHasGapAtLeastOneStep) {
  SamplingOptions opts;
  opts.kind = MeanSampling::grid;
  for (std::uint64_t s = 0; s < 50; ++s) {
    const auto m = sample_market(5, 5, 1.0, s, opts);
    EXPECT_GE(compute_gaps(m).universal_gap, 0.1 - 1e-12);
  }
}

TEST(SampleMarket, RejectsBadDimensions) {
  EXPECT_THROW(sample_market(3, 2, 1.0, 0), ConfigError);
  EXPECT_THROW(sample_market(0, 2, 1.0, 0), ConfigError);
}

TEST(GaleShapley, TextbookExampleBothSides) {
  const auto m = two_stable_market();
  EXPECT_EQ(gale_shapley(m, Side::players), make({0, 1, 2}));
  EXPECT_EQ(gale_shapley(m, Side::arms), make({1, 0, 2}));
}

TEST(GaleShapley, RejectsMalformedPreferences) {
  EXPECT_THROW(gale_shapley({{0, 0}}, {{0}, {0}}, Side::players), MalformedPreferencesError);
  EXPECT_THROW(gale_shapley({{0, 1}}, {{0}}, Side::players), MalformedPreferencesError);
}

TEST(GaleShapley, SinglePlayerTakesFavourite) {
  const MarketInstance m({{0.2, 0.7, 0.4}}, {{0.5}, {0.5}, {0.5}});
  EXPECT_EQ(gale_shapley(m, Side::players).arm_of(0), 1);
  EXPECT_EQ(gale_shapley(m, Side::arms).arm_of(0), 1);
}

TEST(Enumeration, FindsBothStableMatchings) {
  const auto all = enumerate_stable_matchings(two_stable_market());
  ASSERT_EQ(all.size(), 2u);
  EXPECT_EQ(all[0], make({0, 1, 2}));
  EXPECT_EQ(all[1], make({1, 0, 2}));
}

TEST(Enumeration, SizeGuard) {
  EXPECT_THROW(enumerate_stable_matchings(sample_market(2, 9, 1.0, 1)), SizeLimitError);
}

TEST(IsStable, DetectsBlockingPair) {
  const auto m = two_stable_market();
  EXPECT_TRUE(is_stable(make({0, 1, 2}), m));
  EXPECT_FALSE(is_stable(make({2, 1, 0}), m));
  EXPECT_FALSE(is_stable(make({0, 1, kUnmatched}), m));
  EXPECT_THROW(is_stable(make({0, 0, 1}), m), DimensionError);
  EXPECT_THROW(is_stable(make({0, 1}), m), DimensionError);
}

TEST(IsStable, AgreesWithBruteForceOnAllMatchings) {
  for (int k = 1; k <= 4; ++k) {
    for (int n = 1; n <= k; ++n) {
      for (std::uint64_t s = 0; s < 10; ++s) {
        const auto m = sample_market(n, k, 1.0, s * 31 + static_cast<std::uint64_t>(n * 7 + k));
        // every partial injection: player i takes arm in {-1, 0..k-1}
        std::vector<int> p2a(static_cast<std::size_t>(n), kUnmatched);
        auto rec = [&](auto&& self, int i) -> void {
          if (i == n) {
            Matching mt(p2a);
            if (mt.well_formed(k)) ASSERT_EQ(is_stable(mt, m), brute_force_stable(mt, m));
            return;
          }
          for (int j = -1; j < k; ++j) {
            p2a[i] = j;
            self(self, i + 1);
          }
        };
        rec(rec, 0);
      }
    }
  }
}

// GS vs brute force: player-proposing result is stable and weakly preferred by
// every player to every stable matching; arm-proposing is the player-pessimal one.
TEST(GaleShapley, MatchesEnumerationLattice) {
  const auto start = std::chrono::steady_clock::now();
  for (int k = 1; k <= 5; ++k) {
    for (int n = 1; n <= k; ++n) {
      for (std::uint64_t s = 0; s < 200; ++s) {
        const auto m = sample_market(n, k, 1.0, s + 1000 * static_cast<std::uint64_t>(n * 10 + k));
        const auto all = enumerate_stable_matchings(m);
        ASSERT_FALSE(all.empty());
        const auto po = gale_shapley(m, Side::players);
        const auto pp = gale_shapley(m, Side::arms);
        ASSERT_TRUE(is_stable(po, m));
        ASSERT_TRUE(is_stable(pp, m));
        for (const auto& other : all) {
          for (int i = 0; i < n; ++i) {
            ASSERT_NE(other.arm_of(i), kUnmatched);
            ASSERT_GE(m.player_mean(i, po.arm_of(i)), m.player_mean(i, other.arm_of(i)));
            ASSERT_LE(m.player_mean(i, pp.arm_of(i)), m.player_mean(i, other.arm_of(i)));
          }
        }
      }
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  EXPECT_LT(secs, 5.0);
}

TEST(Gaps, RowGapAndUniversalGap) {
  EXPECT_DOUBLE_EQ(row_gap(std::vector<double>{0.9, 0.1, 0.5}), 0.4);
  EXPECT_TRUE(std::isinf(row_gap(std::vector<double>{0.3})));
  const auto g = compute_gaps(two_stable_market());
  EXPECT_NEAR(g.universal_gap, 0.3, 1e-12);
  EXPECT_EQ(g.player_max_regret, (std::vector<double>{0.9, 0.9, 0.3}));
  EXPECT_EQ(g.arm_max_regret, (std::vector<double>{0.6, 0.6, 0.3}));
}

TEST(Gaps, SinglePlayerMarketUsesPlayerRowOnly) {
  const MarketInstance m({{0.2, 0.7, 0.4}}, {{0.5}, {0.6}, {0.1}});
  const auto g = compute_gaps(m);
  EXPECT_NEAR(g.universal_gap, 0.2, 1e-12);
  // arms 0 and 2 are unmatched in the arm-pessimal matching
  EXPECT_EQ(g.arm_max_regret, (std::vector<double>{0.0, 0.6, 0.0}));
}

TEST(Gaps, UniversalGapIsMinimumOfAgentGaps) {
  for (std::uint64_t s = 0; s < 100; ++s) {
    const auto m = sample_market(3, 4, 1.0, s);
    const auto g = compute_gaps(m);
    double lo = std::numeric_limits<double>::infinity();
    for (double v : g.player_gaps) lo = std::min(lo, v);
    for (double v : g.arm_gaps) lo = std::min(lo, v);
    EXPECT_EQ(g.universal_gap, lo);
    EXPECT_GT(g.universal_gap, 0.0);
  }
}

TEST(PseudoRegret, ZeroAtBenchmarksAndBoundedByMax) {
  const auto m = two_stable_market();
  const StableBenchmarks bench(m);
  for (double v : pseudo_regret_step(m, bench, bench.player_optimal, Benchmark::player_optimal)) EXPECT_EQ(v, 0.0);
  for (double v : pseudo_regret_step(m, bench, bench.player_optimal, Benchmark::arm_pessimal)) EXPECT_EQ(v, 0.0);
  // the player-pessimal matching is better for arms than their pessimal one
  const auto arm = pseudo_regret_step(m, bench, bench.player_pessimal, Benchmark::arm_pessimal);
  EXPECT_LT(arm[0], 0.0);
  EXPECT_LT(arm[1], 0.0);
  const auto g = compute_gaps(m);
  const auto empty = pseudo_regret_step(m, bench, make({kUnmatched, kUnmatched, kUnmatched}), Benchmark::player_optimal);
  for (int i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(empty[i], g.player_max_regret[i]);
}
