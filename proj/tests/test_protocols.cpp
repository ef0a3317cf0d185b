#include <gtest/gtest.h>

#include <map>

#include "helpers.hpp"

using namespace twosided;
using twosided::testing::config_for;
using twosided::testing::wide_gap_2x2;

namespace {

constexpr Algorithm kAll[] = {Algorithm::etgs_blackboard, Algorithm::ca_etc, Algorithm::broadcast_etgs};

RunConfig small_ca_etc(std::int64_t horizon, std::uint64_t seed) {
  auto c = config_for(Algorithm::ca_etc, horizon, seed);
  c.schedule = EpochSchedule(ScheduleKind::exponential, 20, 0.5);
  return c;
}

RunConfig any_config(Algorithm alg, std::int64_t horizon, std::uint64_t seed) {
  return alg == Algorithm::ca_etc ? small_ca_etc(horizon, seed) : config_for(alg, horizon, seed);
}

// Last recorded count per (agent, partner) from the estimate log.
std::map<std::pair<int, int>, std::int64_t> final_counts(const SimulationTrace& tr, AgentKind kind) {
  std::map<std::pair<int, int>, std::int64_t> out;
  for (const auto& u : *tr.estimate_updates) {
    if (u.kind == kind) out[{u.agent, u.partner}] = u.count;
  }
  return out;
}

}  // namespace

TEST(IndexEstimation, SlotsFollowArmZeroRanking) {
  const auto m = sample_market(4, 6, 1.0, 11);
  Engine e(m, config_for(Algorithm::etgs_blackboard, 100, 5).engine_options(), Algorithm::etgs_blackboard);
  const Ranking order = e.arm(0).initial_ranking;
  const auto idx = run_index_estimation(e);
  EXPECT_EQ(e.rounds_played(), 4);
  for (int r = 0; r < 4; ++r) EXPECT_EQ(idx[order[r]], r);
}

TEST(IndexEstimation, IdentityRankingGivesIdentitySlots) {
  const auto m = sample_market(3, 3, 1.0, 11);
  auto c = config_for(Algorithm::etgs_blackboard, 100, 5);
  c.arm_initial_ranking = ArmRankingInit::identity;
  const auto tr = run_protocol(m, c);
  EXPECT_EQ(tr.indices, (std::vector<int>{0, 1, 2}));
}

TEST(Protocols, TraceCoversHorizonAndNoExplorationCollisions) {
  for (auto alg : kAll) {
    for (int k = 1; k <= 4; ++k) {
      for (int n = 1; n <= k; ++n) {
        for (std::uint64_t s = 0; s < 5; ++s) {
          const auto m = sample_market(n, k, 1.0, s + 100);
          auto c = any_config(alg, 3000, s);
          c.debug_rounds = true;
          const auto tr = run_protocol(m, c);
          ASSERT_EQ(tr.rounds_played, 3000);
          ASSERT_EQ(tr.rounds->rounds(), 3000u);
          EXPECT_EQ(tr.exploration_collisions, 0) << algorithm_name(alg);
          for (std::size_t t = 0; t < tr.rounds->rounds(); ++t) {
            if (is_exploration(tr.rounds->phase[t])) ASSERT_EQ(tr.rounds->collisions[t], 0);
          }
        }
      }
    }
  }
}

TEST(Protocols, ShortHorizonBlackboardIsLegalWithoutCommit) {
  const auto m = sample_market(5, 5, 1.0, 1);
  const auto tr = run_protocol(m, config_for(Algorithm::etgs_blackboard, 100, 1));
  EXPECT_EQ(tr.rounds_played, 100);
  EXPECT_FALSE(tr.commit_round);
  EXPECT_FALSE(tr.warnings.empty());
  ASSERT_FALSE(tr.checkpoints.empty());
  EXPECT_EQ(tr.checkpoints.back().round, 100);
}

TEST(Protocols, HorizonShorterThanIndexEstimation) {
  const auto m = sample_market(5, 5, 1.0, 1);
  const auto tr = run_protocol(m, config_for(Algorithm::broadcast_etgs, 3, 1));
  EXPECT_EQ(tr.rounds_played, 3);
  EXPECT_THROW(run_protocol(m, small_ca_etc(5, 1)), ConfigError);
}

TEST(Blackboard, ZeroNoiseCommitRoundMatchesWidthCriterion) {
  auto c = config_for(Algorithm::etgs_blackboard, 2000, 0);
  c.arm_initial_ranking = ArmRankingInit::identity;
  const auto tr = run_protocol(wide_gap_2x2(0.0), c);
  ASSERT_TRUE(tr.commit_round);
  EXPECT_EQ(*tr.commit_round, 650);
  EXPECT_EQ(*tr.arm_commit[0].first_pass_round, 648);
  EXPECT_EQ(*tr.player_commit[0].first_pass_round, 649);
  EXPECT_EQ(*tr.player_commit[1].first_pass_round, 649);
  EXPECT_EQ(*tr.arm_commit[1].first_pass_round, 650);
  EXPECT_TRUE(tr.committed_true);
}

TEST(Blackboard, ZeroNoiseRegretStopsAfterCommit) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    // four levels: every gap is 0.2
    const auto m = sample_market(3, 4, 0.0, s, {MeanSampling::grid, 4});
    auto c = config_for(Algorithm::etgs_blackboard, 20000, s);
    c.debug_rounds = true;
    const auto tr = run_protocol(m, c);
    ASSERT_TRUE(tr.commit_round);
    ASSERT_TRUE(tr.committed_true);
    const StableBenchmarks bench(m);
    const auto& log = *tr.rounds;
    for (std::int64_t t = *tr.commit_round + 16 + 1; t <= tr.rounds_played; ++t) {
      std::vector<int> p2a(log.matching.begin() + (t - 1) * 3, log.matching.begin() + t * 3);
      EXPECT_EQ(Matching(p2a), bench.player_optimal) << "round " << t;
    }
  }
}

TEST(Blackboard, CommitRoundSharedAndAfterEveryFirstPass) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto m = sample_market(3, 3, 1.0, s, {MeanSampling::grid});
    const auto tr = run_protocol(m, config_for(Algorithm::etgs_blackboard, 200000, s));
    ASSERT_TRUE(tr.commit_round);
    std::int64_t last = 0;
    for (const auto& c : tr.player_commit) last = std::max(last, *c.first_pass_round);
    for (const auto& c : tr.arm_commit) last = std::max(last, *c.first_pass_round);
    EXPECT_EQ(*tr.commit_round, last);
  }
}

TEST(Broadcast, CommitsAfterBlackboardWithSameRankings) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto m = sample_market(3, 3, 0.0, s, {MeanSampling::grid});
    const auto bb = run_protocol(m, config_for(Algorithm::etgs_blackboard, 50000, s));
    const auto bc = run_protocol(m, config_for(Algorithm::broadcast_etgs, 50000, s));
    ASSERT_TRUE(bb.commit_round && bc.commit_round);
    EXPECT_GE(*bc.commit_round, *bb.commit_round);
    EXPECT_TRUE(bb.committed_true);
    EXPECT_TRUE(bc.committed_true);
    // epochs play 2^l exploration rounds plus one monitoring round
    for (const auto& e : bc.epochs) {
      EXPECT_EQ(e.explore_rounds, std::int64_t{1} << e.epoch);
      EXPECT_GE(e.monitor_matches, 0);
    }
  }
}

TEST(CaEtc, EpochsFollowSchedule) {
  const auto m = sample_market(3, 3, 1.0, 4);
  const auto c = small_ca_etc(50000, 4);
  const auto tr = run_protocol(m, c);
  std::int64_t start = 4;  // after index estimation
  for (const auto& e : tr.epochs) {
    EXPECT_EQ(e.start_round, start);
    if (e.check_round > 0) {
      EXPECT_EQ(e.explore_rounds, c.schedule.explore(e.epoch));
      EXPECT_EQ(e.check_round, e.start_round + e.explore_rounds - 1);
      EXPECT_EQ(e.player_passed.size(), 3u);
      EXPECT_EQ(e.arm_passed.size(), 3u);
    }
    if (&e != &tr.epochs.back()) EXPECT_EQ(e.end_round - e.start_round + 1, c.schedule.horizon(e.epoch));
    start = e.end_round + 1;
  }
  EXPECT_EQ(tr.epochs.back().end_round, 50000);
  TheoryInputs in{3, 3, 50000.0, 20.0, 0.5, 0.1};
  EXPECT_EQ(static_cast<int>(tr.epochs.size()), tilde_l_exp(in).last_epoch);
}

TEST(CaEtc, LargeGapCommitsWithinThreshold) {
  // wide gaps: all checks pass well before l_max
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto m = wide_gap_2x2(1.0);
    auto c = config_for(Algorithm::ca_etc, 200000, s);
    c.schedule = EpochSchedule(ScheduleKind::exponential, 50, 0.5);
    const auto tr = run_protocol(m, c);
    ASSERT_TRUE(tr.commit_epoch);
    TheoryInputs in{2, 2, 200000.0, 50.0, 0.5, 0.4};
    EXPECT_LE(*tr.commit_epoch, l_max_exp(in));
    EXPECT_TRUE(tr.committed_true);
  }
}

TEST(CaEtc, ExplorationCountsAreRoundRobin) {
  for (std::uint64_t s = 0; s < 4; ++s) {
    const auto m = sample_market(3, 5, 1.0, s);
    auto c = small_ca_etc(30000, s);
    c.learn_in_commit = false;
    c.debug_snapshots = true;
    const auto tr = run_protocol(m, c);
    std::int64_t explored = 0;
    for (const auto& e : tr.epochs) explored += e.explore_rounds;
    const auto counts = final_counts(tr, AgentKind::player);
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 5; ++j) {
        std::int64_t expected = j == 0 ? 1 : 0;
        for (std::int64_t step = 1; step <= explored; ++step) {
          expected += exploration_target(tr.indices[i], step, 5) == j ? 1 : 0;
        }
        const auto it = counts.find({i, j});
        EXPECT_EQ(it == counts.end() ? 0 : it->second, expected) << "player " << i << " arm " << j;
      }
    }
  }
}

TEST(CaEtc, FixedFallbackIsConfigurable) {
  const auto m = sample_market(3, 3, 1.0, 2);
  auto c = small_ca_etc(5000, 2);
  c.player_fallback = PlayerFallback::fixed;
  const auto tr = run_protocol(m, c);
  EXPECT_EQ(tr.rounds_played, 5000);
}

TEST(Engine, RegretIsBoundedPerRound) {
  const auto m = sample_market(4, 5, 1.0, 8);
  const auto g = compute_gaps(m);
  const auto tr = run_protocol(m, small_ca_etc(10000, 8));
  for (int i = 0; i < 4; ++i) EXPECT_LE(tr.player_regret[i], g.player_max_regret[i] * 10000 + 1e-9);
}

TEST(Engine, Deterministic) {
  const auto m = sample_market(4, 4, 1.0, 3);
  for (auto alg : kAll) {
    const auto a = run_protocol(m, any_config(alg, 20000, 77));
    const auto b = run_protocol(m, any_config(alg, 20000, 77));
    EXPECT_EQ(a.player_regret, b.player_regret);
    EXPECT_EQ(a.arm_regret, b.arm_regret);
    EXPECT_EQ(a.commit_round, b.commit_round);
  }
}

TEST(Engine, CheckpointRowsPerStride) {
  const auto m = sample_market(2, 3, 1.0, 3);
  auto c = config_for(Algorithm::etgs_blackboard, 2500, 1);
  const auto tr = run_protocol(m, c);
  // rounds 1000, 2000 and 2500, 2 players + 3 arms each
  ASSERT_EQ(tr.checkpoints.size(), 15u);
  EXPECT_EQ(tr.checkpoints[0].round, 1000);
  EXPECT_EQ(tr.checkpoints[14].round, 2500);
  EXPECT_EQ(tr.checkpoints[0].kind, AgentKind::player);
  EXPECT_EQ(tr.checkpoints[0].agent_id, 1);
  EXPECT_EQ(tr.checkpoints[4].kind, AgentKind::arm);
  EXPECT_EQ(tr.checkpoints[4].agent_id, 3);
}
