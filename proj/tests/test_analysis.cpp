#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "twosided/analysis.hpp"
#include "twosided/protocols.hpp"

using namespace twosided;

namespace {

TheoryInputs reference_inputs() { return TheoryInputs{5, 5, 1e6, 500, 0.4, 0.1}; }

void expect_terms(const BoundBreakdown& b, std::initializer_list<double> terms, double total) {
  ASSERT_EQ(b.terms.size(), terms.size());
  std::size_t i = 0;
  for (double t : terms) {
    EXPECT_NEAR(b.terms[i], t, 1e-12 * std::abs(t)) << "term " << i;
    ++i;
  }
  EXPECT_NEAR(b.total, total, 1e-12 * total);
}

}  // namespace

TEST(EpochThresholds, ReferenceInputs) {
  const auto in = reference_inputs();
  EXPECT_EQ(l_max_exp(in), 8);
  EXPECT_EQ(l_max_exp_closed_form(in), 8);
  EXPECT_EQ(l_max_poly(in), 11);
  EXPECT_EQ(l_max_poly_closed_form(in), 11);
  auto shorter = in;
  shorter.horizon = 1e5;
  EXPECT_EQ(l_max_exp(shorter), 8);
}

TEST(EpochThresholds, EpochCountForHorizon) {
  const auto in = reference_inputs();
  const auto l = tilde_l_exp(in);
  EXPECT_NEAR(l.value, 4.274403514620712, 1e-12);
  EXPECT_EQ(l.last_epoch, 5);
  EXPECT_LT(l.value, 4.386599296806982);
}

TEST(EpochThresholds, MinimumT0) {
  EXPECT_NEAR(t0_min(reference_inputs()), 80812.70623493379, 1e-7);
  EXPECT_FALSE(t0_feasible(500, reference_inputs()));
  EXPECT_TRUE(t0_feasible(80813, reference_inputs()));
}

TEST(EpochThresholds, SamplesThreshold) {
  EXPECT_NEAR(samples_threshold(0.1, 1e6), 3200.0 * std::log(1e6), 1e-9);
  EXPECT_THROW(samples_threshold(0.0, 1e6), ConfigError);
}

TEST(EpochThresholds, ClosedFormsAgreeOnRandomGrid) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    TheoryInputs in;
    in.n_arms = 1 + static_cast<int>(rng() % 10);
    in.n_players = 1 + static_cast<int>(rng() % static_cast<unsigned>(in.n_arms));
    in.horizon = std::round(std::pow(10.0, 3.0 + 6.0 * unit(rng)));
    in.t0 = std::round(std::pow(10.0, 4.0 * unit(rng)));
    in.delta = 0.01 + 0.99 * unit(rng);
    in.gamma = 0.05 + 0.9 * unit(rng);
    EXPECT_EQ(l_max_exp(in), l_max_exp_closed_form(in));
    const int poly = l_max_poly(in);
    const int poly_cf = l_max_poly_closed_form(in);
    EXPECT_GE(poly_cf, poly);
    EXPECT_LE(poly_cf, poly + 1);
    if (in.horizon > in.n_players) {
      EXPECT_LT(tilde_l_exp(in).value, in.gamma * std::log2((in.horizon - in.n_players) / in.t0 + 1.0));
    }
  }
}

TEST(Bounds, EtgsUnitInputs) {
  const TheoryInputs in{1, 1, std::numbers::e, 1.0, 0.5, 1.0};
  const auto b = etgs_regret_bound(in, 1.0);
  EXPECT_NEAR(b.total, 72.57973626739291, 1e-12);
  const auto arm = etgs_regret_bound(in, 1.0, AgentKind::arm);
  EXPECT_NEAR(arm.total, 71.57973626739291, 1e-12);
}

TEST(Bounds, EtgsScalesWithDeltaMax) {
  const auto in = reference_inputs();
  EXPECT_NEAR(etgs_regret_bound(in, 0.5).total, 0.5 * etgs_regret_bound(in, 1.0).total, 1e-6);
}

TEST(Bounds, CaEtcExponentialReference) {
  const auto b = ca_etc_regret_bound(reference_inputs(), 1.0);
  expect_terms(b, {5, 20912.791051825465, 74432576689.125705, 109.65784284662087, 164.49340668482264},
               74432597881.068007);
  EXPECT_FALSE(b.applicable);
  for (double t : b.terms) EXPECT_GE(t, 0.0);
  EXPECT_GT(ca_etc_headline_exploration_term(reference_inputs(), 1.0), 0.0);
}

TEST(Bounds, CaEtcPolynomialReference) {
  const auto in = reference_inputs();
  const auto b4 = ca_etc_poly_regret_bound(in, 1.0, 4.0);
  expect_terms(b4, {5, 41864.773858492993, 16010207.238862856, 157.73933612004833, 164.49340668482264},
               16052399.245464153);
  EXPECT_NEAR(t0_min_poly(in, 4.0), 71622658.439220006, 1e-4);
  const auto bd = ca_etc_poly_regret_bound(in, 1.0);
  expect_terms(bd, {5, 12037.021232827549, 637798291.16087675, 104.11103589035728, 164.49340668482264},
               637810601.78655216);
  EXPECT_NEAR(t0_min_poly(in, in.b()), 7340967.0181433944, 1e-5);
  EXPECT_THROW(t0_min_poly(in, 2.0), ConfigError);
}

TEST(Bounds, RejectInvalidInputs) {
  auto in = reference_inputs();
  in.gamma = 0.0;
  EXPECT_THROW(l_max_exp(in), ConfigError);
  in = reference_inputs();
  in.delta = 0.0;
  EXPECT_THROW(etgs_regret_bound(in, 1.0), ConfigError);
}

TEST(BadEvents, BoundValue) { EXPECT_NEAR(bad_event_bound(5, 5), 82.24670334241132, 1e-12); }

TEST(BadEvents, RequiresSnapshots) {
  const auto m = sample_market(2, 2, 1.0, 3);
  RunConfig c;
  c.algorithm = Algorithm::etgs_blackboard;
  c.horizon = 200;
  const auto plain = run_protocol(m, c);
  EXPECT_THROW(bad_event_monitor(plain, m), SnapshotsMissingError);
  c.debug_snapshots = true;
  const auto tr = run_protocol(m, c);
  const auto log = bad_event_monitor(tr, m);
  EXPECT_EQ(log.player_flags.size(), 200u);
  EXPECT_LE(log.player_count, 200);
}

TEST(BadEvents, NoiselessRunsNeverFlag) {
  const auto m = sample_market(3, 3, 0.0, 9);
  RunConfig c;
  c.algorithm = Algorithm::etgs_blackboard;
  c.horizon = 500;
  c.debug_snapshots = true;
  const auto log = bad_event_monitor(run_protocol(m, c), m);
  EXPECT_EQ(log.player_count, 0);
  EXPECT_EQ(log.arm_count, 0);
}
