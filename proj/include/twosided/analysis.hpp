#pragma once

// Closed-form evaluators for the epoch thresholds, horizon feasibility and
// regret bounds of the protocols, plus a replay monitor for the concentration
// bad events.
//
// Log bases: every "log T" that multiplies K / delta^2 is natural. The outer
// logarithm of l_max (it inverts 2^l) and the log(T / T0) term of the CA-ETC
// bound (it comes from gamma * log2 of the epoch count) are base 2.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <vector>

#include "twosided/engine.hpp"
#include "twosided/error.hpp"
#include "twosided/market.hpp"

namespace twosided {

struct TheoryInputs {
  int n_players = 1;  // N
  int n_arms = 1;     // K
  double horizon = 1.0;  // T
  double t0 = 1.0;
  double gamma = 0.5;
  double delta = 1.0;  // universal gap

  void validate() const {
    if (n_players < 1 || n_arms < 1) throw ConfigError("N and K must be positive");
    if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("gamma must lie in (0, 1)");
    if (!(delta > 0.0)) throw ConfigError("delta must be positive");
    if (!(t0 > 0.0)) throw ConfigError("T0 must be positive");
    if (!(horizon > 0.0)) throw ConfigError("T must be positive");
  }

  double b() const { return std::exp2(1.0 / gamma); }
  double log_t() const { return std::log(horizon); }
  // 32 K ln T / delta^2: exploration rounds (all arms) that separate every ranking.
  double exploration_target() const { return 32.0 * n_arms * log_t() / (delta * delta); }
};

// A bound together with its additive terms.
struct BoundBreakdown {
  std::vector<double> terms;
  double total = 0.0;
  bool applicable = true;  // feasibility condition on T0 holds
};

inline double concentration_term(const TheoryInputs& in) {
  return 2.0 * in.n_players * in.n_arms * std::numbers::pi * std::numbers::pi / 3.0;
}

// 32 ln T / delta^2 samples per alternative.
inline double samples_threshold(double delta, double horizon) {
  if (!(delta > 0.0)) throw ConfigError("delta must be positive");
  return 32.0 * std::log(horizon) / (delta * delta);
}

// min{ l : sum_{l'<=l} 2^{l'} T0 >= 32 K ln T / delta^2 }, by summation.
inline int l_max_exp(const TheoryInputs& in) {
  in.validate();
  const double target = in.exploration_target();
  double total = 0.0;
  for (int l = 1;; ++l) {
    total += std::exp2(static_cast<double>(l)) * in.t0;
    if (total >= target) return l;
  }
}

// ceil(log2(16 K ln T / (T0 delta^2) + 1)), at least 1.
inline int l_max_exp_closed_form(const TheoryInputs& in) {
  in.validate();
  const double x = 16.0 * in.n_arms * in.log_t() / (in.t0 * in.delta * in.delta);
  return std::max(1, static_cast<int>(std::ceil(std::log2(x + 1.0))));
}

// min{ l : sum_{l'<=l} l'^2 T0 >= 32 K ln T / delta^2 }, by summation.
inline int l_max_poly(const TheoryInputs& in) {
  in.validate();
  const double target = in.exploration_target();
  double total = 0.0;
  for (int l = 1;; ++l) {
    total += static_cast<double>(l) * l * in.t0;
    if (total >= target) return l;
  }
}

// ceil((96 K ln T / (T0 delta^2))^{1/3}); upper-bounds l_max_poly by at most one.
inline int l_max_poly_closed_form(const TheoryInputs& in) {
  in.validate();
  const double x = 96.0 * in.n_arms * in.log_t() / (in.t0 * in.delta * in.delta);
  return std::max(1, static_cast<int>(std::ceil(std::cbrt(x))));
}

struct EpochCount {
  double value = 0.0;  // real-valued epoch count
  int last_epoch = 0;  // ceil(value): index of the last, possibly truncated, epoch
};

// Epochs needed to cover T - N rounds when epoch l lasts b^l T0:
// log_b((b - 1)/b * (T - N)/T0 + 1).
inline EpochCount tilde_l_exp(const TheoryInputs& in) {
  in.validate();
  if (!(in.horizon > in.n_players)) throw ConfigError("T must exceed N");
  const double b = in.b();
  const double v = std::log((b - 1.0) / b * (in.horizon - in.n_players) / in.t0 + 1.0) / std::log(b);
  return {v, static_cast<int>(std::ceil(v))};
}

// ceil(((T/T0)(b+1))^{1/(b+1)}) for the polynomial schedule with exponent b.
inline EpochCount tilde_l_poly(const TheoryInputs& in, double b) {
  in.validate();
  const double v = std::pow(in.horizon / in.t0 * (b + 1.0), 1.0 / (b + 1.0));
  return {v, static_cast<int>(std::ceil(v))};
}

// (32 K ln T / (delta^2 (T - N)^gamma))^{1/(1 - gamma)}
inline double t0_min(const TheoryInputs& in) {
  in.validate();
  if (!(in.horizon > in.n_players)) throw ConfigError("T must exceed N");
  const double inner =
      in.exploration_target() / std::pow(in.horizon - in.n_players, in.gamma);
  return std::pow(inner, 1.0 / (1.0 - in.gamma));
}

inline bool t0_feasible(double t0, const TheoryInputs& in) { return t0 >= t0_min(in); }

// Blackboard (and broadcast) ETGS bound:
// (N + 64 K ln T / delta^2 + K^2 + 2 N K pi^2 / 3) * delta_max.
// The arm version drops the index-estimation term N.
inline BoundBreakdown etgs_regret_bound(const TheoryInputs& in, double delta_max, AgentKind agent = AgentKind::player) {
  in.validate();
  BoundBreakdown b;
  const double k = in.n_arms;
  b.terms = {agent == AgentKind::player ? static_cast<double>(in.n_players) * delta_max : 0.0,
             64.0 * k * in.log_t() / (in.delta * in.delta) * delta_max, k * k * delta_max,
             concentration_term(in) * delta_max};
  for (double t : b.terms) b.total += t;
  return b;
}

// CA-ETC (exponential) bound with the constants carried through the proof:
//   N dmax
// + 2 (T/T0)^gamma T0 dmax
// + log2(64 K ln T/(T0 delta^2) + 4) (32 K ln T/(T0 delta^2) + 2)^{1/gamma} (2^{1/gamma} - 2) T0 dmax
// + gamma K^2 log2(T/T0) dmax
// + 2 N K pi^2/3 dmax
inline BoundBreakdown ca_etc_regret_bound(const TheoryInputs& in, double delta_max) {
  in.validate();
  BoundBreakdown b;
  const double x = in.n_arms * in.log_t() / (in.t0 * in.delta * in.delta);
  const double k = in.n_arms;
  b.terms = {
      in.n_players * delta_max,
      2.0 * std::pow(in.horizon / in.t0, in.gamma) * in.t0 * delta_max,
      std::log2(64.0 * x + 4.0) * std::pow(32.0 * x + 2.0, 1.0 / in.gamma) * (in.b() - 2.0) * in.t0 * delta_max,
      in.gamma * k * k * std::log2(in.horizon / in.t0) * delta_max,
      concentration_term(in) * delta_max,
  };
  for (double t : b.terms) b.total += t;
  b.applicable = in.horizon > in.n_players && t0_feasible(in.t0, in);
  return b;
}

// Headline form of the exploration term, without the +2 / +4 offsets:
// T0 (32 K ln T/(T0 delta^2))^{1/gamma} log2(64 K ln T/(T0 delta^2)) dmax.
inline double ca_etc_headline_exploration_term(const TheoryInputs& in, double delta_max) {
  in.validate();
  const double x = in.n_arms * in.log_t() / (in.t0 * in.delta * in.delta);
  return in.t0 * std::pow(32.0 * x, 1.0 / in.gamma) * std::log2(64.0 * x) * delta_max;
}

// (96 K ln T / (delta^2 ((b+1) T)^{2/(b+1)}))^{(b+1)/(b-2)}; requires b > 2.
inline double t0_min_poly(const TheoryInputs& in, double b) {
  in.validate();
  if (!(b > 2.0)) throw ConfigError("polynomial feasibility needs b > 2");
  const double inner = 96.0 * in.n_arms * in.log_t() /
                       (in.delta * in.delta * std::pow((b + 1.0) * in.horizon, 2.0 / (b + 1.0)));
  return std::pow(inner, (b + 1.0) / (b - 2.0));
}

// CA-ETC (polynomial) bound:
//   N dmax
// + (1/3) ((T/T0)(b+1))^{3/(b+1)} T0 dmax
// + (96 K ln T/(T0 delta^2))^{(b+1)/3} T0/(b+1) dmax
// + K^2 ((T/T0)(b+1))^{1/(b+1)} dmax
// + 2 N K pi^2/3 dmax
inline BoundBreakdown ca_etc_poly_regret_bound(const TheoryInputs& in, double delta_max, std::optional<double> exponent = std::nullopt) {
  in.validate();
  const double b = exponent.value_or(in.b());
  BoundBreakdown out;
  const double k = in.n_arms;
  const double growth = in.horizon / in.t0 * (b + 1.0);
  out.terms = {
      in.n_players * delta_max,
      std::pow(growth, 3.0 / (b + 1.0)) * in.t0 / 3.0 * delta_max,
      std::pow(96.0 * k * in.log_t() / (in.t0 * in.delta * in.delta), (b + 1.0) / 3.0) * in.t0 / (b + 1.0) *
          delta_max,
      k * k * std::pow(growth, 1.0 / (b + 1.0)) * delta_max,
      concentration_term(in) * delta_max,
  };
  for (double t : out.terms) out.total += t;
  out.applicable = b > 2.0 && in.t0 >= t0_min_poly(in, b);
  return out;
}

struct BadEventLog {
  std::vector<std::uint8_t> player_flags;  // F_p(t), index t - 1
  std::vector<std::uint8_t> arm_flags;     // F_a(t)
  std::int64_t player_count = 0;
  std::int64_t arm_count = 0;
};

// Replays the recorded estimate updates and flags, for each round t, whether
// some visited pair has |estimate - mean| > sqrt(2 ln t / count). Pairs never
// visited do not flag.
inline BadEventLog bad_event_monitor(const SimulationTrace& trace, const MarketInstance& m) {
  if (!trace.estimate_updates) throw SnapshotsMissingError("trace was recorded without estimate snapshots");
  const int n = m.n_players();
  const int k = m.n_arms();
  std::vector<double> pmean(static_cast<std::size_t>(n * k), 0.0), amean(static_cast<std::size_t>(k * n), 0.0);
  std::vector<std::int64_t> pcount(static_cast<std::size_t>(n * k), 0), acount(static_cast<std::size_t>(k * n), 0);
  BadEventLog log;
  const auto& updates = *trace.estimate_updates;
  std::size_t cursor = 0;
  for (std::int64_t t = 1; t <= trace.rounds_played; ++t) {
    for (; cursor < updates.size() && updates[cursor].round == t; ++cursor) {
      const auto& u = updates[cursor];
      if (u.kind == AgentKind::player) {
        pmean[u.agent * k + u.partner] = u.mean;
        pcount[u.agent * k + u.partner] = u.count;
      } else {
        amean[u.agent * n + u.partner] = u.mean;
        acount[u.agent * n + u.partner] = u.count;
      }
    }
    const double two_log_t = 2.0 * std::log(static_cast<double>(t));
    bool fp = false;
    for (int i = 0; i < n && !fp; ++i) {
      for (int j = 0; j < k; ++j) {
        const auto c = pcount[i * k + j];
        if (c > 0 && std::abs(pmean[i * k + j] - m.player_mean(i, j)) > std::sqrt(two_log_t / c)) {
          fp = true;
          break;
        }
      }
    }
    bool fa = false;
    for (int j = 0; j < k && !fa; ++j) {
      for (int i = 0; i < n; ++i) {
        const auto c = acount[j * n + i];
        if (c > 0 && std::abs(amean[j * n + i] - m.arm_mean(j, i)) > std::sqrt(two_log_t / c)) {
          fa = true;
          break;
        }
      }
    }
    log.player_flags.push_back(fp ? 1 : 0);
    log.arm_flags.push_back(fa ? 1 : 0);
    log.player_count += fp ? 1 : 0;
    log.arm_count += fa ? 1 : 0;
  }
  return log;
}

// NK pi^2 / 3: expected-count bound for player bad events.
inline double bad_event_bound(int n_players, int n_arms) {
  return n_players * n_arms * std::numbers::pi * std::numbers::pi / 3.0;
}

}  // namespace twosided
