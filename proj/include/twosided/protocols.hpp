#pragma once

// The decentralized protocols: index estimation, ETGS with a blackboard,
// epoch-based CA-ETC (exponential or polynomial schedule) and ETGS with
// broadcast monitoring rounds. All of them commit through the same
// decentralized Gale-Shapley phase.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "twosided/agents.hpp"
#include "twosided/engine.hpp"
#include "twosided/market.hpp"
#include "twosided/schedule.hpp"

namespace twosided {

// Ranking a CA-ETC player uses when its epoch check fails.
enum class PlayerFallback { empirical_means, fixed };

struct RunConfig {
  std::int64_t horizon = 1'000'000;
  Algorithm algorithm = Algorithm::ca_etc;
  EpochSchedule schedule{};  // CA-ETC only
  std::uint64_t seed = 0;
  std::int64_t checkpoint_stride = 1000;
  bool debug_rounds = false;
  bool debug_snapshots = false;
  ArmRankingInit arm_initial_ranking = ArmRankingInit::random;
  PlayerFallback player_fallback = PlayerFallback::empirical_means;
  bool learn_in_commit = true;

  void validate(const MarketInstance& m) const {
    if (horizon < 1) throw ConfigError("horizon must be positive");
    if (checkpoint_stride < 1) throw ConfigError("checkpoint_stride must be positive");
    if (algorithm == Algorithm::ca_etc && horizon <= m.n_players()) {
      throw ConfigError("CA-ETC needs horizon > n_players so index estimation fits");
    }
  }

  EngineOptions engine_options() const {
    EngineOptions o;
    o.seed = seed;
    o.horizon = horizon;
    o.checkpoint_stride = checkpoint_stride;
    o.arm_initial_ranking = arm_initial_ranking;
    o.record_rounds = debug_rounds;
    o.record_estimates = debug_snapshots;
    o.learn_in_commit = learn_in_commit;
    return o;
  }
};

// Shared N+K bit board. Bit i belongs to player i, bit N+j to arm j; bits are
// only ever set.
class Blackboard {
 public:
  Blackboard(int n_players, int n_arms)
      : n_players_(n_players), bits_(static_cast<std::size_t>(n_players + n_arms), 0) {}

  void set_player(int i) { bits_.at(static_cast<std::size_t>(i)) = 1; }
  void set_arm(int j) { bits_.at(static_cast<std::size_t>(n_players_ + j)) = 1; }
  bool player_bit(int i) const { return bits_.at(static_cast<std::size_t>(i)) != 0; }
  bool arm_bit(int j) const { return bits_.at(static_cast<std::size_t>(n_players_ + j)) != 0; }
  int count() const { return static_cast<int>(std::count(bits_.begin(), bits_.end(), 1)); }
  bool all_set() const { return count() == static_cast<int>(bits_.size()); }
  std::size_t size() const noexcept { return bits_.size(); }

 private:
  int n_players_;
  std::vector<char> bits_;
};

// Every player proposes to arm 0 until accepted; the round of acceptance is
// its slot. Runs at most N rounds; slots follow arm 0's initial ranking.
inline std::vector<int> run_index_estimation(Engine& engine) {
  const int n = engine.n_players();
  std::vector<int> proposals(static_cast<std::size_t>(n), 0);
  for (int r = 0; r < n && !engine.finished(); ++r) {
    const auto out = engine.step(proposals, Phase::index_estimation, 0);
    for (int i = 0; i < n; ++i) {
      if (out.matching.arm_of(i) == 0) {
        engine.player(i).index = r;
        proposals[i] = kUnmatched;
      }
    }
  }
  std::vector<int> indices;
  for (int i = 0; i < n; ++i) indices.push_back(engine.player(i).index);
  engine.trace().indices = indices;
  return indices;
}

struct GaleShapleyPhaseResult {
  std::int64_t rounds = 0;
  std::optional<std::int64_t> settled_round;  // first round without rejections
  int overruns = 0;
};

// Decentralized deferred acceptance for up to `budget` rounds using each
// player's commit_ranking and each arm's commit_ranking(). A rejected player
// advances its cursor; a player whose cursor passes K abstains for the rest of
// the phase. Rounds are tagged gale-shapley until the first rejection-free
// round and committed afterwards (the proposals can no longer change).
inline GaleShapleyPhaseResult run_gale_shapley_phase(Engine& engine, std::int64_t budget, int epoch) {
  const int n = engine.n_players();
  const int k = engine.n_arms();
  GaleShapleyPhaseResult res;
  for (int i = 0; i < n; ++i) engine.player(i).gs_cursor = 1;
  std::vector<int> proposals(static_cast<std::size_t>(n), kUnmatched);
  std::vector<char> warned(static_cast<std::size_t>(n), 0);
  bool settled = false;
  for (std::int64_t r = 0; r < budget && !engine.finished(); ++r) {
    for (int i = 0; i < n; ++i) {
      const auto& p = engine.player(i);
      proposals[i] = p.gs_cursor <= k ? p.commit_ranking[p.gs_cursor - 1] : kUnmatched;
    }
    const auto out = engine.step(proposals, settled ? Phase::committed : Phase::gale_shapley, epoch);
    ++res.rounds;
    bool any_rejection = false;
    for (int i = 0; i < n; ++i) {
      if (!out.rejected[i]) continue;
      any_rejection = true;
      auto& p = engine.player(i);
      ++p.gs_cursor;
      if (p.gs_cursor > k && !warned[i]) {
        warned[i] = 1;
        ++res.overruns;
        engine.trace().warnings.push_back("player " + std::to_string(i + 1) +
                                          " exhausted its ranking in the Gale-Shapley phase at round " +
                                          std::to_string(engine.rounds_played()));
      }
    }
    if (!any_rejection && !settled) {
      settled = true;
      res.settled_round = engine.rounds_played();
    }
  }
  engine.trace().cursor_overruns += res.overruns;
  return res;
}

namespace detail {

inline bool all_rankings_true(const Engine& e) {
  const auto& m = e.instance();
  for (int i = 0; i < e.n_players(); ++i) {
    if (e.player(i).commit_ranking != true_ranking(m.player_means()[i])) return false;
  }
  for (int j = 0; j < e.n_arms(); ++j) {
    if (e.arm(j).commit_ranking() != true_ranking(m.arm_means()[j])) return false;
  }
  return true;
}

inline void mark_first_pass(AgentCommit& c, std::int64_t round, int epoch) {
  if (!c.first_pass_round) {
    c.first_pass_round = round;
    c.first_pass_epoch = epoch;
  }
}

// Plays up to `rounds` round-robin exploration rounds; the last one is tagged
// as the check round. Returns the number played.
inline std::int64_t explore(Engine& e, std::int64_t rounds, std::int64_t& step, int epoch) {
  const int n = e.n_players();
  std::vector<int> proposals(static_cast<std::size_t>(n), kUnmatched);
  std::int64_t played = 0;
  for (; played < rounds && !e.finished(); ++played) {
    ++step;
    for (int i = 0; i < n; ++i) {
      const int idx = e.player(i).index;
      proposals[i] = idx == kUnsetIndex ? kUnmatched : exploration_target(idx, step, e.n_arms());
    }
    e.step(proposals, played + 1 == rounds ? Phase::check : Phase::explore, epoch);
  }
  return played;
}

}  // namespace detail

inline SimulationTrace run_etgs_blackboard(const MarketInstance& instance, const RunConfig& config) {
  config.validate(instance);
  Engine e(instance, config.engine_options(), Algorithm::etgs_blackboard);
  const int n = e.n_players();
  const int k = e.n_arms();
  run_index_estimation(e);
  auto& trace = e.trace();

  Blackboard board(n, k);
  EpochRecord rec;
  rec.epoch = 1;
  rec.start_round = e.next_round();
  std::vector<int> proposals(static_cast<std::size_t>(n), kUnmatched);
  std::int64_t step = 0;
  while (!e.finished()) {
    ++step;
    const std::int64_t t = e.next_round();
    for (int i = 0; i < n; ++i) {
      const int idx = e.player(i).index;
      proposals[i] = idx == kUnsetIndex ? kUnmatched : exploration_target(idx, step, k);
    }
    const auto out = e.step(proposals, Phase::explore, 1);
    ++rec.explore_rounds;
    for (int i = 0; i < n; ++i) {
      auto& p = e.player(i);
      confidence_bounds(p.estimates, t);
      if (auto sigma = preference_check(p.estimates)) {
        p.learned_ranking = *sigma;
        p.commit_ranking = *sigma;
        board.set_player(i);
        detail::mark_first_pass(trace.player_commit[i], t, 1);
      }
    }
    const auto holder = out.matching.arm_to_player(k);
    for (int j = 0; j < k; ++j) {
      if (holder[j] == kUnmatched) continue;  // only proposed arms re-check
      auto& a = e.arm(j);
      confidence_bounds(a.estimates, t);
      if (auto beta = preference_check(a.estimates)) {
        a.learned_ranking = *beta;
        board.set_arm(j);
        detail::mark_first_pass(trace.arm_commit[j], t, 1);
      }
    }
    if (board.all_set()) {
      trace.commit_round = t;
      trace.commit_epoch = 1;
      break;
    }
  }
  rec.end_round = e.rounds_played();
  for (int i = 0; i < n; ++i) rec.player_passed.push_back(board.player_bit(i));
  for (int j = 0; j < k; ++j) rec.arm_passed.push_back(board.arm_bit(j));
  rec.all_passed = board.all_set();
  if (rec.all_passed) {
    rec.check_round = *trace.commit_round;
    rec.all_true = detail::all_rankings_true(e);
    trace.committed_true = rec.all_true;
  }
  trace.epochs.push_back(rec);
  if (trace.commit_round) {
    run_gale_shapley_phase(e, e.remaining(), 1);
  } else {
    trace.warnings.push_back("horizon reached before every blackboard bit was set");
  }
  return e.release_trace();
}

inline SimulationTrace run_ca_etc(const MarketInstance& instance, const RunConfig& config) {
  config.validate(instance);
  Engine e(instance, config.engine_options(), Algorithm::ca_etc);
  const int n = e.n_players();
  const int k = e.n_arms();
  const auto& schedule = config.schedule;
  run_index_estimation(e);
  auto& trace = e.trace();

  std::int64_t step = 0;
  for (int l = 1; !e.finished(); ++l) {
    EpochRecord rec;
    rec.epoch = l;
    rec.start_round = e.next_round();
    const std::int64_t explore_len = schedule.explore(l);
    const std::int64_t horizon_len = schedule.horizon(l);
    rec.explore_rounds = detail::explore(e, explore_len, step, l);
    if (rec.explore_rounds == explore_len) {
      // One check per agent, at the global round of the last exploration round.
      const std::int64_t t = e.rounds_played();
      rec.check_round = t;
      rec.all_passed = true;
      for (int i = 0; i < n; ++i) {
        auto& p = e.player(i);
        confidence_bounds(p.estimates, t);
        auto sigma = preference_check(p.estimates);
        rec.player_passed.push_back(sigma.has_value());
        rec.all_passed = rec.all_passed && sigma.has_value();
        if (sigma) {
          p.learned_ranking = *sigma;
          p.commit_ranking = *sigma;
          detail::mark_first_pass(trace.player_commit[i], t, l);
        } else {
          p.learned_ranking.reset();
          if (config.player_fallback == PlayerFallback::empirical_means) {
            p.commit_ranking = empirical_ranking(p.estimates);
          } else {
            std::iota(p.commit_ranking.begin(), p.commit_ranking.end(), 0);
          }
        }
      }
      for (int j = 0; j < k; ++j) {
        auto& a = e.arm(j);
        confidence_bounds(a.estimates, t);
        auto beta = preference_check(a.estimates);
        rec.arm_passed.push_back(beta.has_value());
        rec.all_passed = rec.all_passed && beta.has_value();
        a.learned_ranking = beta;  // falls back to initial_ranking when absent
        if (beta) detail::mark_first_pass(trace.arm_commit[j], t, l);
      }
      rec.all_true = detail::all_rankings_true(e);
      if (rec.all_passed && !trace.commit_round) {
        trace.commit_round = t;
        trace.commit_epoch = l;
        trace.committed_true = rec.all_true;
      }
      run_gale_shapley_phase(e, horizon_len - explore_len, l);
    }
    rec.end_round = e.rounds_played();
    trace.epochs.push_back(std::move(rec));
  }
  return e.release_trace();
}

inline SimulationTrace run_broadcast_etgs(const MarketInstance& instance, const RunConfig& config) {
  config.validate(instance);
  Engine e(instance, config.engine_options(), Algorithm::broadcast_etgs);
  const int n = e.n_players();
  const int k = e.n_arms();
  run_index_estimation(e);
  auto& trace = e.trace();

  std::int64_t step = 0;
  for (int l = 1; !e.finished(); ++l) {
    EpochRecord rec;
    rec.epoch = l;
    rec.start_round = e.next_round();
    const std::int64_t explore_len = l >= 62 ? (std::int64_t{1} << 62) : (std::int64_t{1} << l);
    rec.explore_rounds = detail::explore(e, explore_len, step, l);
    if (rec.explore_rounds < explore_len) {
      rec.end_round = e.rounds_played();
      trace.epochs.push_back(std::move(rec));
      break;
    }
    const std::int64_t t = e.rounds_played();
    rec.check_round = t;
    std::vector<char> player_flag(static_cast<std::size_t>(n), 0);
    std::vector<char> arm_flag(static_cast<std::size_t>(k), 0);
    for (int i = 0; i < n; ++i) {
      auto& p = e.player(i);
      confidence_bounds(p.estimates, t);
      if (auto sigma = preference_check(p.estimates)) {
        player_flag[i] = 1;
        p.learned_ranking = *sigma;
        p.commit_ranking = *sigma;
        detail::mark_first_pass(trace.player_commit[i], t, l);
      }
    }
    for (int j = 0; j < k; ++j) {
      auto& a = e.arm(j);
      confidence_bounds(a.estimates, t);
      if (auto beta = preference_check(a.estimates)) {
        arm_flag[j] = 1;
        a.learned_ranking = *beta;
        detail::mark_first_pass(trace.arm_commit[j], t, l);
      }
    }
    rec.player_passed = player_flag;
    rec.arm_passed = arm_flag;
    rec.all_passed = std::all_of(player_flag.begin(), player_flag.end(), [](char f) { return f != 0; }) &&
                     std::all_of(arm_flag.begin(), arm_flag.end(), [](char f) { return f != 0; });
    if (e.finished()) {
      rec.end_round = e.rounds_played();
      trace.epochs.push_back(std::move(rec));
      break;
    }

    // Monitoring round: a ready player proposes to the arm matching its slot,
    // which accepts only if it is ready too. Everyone sees the matched set.
    std::vector<int> proposals(static_cast<std::size_t>(n), kUnmatched);
    for (int i = 0; i < n; ++i) {
      if (player_flag[i] && e.player(i).index != kUnsetIndex) proposals[i] = e.player(i).index;
    }
    const auto out = e.step(proposals, Phase::monitor, l, arm_flag);
    int matched_arms = 0;
    for (int i = 0; i < n; ++i) matched_arms += out.matching.arm_of(i) != kUnmatched ? 1 : 0;
    rec.monitor_matches = matched_arms;
    if (matched_arms == n) {
      trace.commit_round = e.rounds_played();
      trace.commit_epoch = l;
      rec.all_true = detail::all_rankings_true(e);
      trace.committed_true = rec.all_true;
      run_gale_shapley_phase(e, e.remaining(), l);
      rec.end_round = e.rounds_played();
      trace.epochs.push_back(std::move(rec));
      break;
    }
    rec.end_round = e.rounds_played();
    trace.epochs.push_back(std::move(rec));
  }
  if (!trace.commit_round) trace.warnings.push_back("horizon reached before a full monitoring round");
  return e.release_trace();
}

inline SimulationTrace run_protocol(const MarketInstance& instance, const RunConfig& config) {
  switch (config.algorithm) {
    case Algorithm::etgs_blackboard: return run_etgs_blackboard(instance, config);
    case Algorithm::ca_etc: return run_ca_etc(instance, config);
    case Algorithm::broadcast_etgs: return run_broadcast_etgs(instance, config);
  }
  throw ConfigError("unknown algorithm");
}

}  // namespace twosided
