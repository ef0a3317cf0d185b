#pragma once

// Round-based market simulator. Each round players declare proposals, every
// arm keeps its best proposer under its current commit ranking, matched pairs
// draw rewards, estimates update and regret accrues against the stable
// benchmarks. Protocols (protocols.hpp) drive the engine round by round.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "twosided/agents.hpp"
#include "twosided/market.hpp"
#include "twosided/rng.hpp"

namespace twosided {

enum class Phase : std::uint8_t { index_estimation, explore, check, monitor, gale_shapley, committed };

inline std::string_view phase_name(Phase p) {
  switch (p) {
    case Phase::index_estimation: return "index-estimation";
    case Phase::explore: return "explore";
    case Phase::check: return "check";
    case Phase::monitor: return "monitor";
    case Phase::gale_shapley: return "gale-shapley";
    case Phase::committed: return "committed";
  }
  return "unknown";
}

inline bool is_exploration(Phase p) { return p == Phase::explore || p == Phase::check; }
inline bool is_commit(Phase p) { return p == Phase::gale_shapley || p == Phase::committed; }

enum class AgentKind : std::uint8_t { player, arm };

inline std::string_view agent_kind_name(AgentKind k) { return k == AgentKind::player ? "player" : "arm"; }

enum class Algorithm { etgs_blackboard, ca_etc, broadcast_etgs };

inline std::string_view algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::etgs_blackboard: return "etgs_blackboard";
    case Algorithm::ca_etc: return "ca_etc";
    case Algorithm::broadcast_etgs: return "broadcast_etgs";
  }
  return "unknown";
}

// One CSV row. Agent ids and partners are 1-based here; partner 0 = unmatched.
struct CheckpointRow {
  std::int64_t round = 0;
  int epoch = 0;
  Phase phase = Phase::explore;
  AgentKind kind = AgentKind::player;
  int agent_id = 0;
  int matched_partner = 0;
  double cum_pseudo_regret = 0.0;
};

struct EpochRecord {
  int epoch = 0;
  std::int64_t start_round = 0;     // first round of the epoch
  std::int64_t explore_rounds = 0;  // exploration rounds actually played
  std::int64_t check_round = 0;     // global round of the ranking check; 0 = none
  std::int64_t end_round = 0;       // last round played in the epoch
  std::vector<char> player_passed;
  std::vector<char> arm_passed;
  bool all_passed = false;
  bool all_true = false;  // every agent's commit ranking equals its true ranking
  std::int64_t monitor_matches = -1;  // |O_l| for the broadcast protocol
};

struct AgentCommit {
  std::optional<std::int64_t> first_pass_round;
  std::optional<int> first_pass_epoch;
};

// Per-round log, kept only when requested (memory grows with T * N).
struct RoundLog {
  std::vector<Phase> phase;
  std::vector<int> epoch;
  std::vector<std::uint8_t> collisions;  // arms receiving >= 2 proposals
  std::vector<std::int16_t> matching;    // flat, N entries per round, -1 unmatched

  std::size_t rounds() const noexcept { return phase.size(); }
};

// A single estimate change, recorded for replay by the bad-event monitor.
struct EstimateUpdate {
  std::int64_t round = 0;
  AgentKind kind = AgentKind::player;
  int agent = 0;
  int partner = 0;
  double mean = 0.0;
  std::int64_t count = 0;
};

struct SimulationTrace {
  Algorithm algorithm = Algorithm::etgs_blackboard;
  std::int64_t horizon = 0;
  std::int64_t rounds_played = 0;
  int n_players = 0;
  int n_arms = 0;

  std::vector<int> indices;  // 0-based slots from index estimation
  std::vector<CheckpointRow> checkpoints;

  std::vector<double> player_regret;  // cumulative player-optimal pseudo-regret
  std::vector<double> arm_regret;     // cumulative arm-pessimal pseudo-regret
  std::vector<double> player_realized_regret;
  std::vector<double> arm_realized_regret;

  std::optional<std::int64_t> commit_round;
  std::optional<int> commit_epoch;
  bool committed_true = false;
  std::vector<AgentCommit> player_commit;
  std::vector<AgentCommit> arm_commit;
  std::vector<EpochRecord> epochs;

  std::int64_t exploration_collisions = 0;
  std::int64_t total_collisions = 0;
  std::int64_t cursor_overruns = 0;
  std::vector<std::string> warnings;

  std::optional<RoundLog> rounds;
  std::optional<std::vector<EstimateUpdate>> estimate_updates;
};

enum class ArmRankingInit { random, identity };

struct EngineOptions {
  std::uint64_t seed = 0;
  std::int64_t horizon = 0;
  std::int64_t checkpoint_stride = 1000;
  ArmRankingInit arm_initial_ranking = ArmRankingInit::random;
  bool record_rounds = false;
  bool record_estimates = false;
  bool learn_in_commit = true;
};

struct RoundOutcome {
  Matching matching;
  int collisions = 0;
  std::vector<char> rejected;  // proposed but not accepted
};

// Seeded permutation of 0..n-1 (Fisher-Yates on raw engine output).
inline Ranking seeded_permutation(int n, Rng& rng) {
  Ranking p(static_cast<std::size_t>(n));
  std::iota(p.begin(), p.end(), 0);
  for (int k = n - 1; k > 0; --k) {
    const auto pick = static_cast<int>(rng() % static_cast<std::uint64_t>(k + 1));
    std::swap(p[k], p[pick]);
  }
  return p;
}

class Engine {
 public:
  Engine(const MarketInstance& instance, const EngineOptions& options, Algorithm algorithm)
      : instance_(instance), options_(options), bench_(instance) {
    const int n = instance.n_players();
    const int k = instance.n_arms();
    if (options_.horizon < 1) throw ConfigError("horizon must be positive");
    if (options_.checkpoint_stride < 1) throw ConfigError("checkpoint_stride must be positive");

    players_.assign(static_cast<std::size_t>(n), PlayerState(k));
    Rng ranking_rng(mix_seed(options_.seed, seed_domain::arm_ranking));
    for (int j = 0; j < k; ++j) {
      Ranking init(static_cast<std::size_t>(n));
      std::iota(init.begin(), init.end(), 0);
      if (options_.arm_initial_ranking == ArmRankingInit::random) init = seeded_permutation(n, ranking_rng);
      arms_.emplace_back(n, std::move(init));
    }

    // One independent stream per (agent, partner) so that a pair's reward
    // sequence does not depend on when the pair happens to meet.
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < k; ++j) {
        player_streams_.emplace_back(mix_seed(options_.seed, seed_domain::player_reward, i, j));
      }
    }
    for (int j = 0; j < k; ++j) {
      for (int i = 0; i < n; ++i) {
        arm_streams_.emplace_back(mix_seed(options_.seed, seed_domain::arm_reward, j, i));
      }
    }

    const auto holder = bench_.arm_pessimal().arm_to_player(k);
    for (int i = 0; i < n; ++i) player_target_.push_back(instance.player_mean(i, bench_.player_optimal.arm_of(i)));
    for (int j = 0; j < k; ++j) arm_target_.push_back(holder[j] == kUnmatched ? 0.0 : instance.arm_mean(j, holder[j]));

    trace_.algorithm = algorithm;
    trace_.horizon = options_.horizon;
    trace_.n_players = n;
    trace_.n_arms = k;
    trace_.player_regret.assign(static_cast<std::size_t>(n), 0.0);
    trace_.arm_regret.assign(static_cast<std::size_t>(k), 0.0);
    trace_.player_realized_regret.assign(static_cast<std::size_t>(n), 0.0);
    trace_.arm_realized_regret.assign(static_cast<std::size_t>(k), 0.0);
    trace_.player_commit.resize(static_cast<std::size_t>(n));
    trace_.arm_commit.resize(static_cast<std::size_t>(k));
    if (options_.record_rounds) trace_.rounds.emplace();
    if (options_.record_estimates) trace_.estimate_updates.emplace();
  }

  const MarketInstance& instance() const noexcept { return instance_; }
  const StableBenchmarks& benchmarks() const noexcept { return bench_; }
  const EngineOptions& options() const noexcept { return options_; }
  int n_players() const noexcept { return instance_.n_players(); }
  int n_arms() const noexcept { return instance_.n_arms(); }

  std::int64_t rounds_played() const noexcept { return played_; }
  std::int64_t next_round() const noexcept { return played_ + 1; }
  std::int64_t remaining() const noexcept { return options_.horizon - played_; }
  bool finished() const noexcept { return played_ >= options_.horizon; }

  PlayerState& player(int i) { return players_[i]; }
  const PlayerState& player(int i) const { return players_[i]; }
  ArmState& arm(int j) { return arms_[j]; }
  const ArmState& arm(int j) const { return arms_[j]; }

  SimulationTrace& trace() noexcept { return trace_; }
  SimulationTrace release_trace() { return std::move(trace_); }

  // Plays one round. proposals[i] is an arm or kUnmatched (abstain). When
  // `arm_open` is non-empty, arms with arm_open[j] == 0 reject every proposal.
  RoundOutcome step(std::span<const int> proposals, Phase phase, int epoch,
                    std::span<const char> arm_open = {}) {
    if (finished()) throw ConfigError("engine stepped past its horizon");
    const int n = n_players();
    const int k = n_arms();
    if (static_cast<int>(proposals.size()) != n) throw DimensionError("one proposal per player required");
    const std::int64_t t = ++played_;

    proposers_.assign(static_cast<std::size_t>(k), {});
    for (int i = 0; i < n; ++i) {
      const int a = proposals[i];
      if (a == kUnmatched) continue;
      if (a < 0 || a >= k) throw DimensionError("proposal to unknown arm");
      proposers_[a].push_back(i);
    }

    RoundOutcome out{Matching(n), 0, std::vector<char>(static_cast<std::size_t>(n), 0)};
    for (int j = 0; j < k; ++j) {
      const auto& ps = proposers_[j];
      if (ps.size() >= 2) ++out.collisions;
      if (ps.empty()) continue;
      const bool open = arm_open.empty() || arm_open[j];
      const int winner = open ? resolve_proposals(arms_[j], ps) : kUnmatched;
      for (int p : ps) {
        if (p == winner) {
          out.matching.player_to_arm[p] = j;
        } else {
          out.rejected[p] = 1;
        }
      }
    }

    const bool learn = !is_commit(phase) || options_.learn_in_commit;
    std::vector<int> holder(static_cast<std::size_t>(k), kUnmatched);
    for (int i = 0; i < n; ++i) {
      const int j = out.matching.arm_of(i);
      double player_reward = 0.0;
      double player_mean = 0.0;
      if (j != kUnmatched) {
        holder[j] = i;
        player_mean = instance_.player_mean(i, j);
        player_reward = player_mean + instance_.noise_std() * standard_normal(player_streams_[i * k + j]);
        const double arm_mean = instance_.arm_mean(j, i);
        const double arm_reward = arm_mean + instance_.noise_std() * standard_normal(arm_streams_[j * n + i]);
        trace_.arm_regret[j] += arm_target_[j] - arm_mean;
        trace_.arm_realized_regret[j] += arm_target_[j] - arm_reward;
        if (learn) {
          update_estimate(players_[i].estimates, j, player_reward);
          update_estimate(arms_[j].estimates, i, arm_reward);
          if (trace_.estimate_updates) {
            trace_.estimate_updates->push_back({t, AgentKind::player, i, j, players_[i].estimates.est_means[j],
                                                players_[i].estimates.counts[j]});
            trace_.estimate_updates->push_back({t, AgentKind::arm, j, i, arms_[j].estimates.est_means[i],
                                                arms_[j].estimates.counts[i]});
          }
        }
      }
      trace_.player_regret[i] += player_target_[i] - player_mean;
      trace_.player_realized_regret[i] += player_target_[i] - player_reward;
    }
    for (int j = 0; j < k; ++j) {
      if (holder[j] == kUnmatched) {
        trace_.arm_regret[j] += arm_target_[j];
        trace_.arm_realized_regret[j] += arm_target_[j];
      }
    }

    trace_.total_collisions += out.collisions;
    if (is_exploration(phase)) trace_.exploration_collisions += out.collisions;
    trace_.rounds_played = t;

    if (trace_.rounds) {
      auto& log = *trace_.rounds;
      log.phase.push_back(phase);
      log.epoch.push_back(epoch);
      log.collisions.push_back(static_cast<std::uint8_t>(std::min(out.collisions, 255)));
      for (int i = 0; i < n; ++i) log.matching.push_back(static_cast<std::int16_t>(out.matching.arm_of(i)));
    }

    if (t % options_.checkpoint_stride == 0 || t == options_.horizon) {
      for (int i = 0; i < n; ++i) {
        trace_.checkpoints.push_back({t, epoch, phase, AgentKind::player, i + 1, out.matching.arm_of(i) + 1,
                                      trace_.player_regret[i]});
      }
      for (int j = 0; j < k; ++j) {
        trace_.checkpoints.push_back({t, epoch, phase, AgentKind::arm, j + 1, holder[j] + 1, trace_.arm_regret[j]});
      }
    }
    return out;
  }

 private:
  MarketInstance instance_;
  EngineOptions options_;
  StableBenchmarks bench_;
  std::vector<PlayerState> players_;
  std::vector<ArmState> arms_;
  std::vector<Rng> player_streams_;
  std::vector<Rng> arm_streams_;
  std::vector<double> player_target_;
  std::vector<double> arm_target_;
  std::vector<std::vector<int>> proposers_;
  std::int64_t played_ = 0;
  SimulationTrace trace_;
};

}  // namespace twosided
