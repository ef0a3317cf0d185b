#pragma once

// Per-agent learning state shared by players and arms: running means, visit
// counts and confidence bounds over the other side, plus the ranking rules
// used to propose and to accept.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "twosided/error.hpp"
#include "twosided/market.hpp"

namespace twosided {

inline constexpr int kUnsetIndex = -1;

struct ConfidenceInterval {
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
};

// Estimates over the alternatives on the other side of the market.
struct EstimateTable {
  std::vector<double> est_means;
  std::vector<std::int64_t> counts;
  std::vector<double> ucb;
  std::vector<double> lcb;

  EstimateTable() = default;
  explicit EstimateTable(int alternatives)
      : est_means(static_cast<std::size_t>(alternatives), 0.0),
        counts(static_cast<std::size_t>(alternatives), 0),
        ucb(static_cast<std::size_t>(alternatives), std::numeric_limits<double>::infinity()),
        lcb(static_cast<std::size_t>(alternatives), -std::numeric_limits<double>::infinity()) {}

  int size() const noexcept { return static_cast<int>(est_means.size()); }
  ConfidenceInterval interval(int alt) const { return {lcb[alt], ucb[alt]}; }
};

struct PlayerState {
  int index = kUnsetIndex;  // 0-based slot from index estimation
  EstimateTable estimates;  // over arms
  std::optional<Ranking> learned_ranking;
  Ranking commit_ranking;
  int gs_cursor = 1;  // 1-based position in commit_ranking

  PlayerState() = default;
  explicit PlayerState(int n_arms) : estimates(n_arms), commit_ranking(static_cast<std::size_t>(n_arms)) {
    std::iota(commit_ranking.begin(), commit_ranking.end(), 0);
  }
};

struct ArmState {
  EstimateTable estimates;  // over players
  Ranking initial_ranking;
  std::optional<Ranking> learned_ranking;

  ArmState() = default;
  ArmState(int n_players, Ranking initial) : estimates(n_players), initial_ranking(std::move(initial)) {}

  const Ranking& commit_ranking() const noexcept {
    return learned_ranking ? *learned_ranking : initial_ranking;
  }
};

// Running mean as (mean * count + reward) / (count + 1).
inline void update_estimate(EstimateTable& table, int partner, double reward) {
  if (partner < 0 || partner >= table.size()) throw DimensionError("estimate update for unknown partner");
  auto& mean = table.est_means[partner];
  auto& count = table.counts[partner];
  mean = (mean * static_cast<double>(count) + reward) / static_cast<double>(count + 1);
  ++count;
}

inline double confidence_radius(std::int64_t round, std::int64_t count) {
  return std::sqrt(2.0 * std::log(static_cast<double>(round)) / static_cast<double>(count));
}

// UCB/LCB = mean +- sqrt(2 ln t / count); unvisited alternatives keep +-inf.
inline void confidence_bounds(EstimateTable& table, std::int64_t round) {
  if (round < 2) throw ConfigError("confidence bounds need round >= 2");
  for (int a = 0; a < table.size(); ++a) {
    if (table.counts[a] == 0) {
      table.ucb[a] = std::numeric_limits<double>::infinity();
      table.lcb[a] = -std::numeric_limits<double>::infinity();
      continue;
    }
    const double w = confidence_radius(round, table.counts[a]);
    table.ucb[a] = table.est_means[a] + w;
    table.lcb[a] = table.est_means[a] - w;
  }
}

// Ranking by decreasing empirical mean, ties broken by lower index.
inline Ranking empirical_ranking(const EstimateTable& table) {
  Ranking order(static_cast<std::size_t>(table.size()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return table.est_means[a] > table.est_means[b]; });
  return order;
}

// Returns the mean-sorted ranking iff every adjacent pair has disjoint
// intervals (LCB of rank k strictly above UCB of rank k+1). If any
// permutation has that property it is this one, so no search is needed.
inline std::optional<Ranking> preference_check(const EstimateTable& table) {
  for (auto c : table.counts) {
    if (c == 0) return std::nullopt;
  }
  Ranking order = empirical_ranking(table);
  for (std::size_t r = 0; r + 1 < order.size(); ++r) {
    if (!(table.lcb[order[r]] > table.ucb[order[r + 1]])) return std::nullopt;
  }
  return order;
}

// Round-robin target for a player with 0-based slot `index` at exploration
// step t >= 1: arm (index + t - 1) mod k. Distinct slots never collide.
inline int exploration_target(int index, std::int64_t t, int k) {
  return static_cast<int>((static_cast<std::int64_t>(index) + t - 1) % k);
}

// The proposer ranked highest in `ranking`, or kUnmatched for no proposers.
inline int resolve_proposals(const Ranking& ranking, std::span<const int> proposers) {
  if (proposers.empty()) return kUnmatched;
  int best = kUnmatched;
  std::size_t best_rank = ranking.size();
  for (int p : proposers) {
    const auto it = std::find(ranking.begin(), ranking.end(), p);
    const auto r = static_cast<std::size_t>(it - ranking.begin());
    if (r < best_rank) {
      best_rank = r;
      best = p;
    }
  }
  return best;
}

inline int resolve_proposals(const ArmState& arm, std::span<const int> proposers) {
  return resolve_proposals(arm.commit_ranking(), proposers);
}

}  // namespace twosided
