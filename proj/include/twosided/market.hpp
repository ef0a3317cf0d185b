#pragma once

// Ground-truth two-sided market: mean matrices on both sides, stable-matching
// oracles, gaps and per-round pseudo-regret.
//
// Indexing is 0-based throughout the library. Player i and arm j refer to
// rows of player_means / arm_means respectively.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "twosided/error.hpp"
#include "twosided/rng.hpp"

namespace twosided {

inline constexpr int kUnmatched = -1;

// A strict preference order: ranking[0] is the most preferred alternative.
using Ranking = std::vector<int>;

enum class Side { players, arms };

class MarketInstance {
 public:
  MarketInstance() = default;

  // player_means is N x K (player i over arms), arm_means is K x N (arm j over
  // players). Throws ConfigError for N > K or ragged input, TieError when a
  // row repeats a value.
  MarketInstance(std::vector<std::vector<double>> player_means,
                 std::vector<std::vector<double>> arm_means, double noise_std = 1.0,
                 std::optional<std::uint64_t> seed = std::nullopt)
      : player_means_(std::move(player_means)),
        arm_means_(std::move(arm_means)),
        noise_std_(noise_std),
        seed_(seed) {
    n_players_ = static_cast<int>(player_means_.size());
    n_arms_ = static_cast<int>(arm_means_.size());
    if (n_players_ < 1 || n_arms_ < 1) throw ConfigError("market needs at least one player and one arm");
    if (n_players_ > n_arms_) throw ConfigError("market requires n_players <= n_arms");
    if (!(noise_std_ >= 0.0) || !std::isfinite(noise_std_)) throw ConfigError("noise_std must be finite and >= 0");
    for (const auto& row : player_means_) {
      if (static_cast<int>(row.size()) != n_arms_) throw ConfigError("player_means must be N x K");
      check_row(row, "player");
    }
    for (const auto& row : arm_means_) {
      if (static_cast<int>(row.size()) != n_players_) throw ConfigError("arm_means must be K x N");
      check_row(row, "arm");
    }
  }

  int n_players() const noexcept { return n_players_; }
  int n_arms() const noexcept { return n_arms_; }
  double noise_std() const noexcept { return noise_std_; }
  std::optional<std::uint64_t> seed() const noexcept { return seed_; }

  // mu^{(i)}_j
  double player_mean(int player, int arm) const { return player_means_[player][arm]; }
  // eta^{(j)}_i
  double arm_mean(int arm, int player) const { return arm_means_[arm][player]; }

  const std::vector<std::vector<double>>& player_means() const noexcept { return player_means_; }
  const std::vector<std::vector<double>>& arm_means() const noexcept { return arm_means_; }

  bool operator==(const MarketInstance&) const = default;

 private:
  static void check_row(const std::vector<double>& row, const char* side) {
    std::vector<double> sorted(row);
    std::sort(sorted.begin(), sorted.end());
    for (double v : sorted) {
      if (!std::isfinite(v)) throw ConfigError(std::string(side) + " means must be finite");
    }
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      throw TieError(std::string(side) + " preference row contains a tie");
    }
  }

  int n_players_ = 0;
  int n_arms_ = 0;
  std::vector<std::vector<double>> player_means_;
  std::vector<std::vector<double>> arm_means_;
  double noise_std_ = 1.0;
  std::optional<std::uint64_t> seed_;
};

struct Matching {
  std::vector<int> player_to_arm;

  Matching() = default;
  explicit Matching(int n_players) : player_to_arm(static_cast<std::size_t>(n_players), kUnmatched) {}
  explicit Matching(std::vector<int> assignment) : player_to_arm(std::move(assignment)) {}

  int n_players() const noexcept { return static_cast<int>(player_to_arm.size()); }
  int arm_of(int player) const { return player_to_arm[player]; }

  std::vector<int> arm_to_player(int n_arms) const {
    std::vector<int> inverse(static_cast<std::size_t>(n_arms), kUnmatched);
    for (int i = 0; i < n_players(); ++i) {
      if (player_to_arm[i] != kUnmatched) inverse[player_to_arm[i]] = i;
    }
    return inverse;
  }

  // Entries in range and no arm used twice.
  bool well_formed(int n_arms) const {
    std::vector<char> used(static_cast<std::size_t>(n_arms), 0);
    for (int a : player_to_arm) {
      if (a == kUnmatched) continue;
      if (a < 0 || a >= n_arms || used[a]) return false;
      used[a] = 1;
    }
    return true;
  }

  auto operator<=>(const Matching&) const = default;
};

// How means are drawn by sample_market.
enum class MeanSampling {
  // i.i.d. uniform on (0, 1), redrawn on within-row duplicates.
  uniform,
  // Drawn without replacement from {1/(L+1), ..., L/(L+1)} with L = grid_levels,
  // so every row has gaps of at least 1/(L+1).
  grid,
};

struct SamplingOptions {
  MeanSampling kind = MeanSampling::uniform;
  int grid_levels = 9;
  int max_retries = 64;
};

namespace detail {

inline bool has_duplicate(std::vector<double> row) {
  std::sort(row.begin(), row.end());
  return std::adjacent_find(row.begin(), row.end()) != row.end();
}

inline std::vector<double> sample_row(Rng& rng, int length, const SamplingOptions& opts) {
  std::vector<double> row(static_cast<std::size_t>(length));
  if (opts.kind == MeanSampling::uniform) {
    for (int attempt = 0; attempt < opts.max_retries; ++attempt) {
      for (auto& v : row) v = uniform_open01(rng);
      if (!has_duplicate(row)) return row;
    }
    throw DegenerateInstanceError("could not draw a row of distinct means");
  }
  // Partial Fisher-Yates over the grid, driven by raw engine output so the
  // draw sequence does not depend on the standard library.
  std::vector<int> levels(static_cast<std::size_t>(opts.grid_levels));
  std::iota(levels.begin(), levels.end(), 1);
  for (int k = 0; k < length; ++k) {
    const auto span = static_cast<std::uint64_t>(opts.grid_levels - k);
    const auto pick = k + static_cast<int>(rng() % span);
    std::swap(levels[k], levels[pick]);
    row[k] = static_cast<double>(levels[k]) / static_cast<double>(opts.grid_levels + 1);
  }
  return row;
}

}  // namespace detail

// Seeded random market. Deterministic in (n, k, noise_std, seed, opts).
inline MarketInstance sample_market(int n, int k, double noise_std, std::uint64_t seed,
                                    const SamplingOptions& opts = {}) {
  if (n < 1 || k < 1) throw ConfigError("market dimensions must be positive");
  if (n > k) throw ConfigError("market requires n_players <= n_arms");
  if (!(noise_std >= 0.0)) throw ConfigError("noise_std must be >= 0");
  if (opts.kind == MeanSampling::grid && opts.grid_levels < k) {
    throw ConfigError("grid sampling needs at least max(N, K) levels");
  }
  Rng rng(mix_seed(seed, seed_domain::instance));
  std::vector<std::vector<double>> player_means;
  std::vector<std::vector<double>> arm_means;
  for (int i = 0; i < n; ++i) player_means.push_back(detail::sample_row(rng, k, opts));
  for (int j = 0; j < k; ++j) arm_means.push_back(detail::sample_row(rng, n, opts));
  return MarketInstance(std::move(player_means), std::move(arm_means), noise_std, seed);
}

// Indices sorted by strictly decreasing value. Throws TieError on duplicates.
inline Ranking true_ranking(std::span<const double> values) {
  Ranking order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return values[a] > values[b]; });
  for (std::size_t r = 1; r < order.size(); ++r) {
    if (values[order[r - 1]] == values[order[r]]) throw TieError("ranking requested over tied values");
  }
  return order;
}

inline std::vector<Ranking> true_player_rankings(const MarketInstance& m) {
  std::vector<Ranking> out;
  for (const auto& row : m.player_means()) out.push_back(true_ranking(row));
  return out;
}

inline std::vector<Ranking> true_arm_rankings(const MarketInstance& m) {
  std::vector<Ranking> out;
  for (const auto& row : m.arm_means()) out.push_back(true_ranking(row));
  return out;
}

namespace detail {

inline void check_permutations(const std::vector<Ranking>& prefs, int size, const char* what) {
  for (const auto& p : prefs) {
    if (static_cast<int>(p.size()) != size) {
      throw MalformedPreferencesError(std::string(what) + " preference list has wrong length");
    }
    std::vector<char> seen(static_cast<std::size_t>(size), 0);
    for (int x : p) {
      if (x < 0 || x >= size || seen[x]) {
        throw MalformedPreferencesError(std::string(what) + " preference list is not a permutation");
      }
      seen[x] = 1;
    }
  }
}

// rank[a][b] = position of b in a's list.
inline std::vector<std::vector<int>> rank_table(const std::vector<Ranking>& prefs) {
  std::vector<std::vector<int>> rank(prefs.size());
  for (std::size_t a = 0; a < prefs.size(); ++a) {
    rank[a].assign(prefs[a].size(), 0);
    for (std::size_t r = 0; r < prefs[a].size(); ++r) rank[a][prefs[a][r]] = static_cast<int>(r);
  }
  return rank;
}

// Deferred acceptance with `proposer_prefs` proposing. Returns proposer -> receiver.
inline std::vector<int> deferred_acceptance(const std::vector<Ranking>& proposer_prefs,
                                            const std::vector<Ranking>& receiver_prefs) {
  const int n_prop = static_cast<int>(proposer_prefs.size());
  const int n_recv = static_cast<int>(receiver_prefs.size());
  const auto rank = rank_table(receiver_prefs);
  std::vector<int> next(static_cast<std::size_t>(n_prop), 0);
  std::vector<int> held(static_cast<std::size_t>(n_recv), kUnmatched);
  std::vector<int> free_list(static_cast<std::size_t>(n_prop));
  std::iota(free_list.rbegin(), free_list.rend(), 0);
  while (!free_list.empty()) {
    const int p = free_list.back();
    if (next[p] >= n_recv) {
      free_list.pop_back();  // exhausted its list; stays unmatched
      continue;
    }
    const int r = proposer_prefs[p][next[p]++];
    const int cur = held[r];
    if (cur == kUnmatched) {
      held[r] = p;
      free_list.pop_back();
    } else if (rank[r][p] < rank[r][cur]) {
      held[r] = p;
      free_list.back() = cur;
    }
  }
  std::vector<int> out(static_cast<std::size_t>(n_prop), kUnmatched);
  for (int r = 0; r < n_recv; ++r) {
    if (held[r] != kUnmatched) out[held[r]] = r;
  }
  return out;
}

}  // namespace detail

// Gale-Shapley on complete strict lists. player_prefs[i] ranks arms,
// arm_prefs[j] ranks players. The result is optimal for the proposing side and
// pessimal for the other.
inline Matching gale_shapley(const std::vector<Ranking>& player_prefs,
                             const std::vector<Ranking>& arm_prefs, Side proposing) {
  const int n = static_cast<int>(player_prefs.size());
  const int k = static_cast<int>(arm_prefs.size());
  detail::check_permutations(player_prefs, k, "player");
  detail::check_permutations(arm_prefs, n, "arm");
  if (proposing == Side::players) return Matching(detail::deferred_acceptance(player_prefs, arm_prefs));
  const auto arm_to_player = detail::deferred_acceptance(arm_prefs, player_prefs);
  Matching m(n);
  for (int j = 0; j < k; ++j) {
    if (arm_to_player[j] != kUnmatched) m.player_to_arm[arm_to_player[j]] = j;
  }
  return m;
}

inline Matching gale_shapley(const MarketInstance& m, Side proposing) {
  return gale_shapley(true_player_rankings(m), true_arm_rankings(m), proposing);
}

// True iff no pair (i, j) blocks. Unmatched agents value their (non-)partner at -inf.
inline bool is_stable(const Matching& matching, const MarketInstance& m) {
  if (matching.n_players() != m.n_players() || !matching.well_formed(m.n_arms())) {
    throw DimensionError("matching does not fit the market");
  }
  constexpr double kNone = -std::numeric_limits<double>::infinity();
  const auto holder = matching.arm_to_player(m.n_arms());
  for (int i = 0; i < m.n_players(); ++i) {
    const int cur = matching.arm_of(i);
    const double mine = cur == kUnmatched ? kNone : m.player_mean(i, cur);
    for (int j = 0; j < m.n_arms(); ++j) {
      if (!(m.player_mean(i, j) > mine)) continue;
      const double theirs = holder[j] == kUnmatched ? kNone : m.arm_mean(j, holder[j]);
      if (m.arm_mean(j, i) > theirs) return false;
    }
  }
  return true;
}

inline constexpr int kEnumerationMaxArms = 8;

// Every stable matching that matches all N players, in lexicographic order.
// With N <= K and complete lists no stable matching leaves a player unmatched.
inline std::vector<Matching> enumerate_stable_matchings(const MarketInstance& m) {
  if (m.n_arms() > kEnumerationMaxArms) throw SizeLimitError("stable-matching enumeration limited to K <= 8");
  std::vector<Matching> out;
  Matching current(m.n_players());
  std::vector<char> used(static_cast<std::size_t>(m.n_arms()), 0);
  auto recurse = [&](auto&& self, int player) -> void {
    if (player == m.n_players()) {
      if (is_stable(current, m)) out.push_back(current);
      return;
    }
    for (int j = 0; j < m.n_arms(); ++j) {
      if (used[j]) continue;
      used[j] = 1;
      current.player_to_arm[player] = j;
      self(self, player + 1);
      used[j] = 0;
    }
    current.player_to_arm[player] = kUnmatched;
  };
  recurse(recurse, 0);
  return out;
}

// Player-optimal (= arm-pessimal) and player-pessimal (= arm-optimal) stable matchings.
struct StableBenchmarks {
  Matching player_optimal;
  Matching player_pessimal;

  explicit StableBenchmarks(const MarketInstance& m)
      : player_optimal(gale_shapley(m, Side::players)),
        player_pessimal(gale_shapley(m, Side::arms)) {}

  const Matching& arm_pessimal() const noexcept { return player_optimal; }
  const Matching& arm_optimal() const noexcept { return player_pessimal; }
};

struct GapSummary {
  std::vector<double> player_gaps;
  std::vector<double> arm_gaps;
  double universal_gap = std::numeric_limits<double>::infinity();
  // mu^{(i)} of the player-optimal partner.
  std::vector<double> player_max_regret;
  // eta^{(j)} of the arm-pessimal partner; 0 for arms unmatched there.
  std::vector<double> arm_max_regret;
};

// Minimum adjacent difference of the sorted row; +inf for rows shorter than 2.
inline double row_gap(std::span<const double> row) {
  std::vector<double> sorted(row.begin(), row.end());
  std::sort(sorted.begin(), sorted.end());
  double gap = std::numeric_limits<double>::infinity();
  for (std::size_t r = 1; r < sorted.size(); ++r) {
    if (sorted[r] == sorted[r - 1]) throw TieError("gap requested over tied values");
    gap = std::min(gap, sorted[r] - sorted[r - 1]);
  }
  return gap;
}

inline GapSummary compute_gaps(const MarketInstance& m) {
  GapSummary g;
  for (const auto& row : m.player_means()) g.player_gaps.push_back(row_gap(row));
  for (const auto& row : m.arm_means()) g.arm_gaps.push_back(row_gap(row));
  for (double v : g.player_gaps) g.universal_gap = std::min(g.universal_gap, v);
  for (double v : g.arm_gaps) g.universal_gap = std::min(g.universal_gap, v);
  const StableBenchmarks bench(m);
  const auto holder = bench.arm_pessimal().arm_to_player(m.n_arms());
  for (int i = 0; i < m.n_players(); ++i) {
    g.player_max_regret.push_back(m.player_mean(i, bench.player_optimal.arm_of(i)));
  }
  for (int j = 0; j < m.n_arms(); ++j) {
    g.arm_max_regret.push_back(holder[j] == kUnmatched ? 0.0 : m.arm_mean(j, holder[j]));
  }
  return g;
}

enum class Benchmark { player_optimal, player_pessimal, arm_optimal, arm_pessimal };

// Expected-reward regret of one round against a stable benchmark. Player
// benchmarks return N values, arm benchmarks K values. Unmatched agents earn 0;
// an arm with no partner in the benchmark has benchmark value 0.
inline std::vector<double> pseudo_regret_step(const MarketInstance& m, const StableBenchmarks& bench,
                                              const Matching& matching, Benchmark which) {
  if (matching.n_players() != m.n_players() || !matching.well_formed(m.n_arms())) {
    throw DimensionError("matching does not fit the market");
  }
  std::vector<double> out;
  if (which == Benchmark::player_optimal || which == Benchmark::player_pessimal) {
    const Matching& ref = which == Benchmark::player_optimal ? bench.player_optimal : bench.player_pessimal;
    for (int i = 0; i < m.n_players(); ++i) {
      const double target = m.player_mean(i, ref.arm_of(i));
      const int a = matching.arm_of(i);
      out.push_back(target - (a == kUnmatched ? 0.0 : m.player_mean(i, a)));
    }
    return out;
  }
  const Matching& ref = which == Benchmark::arm_pessimal ? bench.arm_pessimal() : bench.arm_optimal();
  const auto ref_holder = ref.arm_to_player(m.n_arms());
  const auto holder = matching.arm_to_player(m.n_arms());
  for (int j = 0; j < m.n_arms(); ++j) {
    const double target = ref_holder[j] == kUnmatched ? 0.0 : m.arm_mean(j, ref_holder[j]);
    out.push_back(target - (holder[j] == kUnmatched ? 0.0 : m.arm_mean(j, holder[j])));
  }
  return out;
}

}  // namespace twosided
