#pragma once

// Text formats: instance documents, trace CSV and run metadata.
//
// Trace CSV (one file per run, long format, one row per agent per checkpoint):
//   round,epoch,phase,agent_kind,agent_id,matched_partner,cum_pseudo_regret
// agent ids are 1-based, matched_partner is the partner's 1-based id or 0 when
// unmatched, phase is one of index-estimation | explore | check | monitor |
// gale-shapley | committed, and regrets are printed with 17 significant digits.

#include <cstdint>
#include <cstdio>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>

#include "json.hpp"
#include "twosided/analysis.hpp"
#include "twosided/engine.hpp"
#include "twosided/error.hpp"
#include "twosided/market.hpp"
#include "twosided/protocols.hpp"

namespace twosided {

inline constexpr int kTraceSchemaVersion = 1;
inline constexpr std::string_view kTraceCsvHeader =
    "round,epoch,phase,agent_kind,agent_id,matched_partner,cum_pseudo_regret";

using ojson = nlohmann::ordered_json;

// %.17g: enough digits to round-trip any double.
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail {

inline void write_matrix(std::ostream& os, const std::vector<std::vector<double>>& rows) {
  os << "[";
  for (std::size_t r = 0; r < rows.size(); ++r) {
    os << (r ? ",\n    [" : "\n    [");
    for (std::size_t c = 0; c < rows[r].size(); ++c) os << (c ? ", " : "") << format_double(rows[r][c]);
    os << "]";
  }
  os << "\n  ]";
}

}  // namespace detail

// JSON document; means are printed with 17 significant digits so parsing it
// back reproduces the instance bit for bit.
inline std::string serialize_instance(const MarketInstance& m) {
  std::ostringstream os;
  os << "{\n"
     << "  \"n_players\": " << m.n_players() << ",\n"
     << "  \"n_arms\": " << m.n_arms() << ",\n"
     << "  \"noise_std\": " << format_double(m.noise_std()) << ",\n"
     << "  \"seed\": " << (m.seed() ? std::to_string(*m.seed()) : std::string("null")) << ",\n"
     << "  \"player_means\": ";
  detail::write_matrix(os, m.player_means());
  os << ",\n  \"arm_means\": ";
  detail::write_matrix(os, m.arm_means());
  os << "\n}\n";
  return os.str();
}

template <class Json>
MarketInstance instance_from_json(const Json& j) {
  try {
    std::optional<std::uint64_t> seed;
    if (j.contains("seed") && !j.at("seed").is_null()) seed = j.at("seed").template get<std::uint64_t>();
    MarketInstance m(j.at("player_means").template get<std::vector<std::vector<double>>>(),
                     j.at("arm_means").template get<std::vector<std::vector<double>>>(),
                     j.value("noise_std", 1.0), seed);
    if (j.contains("n_players") && j.at("n_players").template get<int>() != m.n_players()) {
      throw ConfigError("n_players does not match player_means");
    }
    if (j.contains("n_arms") && j.at("n_arms").template get<int>() != m.n_arms()) {
      throw ConfigError("n_arms does not match arm_means");
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed instance document: ") + e.what());
  }
}

inline MarketInstance parse_instance(std::string_view text) {
  try {
    return instance_from_json(nlohmann::json::parse(text));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("instance document is not valid JSON: ") + e.what());
  }
}

inline void write_trace_csv(std::ostream& os, const SimulationTrace& trace) {
  os << kTraceCsvHeader << '\n';
  for (const auto& r : trace.checkpoints) {
    os << r.round << ',' << r.epoch << ',' << phase_name(r.phase) << ',' << agent_kind_name(r.kind) << ','
       << r.agent_id << ',' << r.matched_partner << ',' << format_double(r.cum_pseudo_regret) << '\n';
  }
}

inline std::string trace_csv(const SimulationTrace& trace) {
  std::ostringstream os;
  write_trace_csv(os, trace);
  return os.str();
}

namespace detail {

inline ojson optional_json(const std::optional<std::int64_t>& v) { return v ? ojson(*v) : ojson(nullptr); }
inline ojson optional_json(const std::optional<int>& v) { return v ? ojson(*v) : ojson(nullptr); }

inline ojson flags_json(const std::vector<char>& flags) {
  ojson a = ojson::array();
  for (char f : flags) a.push_back(f != 0);
  return a;
}

}  // namespace detail

inline std::string_view arm_ranking_init_name(ArmRankingInit v) {
  return v == ArmRankingInit::random ? "random" : "identity";
}

inline std::string_view player_fallback_name(PlayerFallback v) {
  return v == PlayerFallback::empirical_means ? "empirical_means" : "fixed";
}

// Algorithm label as used in configs: ca_etc carries its schedule kind.
inline std::string algorithm_label(const RunConfig& c) {
  if (c.algorithm != Algorithm::ca_etc) return std::string(algorithm_name(c.algorithm));
  return c.schedule.kind() == ScheduleKind::exponential ? "ca_etc_exp" : "ca_etc_poly";
}

inline ojson run_config_json(const RunConfig& c) {
  ojson j;
  j["horizon"] = c.horizon;
  j["algorithm"] = algorithm_label(c);
  j["t0"] = c.schedule.t0();
  j["gamma"] = c.schedule.gamma();
  j["poly_exponent"] = c.schedule.poly_exponent() ? ojson(*c.schedule.poly_exponent()) : ojson(nullptr);
  j["seed"] = c.seed;
  j["checkpoint_stride"] = c.checkpoint_stride;
  j["arm_initial_ranking"] = arm_ranking_init_name(c.arm_initial_ranking);
  j["player_fallback"] = player_fallback_name(c.player_fallback);
  j["learn_in_commit"] = c.learn_in_commit;
  j["debug_snapshots"] = c.debug_snapshots;
  return j;
}

// Run metadata: configuration, instance, commit markers, per-epoch check
// outcomes and final regrets. Contains nothing time- or host-dependent.
inline ojson run_metadata(const RunConfig& config, const MarketInstance& m, const SimulationTrace& trace) {
  ojson meta;
  meta["schema_version"] = kTraceSchemaVersion;
  meta["algorithm"] = algorithm_label(config);
  meta["run"] = run_config_json(config);
  meta["instance"] = ojson::parse(serialize_instance(m));

  const auto gaps = compute_gaps(m);
  ojson theory;
  theory["universal_gap"] = gaps.universal_gap;
  if (std::isfinite(gaps.universal_gap) && config.horizon > 1) {
    TheoryInputs in{m.n_players(), m.n_arms(), static_cast<double>(config.horizon),
                    static_cast<double>(config.schedule.t0()), config.schedule.gamma(), gaps.universal_gap};
    theory["l_max_exp"] = l_max_exp(in);
    theory["l_max_poly"] = l_max_poly(in);
    theory["samples_threshold"] = samples_threshold(gaps.universal_gap, static_cast<double>(config.horizon));
    if (config.horizon > m.n_players()) {
      theory["t0_min"] = t0_min(in);
      theory["t0_feasible"] = t0_feasible(in.t0, in);
    }
  }
  meta["theory"] = theory;

  ojson commit;
  commit["round"] = detail::optional_json(trace.commit_round);
  commit["epoch"] = detail::optional_json(trace.commit_epoch);
  commit["true_rankings"] = trace.committed_true;
  meta["commit"] = commit;

  ojson players = ojson::array();
  for (int i = 0; i < m.n_players(); ++i) {
    ojson p;
    p["id"] = i + 1;
    p["index"] = i < static_cast<int>(trace.indices.size()) && trace.indices[i] >= 0 ? ojson(trace.indices[i] + 1)
                                                                                     : ojson(nullptr);
    p["first_pass_round"] = detail::optional_json(trace.player_commit[i].first_pass_round);
    p["first_pass_epoch"] = detail::optional_json(trace.player_commit[i].first_pass_epoch);
    p["cum_pseudo_regret"] = trace.player_regret[i];
    p["cum_realized_regret"] = trace.player_realized_regret[i];
    p["max_regret"] = gaps.player_max_regret[i];
    players.push_back(p);
  }
  ojson arms = ojson::array();
  for (int j = 0; j < m.n_arms(); ++j) {
    ojson a;
    a["id"] = j + 1;
    a["first_pass_round"] = detail::optional_json(trace.arm_commit[j].first_pass_round);
    a["first_pass_epoch"] = detail::optional_json(trace.arm_commit[j].first_pass_epoch);
    a["cum_pseudo_regret"] = trace.arm_regret[j];
    a["cum_realized_regret"] = trace.arm_realized_regret[j];
    a["max_regret"] = gaps.arm_max_regret[j];
    arms.push_back(a);
  }
  meta["players"] = players;
  meta["arms"] = arms;

  ojson epochs = ojson::array();
  for (const auto& e : trace.epochs) {
    ojson r;
    r["epoch"] = e.epoch;
    r["start_round"] = e.start_round;
    r["explore_rounds"] = e.explore_rounds;
    r["check_round"] = e.check_round > 0 ? ojson(e.check_round) : ojson(nullptr);
    r["end_round"] = e.end_round;
    r["player_passed"] = detail::flags_json(e.player_passed);
    r["arm_passed"] = detail::flags_json(e.arm_passed);
    r["all_passed"] = e.all_passed;
    r["all_true"] = e.all_true;
    if (e.monitor_matches >= 0) r["monitor_matches"] = e.monitor_matches;
    epochs.push_back(r);
  }
  meta["epochs"] = epochs;
  meta["rounds_played"] = trace.rounds_played;
  meta["collisions"] = {{"exploration", trace.exploration_collisions}, {"total", trace.total_collisions}};
  meta["cursor_overruns"] = trace.cursor_overruns;
  meta["warnings"] = trace.warnings;
  if (trace.estimate_updates) {
    const auto log = bad_event_monitor(trace, m);
    meta["bad_events"] = {{"player", log.player_count},
                          {"arm", log.arm_count},
                          {"bound_nk_pi2_over_3", bad_event_bound(m.n_players(), m.n_arms())}};
  }
  return meta;
}

}  // namespace twosided
