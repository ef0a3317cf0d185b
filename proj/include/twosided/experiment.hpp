#pragma once

// Experiment configs: a JSON document describing a market, a run and an
// optional sweep, expanded into independent cells.
//
//   {
//     "seed": 42,
//     "market": {"n_players": 5, "n_arms": 5, "noise_std": 1.0, "sampling": "uniform"},
//     "run": {"horizon": 1000000, "algorithm": "ca_etc_exp", "t0": 500, "gamma": 0.4},
//     "sweep": {"seeds": [1, 2], "algorithms": ["ca_etc_exp", "etgs_blackboard"]},
//     "output_dir": "out"
//   }
//
// The market is either sampled ("n_players", "n_arms", "noise_std", "sampling",
// "grid_levels") or given explicitly ("instance": {...} inline, or
// "instance_file": path relative to the config). Cell seeds: from master seed s
// the instance is sampled with seed s (stream mix_seed(s, 1)) and the run uses
// mix_seed(s, 2), so cells that differ only in algorithm, gamma or T0 share the
// same instance.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "twosided/error.hpp"
#include "twosided/io.hpp"
#include "twosided/market.hpp"
#include "twosided/protocols.hpp"
#include "twosided/rng.hpp"

namespace twosided {

struct MarketSpec {
  int n_players = 5;
  int n_arms = 5;
  double noise_std = 1.0;
  SamplingOptions sampling{};
  std::optional<MarketInstance> instance;  // explicit matrices win over sampling
};

struct SweepSpec {
  std::vector<std::uint64_t> seeds;
  std::vector<double> gammas;
  std::vector<std::int64_t> t0s;
  std::vector<std::string> algorithms;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  MarketSpec market;
  RunConfig run;                           // seed field ignored unless run_seed is set
  std::optional<std::uint64_t> run_seed;   // explicit override of the derived run seed
  std::optional<double> poly_exponent;
  std::string algorithm = "ca_etc_exp";
  std::optional<SweepSpec> sweep;
  std::string output_dir;
};

struct Cell {
  std::string name;  // unique within a config; used for file names
  std::string algorithm;
  std::uint64_t master_seed = 0;
  MarketInstance instance;
  RunConfig run;
};

// Algorithm label -> (algorithm, schedule kind).
inline void apply_algorithm(RunConfig& run, std::string_view label, std::optional<double> poly_exponent) {
  const auto t0 = run.schedule.t0();
  const auto gamma = run.schedule.gamma();
  if (label == "etgs_blackboard") {
    run.algorithm = Algorithm::etgs_blackboard;
  } else if (label == "broadcast_etgs") {
    run.algorithm = Algorithm::broadcast_etgs;
  } else if (label == "ca_etc_exp" || label == "ca_etc") {
    run.algorithm = Algorithm::ca_etc;
    run.schedule = EpochSchedule(ScheduleKind::exponential, t0, gamma);
  } else if (label == "ca_etc_poly") {
    run.algorithm = Algorithm::ca_etc;
    run.schedule = EpochSchedule(ScheduleKind::polynomial, t0, gamma, poly_exponent);
  } else {
    throw ConfigError("unknown algorithm '" + std::string(label) +
                      "' (expected etgs_blackboard, broadcast_etgs, ca_etc_exp, ca_etc_poly)");
  }
}

namespace detail {

// Line of the first occurrence of "key" in the source text; 0 if absent.
inline std::size_t locate_key(std::string_view text, std::string_view key) {
  const std::string quoted = "\"" + std::string(key) + "\"";
  const auto pos = text.find(quoted);
  if (pos == std::string_view::npos) return 0;
  std::size_t line = 1;
  for (std::size_t i = 0; i < pos; ++i) line += text[i] == '\n';
  return line;
}

class ConfigReader {
 public:
  ConfigReader(std::string_view text, std::string source) : text_(text), source_(std::move(source)) {}

  [[noreturn]] void fail(std::string_view key, const std::string& msg) const {
    std::string where = source_;
    if (const auto line = locate_key(text_, key)) where += ":" + std::to_string(line);
    throw ConfigError(where + ": " + std::string(key) + ": " + msg);
  }

  void check_keys(const nlohmann::json& obj, std::string_view section, std::initializer_list<std::string_view> allowed) const {
    if (!obj.is_object()) fail(section, "expected an object");
    for (const auto& [k, v] : obj.items()) {
      bool ok = false;
      for (auto a : allowed) ok = ok || a == k;
      if (!ok) fail(k, "unknown key in '" + std::string(section) + "'");
    }
  }

  template <class T>
  T get(const nlohmann::json& obj, std::string_view key, T fallback) const {
    const std::string k(key);
    if (!obj.contains(k) || obj.at(k).is_null()) return fallback;
    return convert<T>(obj.at(k), key);
  }

  template <class T>
  T convert(const nlohmann::json& v, std::string_view key) const {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) fail(key, "expected true or false");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) fail(key, "expected an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (v.is_number_integer() && !v.is_number_unsigned() && v.template get<std::int64_t>() < 0) {
          fail(key, "expected a non-negative integer");
        }
      }
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) fail(key, "expected a number");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) fail(key, "expected a string");
    }
    return v.template get<T>();
  }

  template <class T>
  std::vector<T> list(const nlohmann::json& obj, std::string_view key) const {
    const std::string k(key);
    std::vector<T> out;
    if (!obj.contains(k)) return out;
    const auto& arr = obj.at(k);
    if (!arr.is_array()) fail(key, "expected an array");
    if (arr.empty()) fail(key, "must not be empty");
    for (const auto& v : arr) out.push_back(convert<T>(v, key));
    return out;
  }

  const std::string& source() const { return source_; }

 private:
  std::string_view text_;
  std::string source_;
};

inline std::string line_col_message(std::string_view text, std::size_t byte, const std::string& what) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  // nlohmann reports the position after the offending character.
  if (col > 1) --col;
  return std::to_string(line) + ":" + std::to_string(col) + ": " + what;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ConfigError(p.string() + ": cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace detail

// Parses a config document. Run-metadata documents are accepted too: their
// "config" member is a single-cell config that reproduces the run.
// base_dir resolves relative instance_file paths.
inline ExperimentConfig parse_experiment_config(std::string_view text, const std::string& source = "<config>",
                                                const std::filesystem::path& base_dir = {}) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(source + ":" + detail::line_col_message(text, e.byte, "invalid JSON"));
  }
  if (doc.is_object() && doc.contains("schema_version") && doc.contains("config")) doc = doc.at("config");

  const detail::ConfigReader r(text, source);
  r.check_keys(doc, "config", {"seed", "market", "run", "sweep", "output_dir"});

  ExperimentConfig cfg;
  cfg.seed = r.get<std::uint64_t>(doc, "seed", 0);
  cfg.output_dir = r.get<std::string>(doc, "output_dir", "");

  const nlohmann::json market = doc.contains("market") ? doc.at("market") : nlohmann::json::object();
  r.check_keys(market, "market",
               {"n_players", "n_arms", "noise_std", "sampling", "grid_levels", "instance", "instance_file"});
  if (market.contains("instance") || market.contains("instance_file")) {
    if (market.contains("instance") && market.contains("instance_file")) {
      r.fail("instance_file", "give either 'instance' or 'instance_file', not both");
    }
    try {
      if (market.contains("instance")) {
        cfg.market.instance = instance_from_json(market.at("instance"));
      } else {
        const auto path = base_dir / r.get<std::string>(market, "instance_file", "");
        cfg.market.instance = parse_instance(detail::read_file(path));
      }
    } catch (const std::invalid_argument& e) {
      r.fail(market.contains("instance") ? "instance" : "instance_file", e.what());
    }
    cfg.market.n_players = cfg.market.instance->n_players();
    cfg.market.n_arms = cfg.market.instance->n_arms();
    cfg.market.noise_std = cfg.market.instance->noise_std();
  } else {
    cfg.market.n_players = r.get<int>(market, "n_players", 5);
    cfg.market.n_arms = r.get<int>(market, "n_arms", 5);
    cfg.market.noise_std = r.get<double>(market, "noise_std", 1.0);
    const auto sampling = r.get<std::string>(market, "sampling", "uniform");
    if (sampling == "uniform") {
      cfg.market.sampling.kind = MeanSampling::uniform;
    } else if (sampling == "grid") {
      cfg.market.sampling.kind = MeanSampling::grid;
    } else {
      r.fail("sampling", "expected 'uniform' or 'grid'");
    }
    cfg.market.sampling.grid_levels = r.get<int>(market, "grid_levels", 9);
    if (cfg.market.n_players < 1) r.fail("n_players", "must be positive");
    if (cfg.market.n_arms < cfg.market.n_players) r.fail("n_arms", "must be >= n_players");
    if (!(cfg.market.noise_std >= 0.0)) r.fail("noise_std", "must be >= 0");
    if (cfg.market.sampling.kind == MeanSampling::grid && cfg.market.sampling.grid_levels < cfg.market.n_arms) {
      r.fail("grid_levels", "must be >= n_arms");
    }
  }

  const nlohmann::json run = doc.contains("run") ? doc.at("run") : nlohmann::json::object();
  r.check_keys(run, "run",
               {"horizon", "algorithm", "t0", "gamma", "poly_exponent", "seed", "checkpoint_stride",
                "arm_initial_ranking", "player_fallback", "learn_in_commit", "debug_snapshots"});
  cfg.run.horizon = r.get<std::int64_t>(run, "horizon", 1'000'000);
  if (cfg.run.horizon < 1) r.fail("horizon", "must be positive");
  const auto t0 = r.get<std::int64_t>(run, "t0", 500);
  const auto gamma = r.get<double>(run, "gamma", 0.4);
  if (t0 < 1) r.fail("t0", "must be a positive integer");
  if (!(gamma > 0.0 && gamma < 1.0)) r.fail("gamma", "must lie in (0, 1)");
  if (run.contains("poly_exponent") && !run.at("poly_exponent").is_null()) {
    cfg.poly_exponent = r.get<double>(run, "poly_exponent", 0.0);
    if (!(*cfg.poly_exponent >= 2.0)) r.fail("poly_exponent", "must be >= 2");
  }
  cfg.run.schedule = EpochSchedule(ScheduleKind::exponential, t0, gamma);
  if (run.contains("seed")) cfg.run_seed = r.get<std::uint64_t>(run, "seed", 0);
  cfg.run.checkpoint_stride = r.get<std::int64_t>(run, "checkpoint_stride", 1000);
  if (cfg.run.checkpoint_stride < 1) r.fail("checkpoint_stride", "must be positive");
  const auto arm_init = r.get<std::string>(run, "arm_initial_ranking", "random");
  if (arm_init == "random") {
    cfg.run.arm_initial_ranking = ArmRankingInit::random;
  } else if (arm_init == "identity") {
    cfg.run.arm_initial_ranking = ArmRankingInit::identity;
  } else {
    r.fail("arm_initial_ranking", "expected 'random' or 'identity'");
  }
  const auto fallback = r.get<std::string>(run, "player_fallback", "empirical_means");
  if (fallback == "empirical_means") {
    cfg.run.player_fallback = PlayerFallback::empirical_means;
  } else if (fallback == "fixed") {
    cfg.run.player_fallback = PlayerFallback::fixed;
  } else {
    r.fail("player_fallback", "expected 'empirical_means' or 'fixed'");
  }
  cfg.run.learn_in_commit = r.get<bool>(run, "learn_in_commit", true);
  cfg.run.debug_snapshots = r.get<bool>(run, "debug_snapshots", false);
  cfg.algorithm = r.get<std::string>(run, "algorithm", "ca_etc_exp");
  try {
    apply_algorithm(cfg.run, cfg.algorithm, cfg.poly_exponent);
  } catch (const ConfigError& e) {
    r.fail("algorithm", e.what());
  }

  if (doc.contains("sweep")) {
    const auto& sw = doc.at("sweep");
    r.check_keys(sw, "sweep", {"seeds", "gammas", "t0s", "algorithms"});
    SweepSpec s;
    s.seeds = r.list<std::uint64_t>(sw, "seeds");
    s.gammas = r.list<double>(sw, "gammas");
    s.t0s = r.list<std::int64_t>(sw, "t0s");
    s.algorithms = r.list<std::string>(sw, "algorithms");
    for (double g : s.gammas) {
      if (!(g > 0.0 && g < 1.0)) r.fail("gammas", "every gamma must lie in (0, 1)");
    }
    for (auto t : s.t0s) {
      if (t < 1) r.fail("t0s", "every T0 must be a positive integer");
    }
    for (const auto& a : s.algorithms) {
      try {
        RunConfig probe = cfg.run;
        apply_algorithm(probe, a, cfg.poly_exponent);
      } catch (const ConfigError& e) {
        r.fail("algorithms", e.what());
      }
    }
    cfg.sweep = s;
  }

  if (cfg.run.algorithm == Algorithm::ca_etc && cfg.run.horizon <= cfg.market.n_players) {
    r.fail("horizon", "CA-ETC needs horizon > n_players");
  }
  return cfg;
}

inline ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  return parse_experiment_config(detail::read_file(path), path.string(), path.parent_path());
}

namespace detail {

inline std::string gamma_tag(double g) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", g);
  return buf;
}

}  // namespace detail

// Cartesian product seeds x algorithms x gammas x T0s; a missing sweep axis
// falls back to the single value from the top-level config.
inline std::vector<Cell> expand_cells(const ExperimentConfig& cfg) {
  const SweepSpec sw = cfg.sweep.value_or(SweepSpec{});
  const auto seeds = sw.seeds.empty() ? std::vector<std::uint64_t>{cfg.seed} : sw.seeds;
  const auto algorithms = sw.algorithms.empty() ? std::vector<std::string>{cfg.algorithm} : sw.algorithms;
  const auto gammas = sw.gammas.empty() ? std::vector<double>{cfg.run.schedule.gamma()} : sw.gammas;
  const auto t0s = sw.t0s.empty() ? std::vector<std::int64_t>{cfg.run.schedule.t0()} : sw.t0s;

  std::vector<Cell> cells;
  std::set<std::string> names;
  for (auto s : seeds) {
    const MarketInstance instance =
        cfg.market.instance ? *cfg.market.instance
                            : sample_market(cfg.market.n_players, cfg.market.n_arms, cfg.market.noise_std, s,
                                            cfg.market.sampling);
    for (const auto& alg : algorithms) {
      for (double g : gammas) {
        for (auto t0 : t0s) {
          RunConfig run = cfg.run;
          run.seed = cfg.run_seed.value_or(mix_seed(s, seed_domain::run));
          run.schedule = EpochSchedule(ScheduleKind::exponential, t0, g);
          apply_algorithm(run, alg, cfg.poly_exponent);
          run.validate(instance);
          std::string name = alg;
          if (gammas.size() > 1) name += "_g" + detail::gamma_tag(g);
          if (t0s.size() > 1) name += "_t" + std::to_string(t0);
          if (seeds.size() > 1) name += "_s" + std::to_string(s);
          if (!names.insert(name).second) throw ConfigError("duplicate sweep cell '" + name + "'");
          cells.push_back(Cell{name, alg, s, instance, run});
        }
      }
    }
  }
  return cells;
}

// Single-cell config that reproduces `cell` exactly (explicit instance, same
// master seed and run settings).
inline ojson cell_config_json(const Cell& cell, const ExperimentConfig& cfg) {
  ojson j;
  j["seed"] = cell.master_seed;
  j["market"] = {{"instance", ojson::parse(serialize_instance(cell.instance))}};
  ojson run;
  run["horizon"] = cell.run.horizon;
  run["algorithm"] = cell.algorithm;
  run["t0"] = cell.run.schedule.t0();
  run["gamma"] = cell.run.schedule.gamma();
  if (cfg.poly_exponent) run["poly_exponent"] = *cfg.poly_exponent;
  if (cfg.run_seed) run["seed"] = *cfg.run_seed;
  run["checkpoint_stride"] = cell.run.checkpoint_stride;
  run["arm_initial_ranking"] = arm_ranking_init_name(cell.run.arm_initial_ranking);
  run["player_fallback"] = player_fallback_name(cell.run.player_fallback);
  run["learn_in_commit"] = cell.run.learn_in_commit;
  run["debug_snapshots"] = cell.run.debug_snapshots;
  j["run"] = run;
  return j;
}

}  // namespace twosided
