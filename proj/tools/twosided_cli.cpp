// twosided: run matching-market bandit experiments, check the stable-matching
// oracles and print theoretical bound tables.
//
// Exit status: 0 success, 1 runtime failure, 2 configuration or usage error,
// 3 failed oracle assertion.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "twosided/twosided.hpp"

namespace fs = std::filesystem;
using namespace twosided;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitAssertion = 3;

std::mutex log_mutex;

// Whole lines only, so concurrent workers never interleave within a line.
void log_line(std::ostream& os, const std::string& line) {
  std::lock_guard lock(log_mutex);
  os << line << '\n' << std::flush;
}

std::string join(const std::vector<double>& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", v[i]);
    s += (i ? ", " : "") + std::string(buf);
  }
  return s + "]";
}

struct RunOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<std::int64_t> stride;
  bool debug_snapshots = false;
  unsigned jobs = 0;
};

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  os << text;
  if (!os) throw std::runtime_error("write failed for " + p.string());
}

void warn_infeasible_t0(const Cell& cell) {
  if (cell.run.algorithm != Algorithm::ca_etc) return;
  const double gap = compute_gaps(cell.instance).universal_gap;
  if (!std::isfinite(gap) || cell.run.horizon <= cell.instance.n_players()) return;
  TheoryInputs in{cell.instance.n_players(), cell.instance.n_arms(), static_cast<double>(cell.run.horizon),
                  static_cast<double>(cell.run.schedule.t0()), cell.run.schedule.gamma(), gap};
  const double needed = cell.run.schedule.kind() == ScheduleKind::exponential
                            ? t0_min(in)
                            : (cell.run.schedule.b() > 2.0 ? t0_min_poly(in, cell.run.schedule.b()) : 0.0);
  if (in.t0 < needed) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "warning: %s: T0 = %lld is below the feasibility threshold %.6g (gap %.6g); running anyway",
                  cell.name.c_str(), static_cast<long long>(cell.run.schedule.t0()), needed, gap);
    log_line(std::cerr, buf);
  }
}

std::string summary_line(const Cell& cell, const SimulationTrace& tr) {
  std::ostringstream os;
  os << cell.name << ": ";
  if (tr.commit_round) {
    os << "commit round " << *tr.commit_round << " (epoch " << *tr.commit_epoch << ", "
       << (tr.committed_true ? "true rankings" : "WRONG rankings") << ")";
  } else {
    os << "no commit";
  }
  os << "; epochs " << tr.epochs.size() << "; player regret " << join(tr.player_regret) << "; arm regret "
     << join(tr.arm_regret);
  if (tr.exploration_collisions) os << "; exploration collisions " << tr.exploration_collisions;
  return os.str();
}

int cmd_run(const RunOptions& opt) {
  ExperimentConfig cfg = load_experiment_config(opt.config);
  if (opt.seed) {
    cfg.seed = *opt.seed;
    if (cfg.sweep) cfg.sweep->seeds.clear();
  }
  if (opt.stride) {
    if (*opt.stride < 1) throw ConfigError("--stride must be positive");
    cfg.run.checkpoint_stride = *opt.stride;
  }
  if (opt.debug_snapshots) cfg.run.debug_snapshots = true;

  fs::path out_dir = opt.out;
  if (out_dir.empty()) out_dir = cfg.output_dir;
  if (out_dir.empty()) {
    const char* env = std::getenv("TWOSIDED_OUT_DIR");
    out_dir = env && *env ? env : "out";
  }
  const auto cells = expand_cells(cfg);
  fs::create_directories(out_dir);
  for (const auto& c : cells) warn_infeasible_t0(c);

  unsigned jobs = opt.jobs ? opt.jobs : std::max(1u, std::thread::hardware_concurrency());
  jobs = std::min<unsigned>(jobs, static_cast<unsigned>(cells.size()));
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      const auto& cell = cells[i];
      try {
        const auto tr = run_protocol(cell.instance, cell.run);
        auto meta = run_metadata(cell.run, cell.instance, tr);
        meta["cell"] = cell.name;
        meta["config"] = cell_config_json(cell, cfg);
        write_text(out_dir / (cell.name + ".csv"), trace_csv(tr));
        write_text(out_dir / (cell.name + ".meta.json"), meta.dump(2) + "\n");
        log_line(std::cout, summary_line(cell, tr));
        for (const auto& w : tr.warnings) log_line(std::cerr, "warning: " + cell.name + ": " + w);
      } catch (const std::exception& e) {
        failed = true;
        log_line(std::cerr, "error: " + cell.name + ": " + e.what());
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < jobs; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return failed ? kExitFailure : kExitOk;
}

// Arm j's mean for its partner in `m`, -inf when unmatched.
double arm_value(const MarketInstance& inst, const Matching& m, int j) {
  const auto holder = m.arm_to_player(inst.n_arms());
  return holder[j] == kUnmatched ? -std::numeric_limits<double>::infinity() : inst.arm_mean(j, holder[j]);
}

std::optional<std::string> check_instance(const MarketInstance& m) {
  const auto all = enumerate_stable_matchings(m);
  if (all.empty()) return "no stable matching found by enumeration";
  const auto po = gale_shapley(m, Side::players);
  const auto pp = gale_shapley(m, Side::arms);
  if (!is_stable(po, m)) return "player-proposing result is not stable";
  if (!is_stable(pp, m)) return "arm-proposing result is not stable";
  if (std::find(all.begin(), all.end(), po) == all.end()) return "player-proposing result missing from enumeration";
  if (std::find(all.begin(), all.end(), pp) == all.end()) return "arm-proposing result missing from enumeration";
  for (const auto& s : all) {
    for (int i = 0; i < m.n_players(); ++i) {
      if (s.arm_of(i) == kUnmatched) return "a stable matching leaves a player unmatched";
      if (m.player_mean(i, po.arm_of(i)) < m.player_mean(i, s.arm_of(i))) return "player-proposing result is not player-optimal";
      if (m.player_mean(i, pp.arm_of(i)) > m.player_mean(i, s.arm_of(i))) return "arm-proposing result is not player-pessimal";
    }
    for (int j = 0; j < m.n_arms(); ++j) {
      if (arm_value(m, po, j) > arm_value(m, s, j)) return "player-proposing result is not arm-pessimal";
      if (arm_value(m, pp, j) < arm_value(m, s, j)) return "arm-proposing result is not arm-optimal";
    }
  }
  return std::nullopt;
}

int cmd_oracle_check(int n, int k, int seeds, std::uint64_t start) {
  if (k > kEnumerationMaxArms) throw SizeLimitError("oracle-check supports at most 8 arms");
  if (n < 1 || n > k) throw ConfigError("oracle-check needs 1 <= players <= arms");
  if (seeds < 1) throw ConfigError("--seeds must be positive");
  const auto t0 = std::chrono::steady_clock::now();
  for (int s = 0; s < seeds; ++s) {
    const auto seed = start + static_cast<std::uint64_t>(s);
    const auto m = sample_market(n, k, 1.0, seed);
    if (auto err = check_instance(m)) {
      std::cerr << "oracle-check failed for seed " << seed << ": " << *err << "\n" << serialize_instance(m);
      return kExitAssertion;
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("oracle-check: %d instances with N=%d, K=%d passed in %.3f s\n", seeds, n, k, secs);
  return kExitOk;
}

struct BoundsOptions {
  int n = 5;
  int k = 5;
  double horizon = 1e6;
  double t0 = 500;
  double gamma = 0.4;
  double delta = 0.1;
  double delta_max = 1.0;
  std::optional<double> poly_exponent;
  bool presets = false;
  bool machine = false;
};

ojson breakdown_json(const BoundBreakdown& b) {
  return {{"total", b.total}, {"terms", b.terms}, {"feasible", b.applicable}};
}

ojson bounds_table(const BoundsOptions& o, double gamma) {
  TheoryInputs in{o.n, o.k, o.horizon, o.t0, gamma, o.delta};
  in.validate();
  if (o.n > o.k) throw ConfigError("bounds need players <= arms");
  if (!(o.horizon > o.n)) throw ConfigError("bounds need horizon > players");
  const double b_poly = o.poly_exponent.value_or(in.b());
  ojson t;
  t["inputs"] = {{"n_players", o.n}, {"n_arms", o.k}, {"horizon", o.horizon}, {"t0", o.t0},
                 {"gamma", gamma},   {"delta", o.delta}, {"delta_max", o.delta_max}, {"poly_exponent", b_poly}};
  t["l_max_exp"] = l_max_exp(in);
  t["l_max_exp_closed_form"] = l_max_exp_closed_form(in);
  t["l_max_poly"] = l_max_poly(in);
  t["l_max_poly_closed_form"] = l_max_poly_closed_form(in);
  const auto le = tilde_l_exp(in);
  const auto lp = tilde_l_poly(in, b_poly);
  t["epochs_exp"] = {{"value", le.value}, {"last_epoch", le.last_epoch}};
  t["epochs_poly"] = {{"value", lp.value}, {"last_epoch", lp.last_epoch}};
  t["samples_threshold"] = samples_threshold(o.delta, o.horizon);
  t["t0_min_exp"] = t0_min(in);
  t["t0_feasible_exp"] = t0_feasible(o.t0, in);
  if (b_poly > 2.0) {
    t["t0_min_poly"] = t0_min_poly(in, b_poly);
    t["t0_feasible_poly"] = o.t0 >= t0_min_poly(in, b_poly);
  }
  t["etgs_player"] = breakdown_json(etgs_regret_bound(in, o.delta_max));
  t["etgs_arm"] = breakdown_json(etgs_regret_bound(in, o.delta_max, AgentKind::arm));
  t["ca_etc_exp"] = breakdown_json(ca_etc_regret_bound(in, o.delta_max));
  t["ca_etc_headline_exploration_term"] = ca_etc_headline_exploration_term(in, o.delta_max);
  t["ca_etc_poly_regret_bound"] = breakdown_json(ca_etc_poly_regret_bound(in, o.delta_max, b_poly));
  t["bad_event_bound"] = bad_event_bound(o.n, o.k);
  return t;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

void print_table(const ojson& t) {
  const auto& in = t["inputs"];
  std::printf("inputs           N=%d K=%d T=%s T0=%s gamma=%s delta=%s delta_max=%s poly_b=%s\n",
              in["n_players"].get<int>(), in["n_arms"].get<int>(), fmt(in["horizon"]).c_str(),
              fmt(in["t0"]).c_str(), fmt(in["gamma"]).c_str(), fmt(in["delta"]).c_str(),
              fmt(in["delta_max"]).c_str(), fmt(in["poly_exponent"]).c_str());
  std::printf("l_max exp        %d (closed form %d)\n", t["l_max_exp"].get<int>(), t["l_max_exp_closed_form"].get<int>());
  std::printf("l_max poly       %d (closed form %d)\n", t["l_max_poly"].get<int>(),
              t["l_max_poly_closed_form"].get<int>());
  std::printf("epochs exp       %s (last epoch %d)\n", fmt(t["epochs_exp"]["value"]).c_str(),
              t["epochs_exp"]["last_epoch"].get<int>());
  std::printf("epochs poly      %s (last epoch %d)\n", fmt(t["epochs_poly"]["value"]).c_str(),
              t["epochs_poly"]["last_epoch"].get<int>());
  std::printf("samples/alt      %s\n", fmt(t["samples_threshold"]).c_str());
  std::printf("t0_min exp       %s (%s)\n", fmt(t["t0_min_exp"]).c_str(),
              t["t0_feasible_exp"].get<bool>() ? "feasible" : "infeasible");
  if (t.contains("t0_min_poly")) {
    std::printf("t0_min poly      %s (%s)\n", fmt(t["t0_min_poly"]).c_str(),
                t["t0_feasible_poly"].get<bool>() ? "feasible" : "infeasible");
  }
  auto row = [](const char* name, const ojson& b) {
    std::string terms;
    for (const auto& x : b["terms"]) terms += (terms.empty() ? "" : " + ") + fmt(x.get<double>());
    std::printf("%-16s %s = %s\n", name, fmt(b["total"]).c_str(), terms.c_str());
  };
  row("etgs player", t["etgs_player"]);
  row("etgs arm", t["etgs_arm"]);
  row("ca_etc_exp", t["ca_etc_exp"]);
  row("ca-etc poly", t["ca_etc_poly_regret_bound"]);
  std::printf("bad events       %s\n", fmt(t["bad_event_bound"]).c_str());
}

int cmd_bounds(const BoundsOptions& o) {
  std::vector<double> gammas{o.gamma};
  if (o.presets) gammas = {1.0 / 3.0, 1.0 / 4.0, 1.0 / 5.0};
  ojson tables = ojson::array();
  for (double g : gammas) tables.push_back(bounds_table(o, g));
  if (o.machine) {
    std::cout << (tables.size() == 1 ? tables[0] : tables).dump(2) << "\n";
  } else {
    for (std::size_t i = 0; i < tables.size(); ++i) {
      if (i) std::printf("\n");
      print_table(tables[i]);
    }
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decentralized two-sided matching-market bandit simulator"};
  app.require_subcommand(1);

  RunOptions run_opt;
  auto add_run_flags = [&](CLI::App* sub) {
    sub->add_option("--config", run_opt.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", run_opt.seed, "master seed; replaces any sweep seed list");
    sub->add_option("--out", run_opt.out, "output directory (default: config output_dir, $TWOSIDED_OUT_DIR, ./out)");
    sub->add_option("--stride", run_opt.stride, "checkpoint stride in rounds");
    sub->add_flag("--debug-snapshots", run_opt.debug_snapshots, "record estimate updates and report bad-event counts");
    sub->add_option("--jobs", run_opt.jobs, "worker threads (default: hardware concurrency)");
  };
  auto* run = app.add_subcommand("run", "run every cell of a config");
  add_run_flags(run);
  auto* sweep = app.add_subcommand("sweep", "alias of run for configs with a sweep section");
  add_run_flags(sweep);

  int oc_n = 3, oc_k = 3, oc_seeds = 100;
  std::uint64_t oc_start = 0;
  auto* oracle = app.add_subcommand("oracle-check", "cross-check Gale-Shapley against enumeration");
  oracle->add_option("--players", oc_n, "N");
  oracle->add_option("--arms", oc_k, "K (at most 8)");
  oracle->add_option("--seeds", oc_seeds, "number of seeded instances");
  oracle->add_option("--seed", oc_start, "first seed");

  BoundsOptions bo;
  auto* bounds = app.add_subcommand("bounds", "print epoch thresholds and regret bounds");
  bounds->add_option("--players", bo.n, "N");
  bounds->add_option("--arms", bo.k, "K");
  bounds->add_option("--horizon", bo.horizon, "T");
  bounds->add_option("--t0", bo.t0, "T0");
  bounds->add_option("--gamma", bo.gamma, "gamma in (0, 1)");
  bounds->add_option("--delta", bo.delta, "universal gap");
  bounds->add_option("--delta-max", bo.delta_max, "largest per-round regret");
  bounds->add_option("--poly-exponent", bo.poly_exponent, "polynomial schedule exponent (default 2^{1/gamma})");
  bounds->add_flag("--gamma-presets", bo.presets, "tables for gamma = 1/3, 1/4, 1/5");
  bounds->add_flag("--machine-readable", bo.machine, "emit JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*run || *sweep) return cmd_run(run_opt);
    if (*oracle) return cmd_oracle_check(oc_n, oc_k, oc_seeds, oc_start);
    if (*bounds) return cmd_bounds(bo);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::length_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitFailure;
}
