// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
// acceptance --configs DIR --out DIR [--only N,...]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "inertdrift/experiment.hpp"

using namespace inertdrift;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

fs::path g_configs;
fs::path g_out;

ExperimentConfig load(const std::string& name, const std::string& out_name) {
  std::ifstream is(g_configs / (name + ".ini"));
  require(static_cast<bool>(is), errc::config, "cannot open config " + name);
  ExperimentConfig c = parse_config(is);
  c.output_dir = (g_out / out_name).string();
  return c;
}

std::string fmt(const char* f, auto... xs) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, xs...);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

// ------------------------------------------------------------------ criteria

Outcome complementarity() {
  const auto t0 = std::chrono::steady_clock::now();
  const NoiseSource u(20240501, 0);
  const std::uint64_t n = 1000000;
  std::uint64_t bad = 0;
  double worst = 0.0;
  for (std::uint64_t k = 0; k < n; ++k) {
    const ModelParams p = ModelParams::make(0.01 + 10.0 * u.uniform(k, 0), 0.01 + 10.0 * u.uniform(k, 1));
    const double dt = std::pow(10.0, -4.0 + 3.0 * u.uniform(k, 2));
    SystemState s = make_state(u.uniform(k, 3) < 0.25 ? 0.0 : -std::log(u.uniform(k, 3)), -5.0 + 10.0 * u.uniform(k + n, 0));
    const double db = std::sqrt(dt) * u.standard_normal(k);
    const StepOutcome o = reflect_step(s, p, db, dt);
    const double rh = std::fabs(o.state.h - (s.h + s.v * dt - db + o.dl));
    const double rv = std::fabs(o.state.v - (s.v - (p.gamma * s.v + p.g) * dt + o.dl));
    worst = std::max({worst, rh, rv});
    if (!(o.state.h >= 0.0) || !(o.dl >= 0.0) || o.dl * o.state.h != 0.0 || rh > 1e-12 || rv > 1e-12) ++bad;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {bad == 0 && secs < 10.0,
          fmt("%llu steps, %llu violations, max identity residual %.2e, %.2f s", (unsigned long long)n,
              (unsigned long long)bad, worst, secs)};
}

Outcome interior_dynamics() {
  const double kFrozenK = 4.0;
  const double vals[] = {0.1, 0.5, 1.0, 2.0, 10.0};
  double k_max[2] = {0.0, 0.0};
  int level = 0;
  for (double dt : {1e-3, 1e-4}) {
    StepConfig c;
    c.dt = dt;
    for (double gm : vals)
      for (double g : vals) {
        const ModelParams p = ModelParams::make(gm, g);
        for (double v0 : {-0.5 * g / gm, 0.0, 1.0}) {
          const Trajectory tr = simulate(p, make_state(3.0, v0), c, ZeroNoise{}, 1.0);
          for (const auto& s : tr.states) {
            if (s.h <= 0.0) break;
            k_max[level] = std::max(k_max[level], std::fabs(s.v - interior_velocity(p, v0, s.t)) / dt);
          }
        }
      }
    ++level;
  }
  double comp = 0.0;
  for (double gm : vals)
    for (double g : vals) {
      const ModelParams p = ModelParams::make(gm, g);
      const double floor = -g / gm;
      for (double v0 : {floor + 0.01, 0.0, 1.0, 10.0})
        for (double frac : {0.999, 0.5, 0.1}) {
          const double a = floor + frac * (v0 - floor);
          comp = std::max(comp, std::fabs(interior_velocity(p, v0, interior_hitting_time(p, v0, a)) - a));
        }
    }
  return {k_max[0] <= kFrozenK && k_max[1] <= kFrozenK && comp <= 1e-12,
          fmt("K(dt=1e-3) = %.3f, K(dt=1e-4) = %.3f (frozen K = %.1f), composition error %.2e", k_max[0], k_max[1],
              kFrozenK, comp)};
}

Outcome lln() {
  const json r = run(load("lln", "lln"))["result"];
  const double m = r["mean_s_over_t"].get<double>(), se = r["se_s_over_t"].get<double>();
  return {std::fabs(m + 0.5) <= 0.02, fmt("mean S_t/t = %.5f (se %.5f), target -0.5 +- 0.02", m, se)};
}

Outcome renewal_vs_time_average() {
  const json r = run(load("stationary", "stationary"))["result"];
  const double tv = r["tv_renewal_vs_time_average"].get<double>();
  const json& b = r["binning"];
  const bool grid = b["n_h"] == 200 && b["n_v"] == 200;
  return {tv < 0.05 && grid && r["n_cycles"] == 10000,
          fmt("TV = %.4f on %dx%d grid, %d cycles", tv, b["n_h"].get<int>(), b["n_v"].get<int>(),
              r["n_cycles"].get<int>())};
}

Outcome zeta_tail() {
  const json r = run(load("cycles", "cycles"))["result"];
  const json& z = r["zeta_tail"];
  const double lo = z["c_ci95"][0].get<double>(), hi = z["c_ci95"][1].get<double>();
  const bool ok = z["monotone"].get<bool>() && z["concave"].get<bool>() && z["c"].get<double>() > 0.0 && lo > 0.0 &&
                  r["n_cycles"] == 10000;
  return {ok, fmt("c = %.3f, 95%% CI [%.3f, %.3f], curvature %.4f (CI hi %.4f), monotone %d, %d cycles",
                  z["c"].get<double>(), lo, hi, z["curvature"].get<double>(), z["curvature_ci95"][1].get<double>(),
                  (int)z["monotone"].get<bool>(), r["n_cycles"].get<int>())};
}

Outcome tail_sandwiches() {
  ExperimentConfig c = load("tails", "tails");
  json r = run(c)["result"];
  std::string note;
  auto inconclusive = [](const json& x) {
    return x["velocity"]["verdict"] == "inconclusive" || x["gap"]["verdict"] == "inconclusive";
  };
  if (inconclusive(r)) {
    note = fmt(" (escalated from %llu cycles)", (unsigned long long)c.tails.n_cycles);
    c.tails.n_cycles *= 4;
    c.output_dir = (g_out / "tails_x4").string();
    r = run(c)["result"];
  }
  const json &v = r["velocity"], &g = r["gap"];
  return {v["verdict"] == "pass" && g["verdict"] == "pass" && c.tails.n_cycles >= 100000,
          fmt("velocity slope %.3f CI [%.3f, %.3f] in [-8, -0.25]: %s; gap slope %.3f CI [%.3f, %.3f] in [-4, "
              "-0.03125]: %s; %llu cycles",
              v["slope"].get<double>(), v["ci"][0].get<double>(), v["ci"][1].get<double>(),
              v["verdict"].get<std::string>().c_str(), g["slope"].get<double>(), g["ci"][0].get<double>(),
              g["ci"][1].get<double>(), g["verdict"].get<std::string>().c_str(),
              (unsigned long long)c.tails.n_cycles) +
              note};
}

Outcome fluctuations() {
  const ExperimentConfig c = load("fluctuations", "fluctuations");
  const json r = run(c)["result"];
  const double steps = c.fluctuations.horizon / c.step.dt;
  return {r["v_pass"].get<bool>() && r["h_pass"].get<bool>() && steps >= 1e7 - 0.5,
          fmt("V: final %.3f <= %.3f, last decade %.3f >= %.3f; H: final %.3f <= %.3f, last decade %.3f >= %.3f; "
              "%.0f steps",
              r["v_final"].get<double>(), r["v_bracket"][1].get<double>() * r["upper_slack"].get<double>(),
              r["v_last_decade"].get<double>(), r["v_bracket"][0].get<double>() * r["lower_slack"].get<double>(),
              r["h_final"].get<double>(), r["h_bracket"][1].get<double>() * r["upper_slack"].get<double>(),
              r["h_last_decade"].get<double>(), r["h_bracket"][0].get<double>() * r["lower_slack"].get<double>(),
              steps)};
}

Outcome ergodicity() {
  const json r = run(load("ergodicity", "ergodicity"))["result"];
  bool ok = r["runs"].size() >= 2;
  std::string d;
  std::set<std::pair<double, double>> inits;
  for (const auto& x : r["runs"]) {
    const double lam = x["lambda_fit"].get<double>(), r2 = x["r2"].get<double>();
    ok = ok && lam > 0.0 && lam < 1.0 && r2 >= 0.9;
    inits.insert({x["init"][0].get<double>(), x["init"][1].get<double>()});
    d += fmt("init (%g, %g): lambda %.4f, r2 %.3f over %zu points; ", x["init"][0].get<double>(),
             x["init"][1].get<double>(), lam, r2, x["fit_indices"].size());
  }
  return {ok && inits.size() >= 2, d + fmt("split TV %.4f", r["split_tv"].get<double>())};
}

Outcome bounds_suite() {
  const json r = run(load("bounds", "bounds"))["result"];
  bool ok = r["specs"].size() >= 10;
  std::string failed;
  for (const auto& s : r["specs"]) {
    const bool pass = s["verdict"] == "pass" && s["points"].size() >= 3;
    for (const auto& p : s["points"]) ok = ok && p["n_trials"].get<std::uint64_t>() >= kMinBoundTrials;
    if (!pass) failed += s["spec"].get<std::string>() + "=" + s["verdict"].get<std::string>() + " ";
    ok = ok && pass;
  }
  return {ok, fmt("%zu specs; ", r["specs"].size()) + (failed.empty() ? "all pass" : "not passing: " + failed)};
}

Outcome oracle() {
  const json r = run(load("oracle", "oracle"))["result"];
  const json &z = r["gamma_zero"], &n = r["negative_control_gamma_1"];
  return {z["product_form"].get<bool>() && !n["product_form"].get<bool>() && z["n"] == 10000,
          fmt("gamma=0: KS gap p %.3f, KS velocity p %.3f, independence p %.3f; gamma=1 control: p %.2e / %.2e / "
              "%.2e (flagged %d)",
              z["ks_gap"]["p_value"].get<double>(), z["ks_velocity"]["p_value"].get<double>(),
              z["independence"]["p_value"].get<double>(), n["ks_gap"]["p_value"].get<double>(),
              n["ks_velocity"]["p_value"].get<double>(), n["independence"]["p_value"].get<double>(),
              (int)!n["product_form"].get<bool>())};
}

Outcome continuity() {
  const ModelParams p = ModelParams::make(1.0, 1.0);
  StepConfig c;
  c.dt = 1e-3;
  double worst_spread = 0.0, lo_all = INFINITY, hi_all = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    double lo = INFINITY, hi = 0.0;
    for (double d : {1e-6, 1e-5, 1e-4, 1e-3}) {
      const auto [a, b] =
          shared_noise_pair(p, make_state(0.5, -0.5), make_state(0.5 + d, -0.5 + d), c, NoiseSource(seed, 0), 1.0);
      const double ratio = sup_distance_hv(a, b) / d;
      lo = std::min(lo, ratio);
      hi = std::max(hi, ratio);
    }
    worst_spread = std::max(worst_spread, hi / lo);
    lo_all = std::min(lo_all, lo);
    hi_all = std::max(hi_all, hi);
  }
  return {worst_spread <= 3.0, fmt("sup distance / delta in [%.3f, %.3f]; worst per-seed spread %.3f (limit 3)",
                                   lo_all, hi_all, worst_spread)};
}

// every command at reduced size, twice, all artifacts compared byte for byte
Outcome determinism() {
  std::vector<ExperimentConfig> cs;
  auto add = [&](const std::string& name, auto&& shrink) {
    ExperimentConfig c = load(name, "rerun/" + name);
    shrink(c);
    cs.push_back(c);
  };
  add("simulate", [](ExperimentConfig&) {});
  add("cycles", [](ExperimentConfig& c) { c.cycles.n_cycles = 500; });
  add("stationary", [](ExperimentConfig& c) {
    c.stationary.n_cycles = 500;
    c.stationary.pilot_horizon = 200.0;
  });
  add("tails", [](ExperimentConfig& c) {
    c.tails.n_cycles = 5000;
    c.tails.p_lo = 1e-2;
    c.tails.min_units = 30;
  });
  add("fluctuations", [](ExperimentConfig& c) { c.fluctuations.horizon = 100.0; });
  add("lln", [](ExperimentConfig& c) {
    c.lln.horizon = 50.0;
    c.lln.n_seeds = 4;
  });
  add("ergodicity", [](ExperimentConfig& c) {
    c.ergodicity.n_chains = 1000;
    c.ergodicity.n_cycles = 1000;
    c.ergodicity.t_max = 5.0;
    c.ergodicity.bins = 10;
    c.stationary.pilot_horizon = 200.0;
  });
  add("bounds", [](ExperimentConfig& c) { c.bounds.specs = "gap_reaches_level_before_zero_upper"; });
  add("oracle", [](ExperimentConfig& c) {
    c.oracle.n_samples = 200;
    c.oracle.horizon = 5.0;
    c.oracle.refine_dt = 1e-4;
  });
  add("convergence", [](ExperimentConfig& c) {
    c.convergence.n_paths = 20;
    c.convergence.levels = 3;
  });

  std::size_t files = 0;
  std::string diff;
  for (const ExperimentConfig& c : cs) {
    // same config, same directory: snapshot the first run, rerun, compare
    const fs::path dir = c.output_dir;
    fs::remove_all(dir);
    (void)run(c);
    std::map<std::string, std::string> first;
    for (const auto& e : fs::directory_iterator(dir))
      if (e.path().filename() != "manifest.json") first[e.path().filename().string()] = slurp(e.path());  // wall time, start time
    fs::remove_all(dir);
    (void)run(c);
    for (const auto& [f, bytes] : first) {
      ++files;
      if (!fs::exists(dir / f) || slurp(dir / f) != bytes) diff += c.command + "/" + f + " ";
    }
  }
  return {diff.empty() && files > 0,
          fmt("%zu commands, %zu artifacts compared; ", cs.size(), files) + (diff.empty() ? "identical" : "differ: " + diff)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::string configs, out, only;
  app.add_option("--configs", configs, "directory holding the shipped .ini files")->required();
  app.add_option("--out", out, "scratch output directory")->required();
  app.add_option("--only", only, "comma-separated criterion numbers");
  CLI11_PARSE(app, argc, argv);
  g_configs = configs;
  g_out = out;
  fs::create_directories(g_out);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"complementarity over 1e6 random steps", complementarity},
      {"closed-form interior dynamics", interior_dynamics},
      {"law of large numbers", lln},
      {"renewal-reward vs time-average", renewal_vs_time_average},
      {"cycle-length tail", zeta_tail},
      {"stationary tail sandwiches", tail_sandwiches},
      {"fluctuation proxies", fluctuations},
      {"exponential ergodicity", ergodicity},
      {"bounds suite", bounds_suite},
      {"gamma = 0 product-form oracle", oracle},
      {"shared-noise continuity", continuity},
      {"byte-identical reruns", determinism},
  };
  std::set<std::size_t> pick;
  {
    std::stringstream ss(only);
    std::string tok;
    while (std::getline(ss, tok, ','))
      if (!tok.empty()) pick.insert(std::stoul(tok));
  }

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!pick.empty() && !pick.count(i + 1)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << (v.pass ? "PASS" : "FAIL") << "  " << (i + 1) << ". " << criteria[i].first << ": " << v.detail
              << fmt(" [%.1f s]", secs) << std::endl;
    failed += v.pass ? 0 : 1;
  }
  std::cout << (failed == 0 ? "all criteria pass" : std::to_string(failed) + " criteria failed") << std::endl;
  return failed == 0 ? 0 : 1;
}
