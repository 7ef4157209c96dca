#pragma once

// Batch driver behind the command-line tool: runs one configured command,
// writes its numeric results (result.json plus command artifacts), a manifest
// with the config echo and wall time, and plot-ready CSV files.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "inertdrift/analytics.hpp"
#include "inertdrift/bounds.hpp"
#include "inertdrift/config.hpp"
#include "inertdrift/core_model.hpp"
#include "inertdrift/error.hpp"
#include "inertdrift/integrator.hpp"
#include "inertdrift/measure.hpp"
#include "inertdrift/parallel.hpp"
#include "inertdrift/renewal.hpp"
#include "inertdrift/rng.hpp"
#include "inertdrift/stationary.hpp"

namespace inertdrift {

inline constexpr const char* kVersion = "0.1.0";

using json = nlohmann::ordered_json;

// ------------------------------------------------------------ json views

inline json to_json(const stats::Interval& i) { return json::array({i.lo, i.hi}); }

inline json to_json(const ModelParams& p) {
  return {{"gamma", p.gamma}, {"g", p.g}, {"gamma_zero_mode", p.gamma_zero_mode}};
}

inline json to_json(const SystemState& s) {
  return {{"t", s.t}, {"h", s.h}, {"v", s.v}, {"s", s.s}, {"x", s.x}, {"b", s.b}, {"l", s.l}};
}

inline json to_json(const Binning& b) {
  return {{"h_max", b.h_max}, {"v_min", b.v_min}, {"v_max", b.v_max}, {"n_h", b.n_h}, {"n_v", b.n_v}};
}

inline json to_json(const ZetaTailReport& z) {
  return {{"t", z.t},
          {"survival", z.survival},
          {"counts", z.counts},
          {"c", z.c},
          {"intercept", z.intercept},
          {"c_ci95", to_json(z.c_ci)},
          {"curvature", z.curvature},
          {"curvature_ci95", to_json(z.curvature_ci)},
          {"monotone", z.monotone},
          {"concave", z.concave},
          {"degenerate", z.degenerate},
          {"c_positive", z.c_positive()}};
}

inline json to_json(const IidReport& r) {
  return {{"lag1", r.lag1},
          {"lag2", r.lag2},
          {"band99", r.band},
          {"ks_halves_p", r.ks_halves_p},
          {"consistent", r.consistent}};
}

inline json to_json(const TailFit& f) {
  return {{"axis", to_string(f.axis)},
          {"transform", to_string(f.transform)},
          {"slope", f.slope},
          {"intercept", f.intercept},
          {"ci", to_json(f.ci)},
          {"fit_range", to_json(f.fit_range)},
          {"n_effective", f.n_effective},
          {"mills_correction", f.mills_correction},
          {"bracket", to_json(f.bracket)},
          {"verdict", to_string(f.verdict)},
          {"levels", f.levels},
          {"abscissa", f.abscissa},
          {"log_surv", f.log_surv},
          {"response", f.response}};
}

inline json to_json(const FluctuationReport& r) {
  json series = json::array();
  for (const auto& p : r.series) series.push_back({{"t", p.t}, {"v_ratio", p.v_ratio}, {"h_ratio", p.h_ratio}});
  return {{"v_final", r.v_final},
          {"h_final", r.h_final},
          {"v_last_decade", r.v_last_decade},
          {"h_last_decade", r.h_last_decade},
          {"v_bracket", to_json(r.v_bracket)},
          {"h_bracket", to_json(r.h_bracket)},
          {"upper_slack", r.upper_slack},
          {"lower_slack", r.lower_slack},
          {"v_pass", r.v_pass},
          {"h_pass", r.h_pass},
          {"series", series}};
}

inline json to_json(const DecayFit& f) {
  return {{"times", f.times},
          {"tv", f.tv_values},
          {"noise_floor", f.noise_floor},
          {"split_floor", f.split_floor},
          {"fit_indices", f.fit_indices},
          {"slope", f.slope},
          {"slope_ci95", to_json(f.slope_ci)},
          {"lambda_fit", f.lambda_fit},
          {"r2", f.r2}};
}

inline json to_json(const ProductFormReport& r) {
  return {{"n", r.n},
          {"exp_rate", r.exp_rate},
          {"v_mean", r.v_mean},
          {"v_sd", r.v_sd},
          {"ks_gap", {{"statistic", r.ks_gap.statistic}, {"p_value", r.ks_gap.p_value}}},
          {"ks_velocity", {{"statistic", r.ks_velocity.statistic}, {"p_value", r.ks_velocity.p_value}}},
          {"independence",
           {{"statistic", r.independence.statistic}, {"df", r.independence.df}, {"p_value", r.independence.p_value}}},
          {"alpha", r.alpha},
          {"gap_exponential", r.gap_exponential()},
          {"velocity_gaussian", r.velocity_gaussian()},
          {"independent", r.independent()},
          {"product_form", r.product_form()}};
}

inline json to_json(const BoundArgs& a) {
  json j = json::object();
  for (const auto& [k, v] : a) j[k] = v;
  return j;
}

inline json to_json(const BoundReport& r) {
  json j = {{"args", to_json(r.args)},   {"n_trials", r.n_trials}, {"successes", r.successes},
            {"truncated", r.truncated},  {"p_hat", r.p_hat},       {"wilson99", to_json(r.wilson)}};
  j["bound"] = r.bound_value ? json(*r.bound_value) : json(nullptr);
  j["verdict"] = to_string(r.verdict);
  j["tight"] = r.tight;
  return j;
}

inline json to_json(const SpecResult& r) {
  json pts = json::array();
  for (const auto& p : r.points) pts.push_back(to_json(p));
  json j = {{"spec", r.spec},
            {"direction", to_string(r.direction)},
            {"mode", to_string(r.mode)},
            {"verdict", to_string(r.verdict)},
            {"note", r.note},
            {"points", pts}};
  if (r.shape) {
    j["shape"] = {{"variable", r.shape->variable}, {"exponent", r.shape->exponent},
                  {"slope", r.shape->slope},       {"slope_se", r.shape->slope_se},
                  {"slope_ci99", to_json(r.shape->slope_ci)}, {"tight", r.shape->tight}};
  }
  return j;
}

inline json to_json(const ConvergenceReport& r) {
  json lv = json::array();
  for (const auto& l : r.levels) lv.push_back({{"dt", l.dt}, {"mean_error", l.mean_error}});
  return {{"levels", lv}, {"ratios", r.ratios}, {"order", r.order}};
}

// ----------------------------------------------------------- file helpers

namespace detail {

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  require(static_cast<bool>(os), errc::io, "cannot write " + path.string());
  os << text;
  require(static_cast<bool>(os), errc::io, "write failed for " + path.string());
}

inline std::string csv_number(double x) {
  if (std::isnan(x)) return "";
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

inline std::string csv_row(const std::vector<double>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? "," : "") + csv_number(xs[i]);
  return s + '\n';
}

inline json read_json(const std::filesystem::path& path) {
  std::ifstream is(path);
  require(static_cast<bool>(is), errc::missing_artifact, "missing artifact: " + path.string());
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    throw Error(errc::io, "cannot parse " + path.string() + ": " + e.what());
  }
}

inline std::uint64_t label(const char* s) { return name_hash(s); }

inline Binning pilot_binning(const ModelParams& p, const StepConfig& step, std::uint64_t seed, double horizon,
                             double q, std::size_t n_h, std::size_t n_v) {
  std::vector<double> hs, vs;
  simulate_with(p, renewal_point_state(p), step, NoiseSource(derive_seed(seed, label("pilot")), 0), horizon,
                [&](const SystemState&, const StepOutcome& o) {
                  hs.push_back(o.state.h);
                  vs.push_back(o.state.v);
                });
  return binning_from_pilot(hs, vs, q, n_h, n_v);
}

/// Marginals of a measure on its grid (overflow excluded).
inline json marginals(const EmpiricalMeasure& m) {
  const Binning& b = m.binning();
  std::vector<double> mh(b.n_h, 0.0), mv(b.n_v, 0.0);
  for (std::size_t i = 0; i < b.n_h; ++i)
    for (std::size_t j = 0; j < b.n_v; ++j) {
      mh[i] += m.at(i, j);
      mv[j] += m.at(i, j);
    }
  return {{"h_edges", b.h_edges()}, {"v_edges", b.v_edges()}, {"h_mass", mh}, {"v_mass", mv}};
}

inline void check_abort_budget(const CycleBatch& b, double budget) {
  require(b.abort_fraction() <= budget, errc::abort_budget,
          "aborted cycle fraction " + std::to_string(b.abort_fraction()) + " exceeds the budget " +
              std::to_string(budget));
}

}  // namespace detail

// -------------------------------------------------------------- commands

struct RunContext {
  ExperimentConfig cfg;
  std::filesystem::path out;
  std::size_t lanes = 1;
  std::vector<std::string> artifacts;

  std::filesystem::path file(const std::string& name) {
    artifacts.push_back(name);
    return out / name;
  }
};

namespace detail {

inline json run_simulate(RunContext& ctx) {
  const auto& c = ctx.cfg;
  const Trajectory tr =
      simulate(c.params, make_state(c.simulate.h0, c.simulate.v0), c.step, NoiseSource(c.seed, 0), c.simulate.horizon);
  std::ofstream os(ctx.file("trajectory.csv"));
  write_trajectory_csv(os, tr);
  return {{"n_records", tr.states.size()},
          {"steps", tr.stop_info->steps},
          {"stop_reason", to_string(tr.stop_info->reason)},
          {"final_state", to_json(tr.final_state())}};
}

inline json run_cycles(RunContext& ctx) {
  const auto& c = ctx.cfg;
  CollectOptions opt;
  opt.t_cap_per_cycle = c.cycles.t_cap_per_cycle;
  opt.lanes = ctx.lanes;
  opt.threads = ctx.lanes;
  const CycleBatch b = collect_cycles(c.params, c.cycles.n_cycles, c.step, c.seed, opt);
  {
    std::ofstream os(ctx.file("cycles.dat"));
    write_cycle_file(os, b);
  }
  check_abort_budget(b, c.cycles.abort_budget);
  json j = {{"n_cycles", b.cycles.size()},
            {"aborted", b.aborted},
            {"abort_fraction", b.abort_fraction()},
            {"mean_duration", b.mean_duration()},
            {"total_time", b.total_time()}};
  if (b.cycles.size() >= 100) {
    j["zeta_tail"] = to_json(zeta_tail_check(b));
    j["iid"] = to_json(cycle_iid_diagnostics(b));
  } else {
    j["note"] = "fewer than 100 cycles: tail and i.i.d. diagnostics skipped";
  }
  return j;
}

inline json run_stationary(RunContext& ctx) {
  const auto& c = ctx.cfg;
  const auto& s = c.stationary;
  const Binning bin = pilot_binning(c.params, c.step, c.seed, s.pilot_horizon, s.pilot_quantile, s.bins_h, s.bins_v);
  CollectOptions opt;
  opt.binning = bin;
  opt.lanes = ctx.lanes;
  opt.threads = ctx.lanes;
  const CycleBatch b = collect_cycles(c.params, s.n_cycles, c.step, c.seed, opt);
  check_abort_budget(b, c.cycles.abort_budget);
  const EmpiricalMeasure pi = estimate_pi(b);
  const EmpiricalMeasure ta =
      time_average_measure(c.params, make_state(s.h0, s.v0), c.step,
                           NoiseSource(derive_seed(c.seed, label("time-average")), 0), b.total_time(), bin, s.burn_in);
  const std::vector<std::string> meta = {"gamma=" + csv_number(c.params.gamma), "g=" + csv_number(c.params.g),
                                         "dt=" + csv_number(c.step.dt), "seed=" + std::to_string(c.seed),
                                         "n_cycles=" + std::to_string(b.cycles.size())};
  {
    std::ofstream os(ctx.file("pi_renewal.csv"));
    write_measure_csv(os, pi, meta);
  }
  {
    std::ofstream os(ctx.file("pi_time_average.csv"));
    write_measure_csv(os, ta, meta);
  }
  return {{"binning", to_json(bin)},
          {"n_cycles", b.cycles.size()},
          {"total_time", b.total_time()},
          {"tv_renewal_vs_time_average", tv_distance(pi, ta)},
          {"mean_v_renewal", pi.mean_v()},
          {"mean_v_time_average", ta.mean_v()},
          {"overflow_renewal", pi.overflow()},
          {"overflow_time_average", ta.overflow()},
          {"marginals_renewal", marginals(pi)},
          {"marginals_time_average", marginals(ta)}};
}

inline json run_tails(RunContext& ctx) {
  const auto& c = ctx.cfg;
  const auto& t = c.tails;
  CollectOptions opt;
  opt.v_tail = default_velocity_tail(c.params, t.v_span, t.bins, t.groups);
  opt.h_tail = default_gap_tail(t.h_span, t.bins, t.groups);
  opt.lanes = ctx.lanes;
  opt.threads = ctx.lanes;
  const CycleBatch b = collect_cycles(c.params, t.n_cycles, c.step, c.seed, opt);
  check_abort_budget(b, c.cycles.abort_budget);
  TailFitOptions fo;
  fo.p_hi = t.p_hi;
  fo.p_lo = t.p_lo;
  fo.n_levels = t.n_levels;
  fo.min_units = t.min_units;
  fo.level = t.level;
  fo.mills_correction = t.mills_correction;
  return {{"n_cycles", b.cycles.size()},
          {"velocity", to_json(fit_velocity_tail(*b.v_tail, c.params, fo))},
          {"gap", to_json(fit_gap_tail(*b.h_tail, c.params, fo))}};
}

inline json run_fluctuations(RunContext& ctx) {
  const auto& c = ctx.cfg;
  const auto& f = c.fluctuations;
  std::vector<double> cps;
  const double t0 = std::max(std::exp(1.0), f.horizon / 1000.0);
  const std::size_t n = std::max<std::uint64_t>(f.n_checkpoints, 2);
  for (std::size_t i = 0; i < n; ++i)
    cps.push_back(t0 * std::pow(f.horizon / t0, static_cast<double>(i) / static_cast<double>(n - 1)));
  cps.back() = f.horizon;
  const FluctuationReport r = fluctuation_ratios(c.params, make_state(f.h0, f.v0), c.step, NoiseSource(c.seed, 0),
                                                 f.horizon, cps, f.upper_slack, f.lower_slack);
  return to_json(r);
}

inline json run_lln(RunContext& ctx) {
  const auto& c = ctx.cfg;
  const std::size_t n = c.lln.n_seeds;
  require(n >= 2, errc::config, "lln: n_seeds must be >= 2");
  const auto est = run_lanes(
      n,
      [&](std::size_t i) {
        return lln_estimate(c.params, renewal_point_state(c.params), c.step,
                            NoiseSource(derive_seed(c.seed, label("lln"), i), 0), c.lln.horizon);
      },
      ctx.lanes);
  std::vector<double> s, x;
  for (const auto& e : est) {
    s.push_back(e.s_over_t);
    x.push_back(e.x_over_t);
  }
  const double target = c.params.drift_velocity();
  const double ms = stats::mean(s), mx = stats::mean(x);
  return {{"target", target},
          {"s_over_t", s},
          {"x_over_t", x},
          {"mean_s_over_t", ms},
          {"mean_x_over_t", mx},
          {"se_s_over_t", std::sqrt(stats::variance(s) / static_cast<double>(n))},
          {"tolerance", c.lln.tolerance},
          {"pass", std::fabs(ms - target) <= c.lln.tolerance && std::fabs(mx - target) <= c.lln.tolerance}};
}

inline json run_ergodicity(RunContext& ctx) {
  const auto& c = ctx.cfg;
  const auto& e = c.ergodicity;
  const Binning bin =
      pilot_binning(c.params, c.step, c.seed, c.stationary.pilot_horizon, c.stationary.pilot_quantile, e.bins, e.bins);
  CollectOptions opt;
  opt.binning = bin;
  opt.lanes = ctx.lanes;
  opt.threads = ctx.lanes;
  CycleBatch b1 = collect_cycles(c.params, e.n_cycles / 2, c.step, derive_seed(c.seed, label("pi-a")), opt);
  const CycleBatch b2 =
      collect_cycles(c.params, e.n_cycles - e.n_cycles / 2, c.step, derive_seed(c.seed, label("pi-b")), opt);
  const double split = tv_distance(estimate_pi(b1), estimate_pi(b2));
  b1.merge(b2);
  const EmpiricalMeasure pi = estimate_pi(b1);
  std::vector<double> times;
  for (double t = e.t_step; t <= e.t_max + 1e-9; t += e.t_step) times.push_back(t);
  json runs = json::array();
  for (std::size_t i = 0; i < e.init_h.size(); ++i) {
    // two halves of size n/2 each differ by about sqrt(2) times the error of the pooled estimate
    const DecayFit f = tv_decay_curve(c.params, make_state(e.init_h[i], e.init_v[i]), times, e.n_chains, pi, c.step,
                                      derive_seed(c.seed, label("chains"), i), ctx.lanes, ctx.lanes,
                                      split / std::sqrt(2.0));
    json r = to_json(f);
    r["init"] = {e.init_h[i], e.init_v[i]};
    runs.push_back(r);
  }
  return {{"binning", to_json(bin)}, {"split_tv", split}, {"runs", runs}};
}

inline json run_bounds(RunContext& ctx) {
  const auto& c = ctx.cfg;
  const std::vector<BoundSpec> specs = registry();
  std::vector<const BoundSpec*> chosen;
  if (c.bounds.specs == "all") {
    for (const auto& s : specs) chosen.push_back(&s);
  } else {
    std::stringstream ss(c.bounds.specs);
    std::string name;
    while (std::getline(ss, name, ',')) {
      try {
        chosen.push_back(&find_spec(specs, trim(name)));
      } catch (const Error& err) {
        throw Error(errc::config, err.what());
      }
    }
  }
  BoundRunOptions o;
  o.lanes = ctx.lanes;
  o.threads = ctx.lanes;
  json results = json::array();
  std::ostringstream table;
  table << std::left << std::setw(38) << "spec" << std::setw(30) << "args" << std::setw(12) << "p_hat"
        << std::setw(26) << "wilson99" << std::setw(12) << "bound" << "verdict\n";
  for (const BoundSpec* s : chosen) {
    o.n_trials = std::max(c.bounds.n_trials, s->default_trials);
    const SpecResult r = run_spec(*s, c.params, c.step, c.seed, o);
    results.push_back(to_json(r));
    for (const auto& p : r.points) {
      std::ostringstream args, ci, bound;
      for (const auto& [k, v] : p.args) args << k << '=' << std::setprecision(4) << v << ' ';
      ci << std::setprecision(4) << '[' << p.wilson.lo << ", " << p.wilson.hi << ']';
      if (p.bound_value) bound << std::setprecision(4) << *p.bound_value;
      table << std::left << std::setw(38) << s->name << std::setw(30) << args.str() << std::setw(12)
            << std::setprecision(4) << p.p_hat << std::setw(26) << ci.str() << std::setw(12) << bound.str()
            << (r.mode == BoundMode::level ? to_string(p.verdict) : "-") << '\n';
    }
    if (r.shape)
      table << "  shape: slope " << std::setprecision(4) << r.shape->slope << " ci99 [" << r.shape->slope_ci.lo << ", "
            << r.shape->slope_ci.hi << "] vs " << -r.shape->exponent << '\n';
    table << "  => " << to_string(r.verdict) << (r.note.empty() ? "" : " (" + r.note + ")") << "\n";
  }
  write_text(ctx.file("bounds_table.txt"), table.str());
  return {{"specs", results}};
}

inline json run_oracle(RunContext& ctx) {
  const auto& c = ctx.cfg;
  StationarySampleOptions o;
  o.refine_span = c.oracle.refine_span;
  o.refine_dt = c.oracle.refine_dt;
  o.lanes = ctx.lanes;
  o.threads = ctx.lanes;
  json j = {{"gamma_zero", to_json(gamma_zero_oracle(c.params, c.oracle.n_samples, c.oracle.horizon, c.step,
                                                     c.seed, o))}};
  if (c.oracle.negative_control) {
    const ModelParams p1 = ModelParams::make(1.0, c.params.g);
    const auto [h, v] = stationary_samples(p1, c.oracle.n_samples, c.oracle.horizon, c.step,
                                           derive_seed(c.seed, label("negative-control")), o);
    j["negative_control_gamma_1"] = to_json(product_form_tests(h, v));
  }
  return j;
}

inline json run_convergence(RunContext& ctx) {
  const auto& c = ctx.cfg;
  const auto& v = c.convergence;
  return to_json(strong_convergence(c.params, make_state(v.h0, v.v0), v.horizon, v.dt_coarse, v.levels, v.n_paths,
                                    c.seed));
}

}  // namespace detail

// ------------------------------------------------------------- plot data

/// Turns result.json in `dir` into one tidy CSV per plot. Returns the file names.
inline std::vector<std::string> emit_plot_data(const std::filesystem::path& dir) {
  const json r = detail::read_json(dir / "result.json");
  require(r.contains("command") && r.contains("result"), errc::io, "result.json lacks command/result");
  const std::string cmd = r["command"].get<std::string>();
  const json& res = r["result"];
  std::vector<std::string> out;
  auto emit = [&](const std::string& name, const std::string& text) {
    detail::write_text(dir / name, text);
    out.push_back(name);
  };

  if (cmd == "tails") {
    for (const char* axis : {"velocity", "gap"}) {
      const json& f = res[axis];
      const auto lv = f["levels"].get<std::vector<double>>();
      const auto ab = f["abscissa"].get<std::vector<double>>();
      const auto ls = f["log_surv"].get<std::vector<double>>();
      const auto rs = f["response"].get<std::vector<double>>();
      require(!lv.empty(), errc::empty_measure, std::string("empty-measure: no tail levels on the ") + axis + " axis");
      const double slope = f["slope"].get<double>(), icpt = f["intercept"].get<double>();
      const double lo = f["ci"][0].get<double>(), hi = f["ci"][1].get<double>();
      double xm = 0.0;
      for (double a : ab) xm += a / static_cast<double>(ab.size());
      std::string csv = "y,log_surv,fit,ci_lo,ci_hi\n";
      for (std::size_t i = 0; i < lv.size(); ++i) {
        const double corr = rs[i] - ls[i];
        const double fit = icpt + slope * ab[i] - corr;
        // band: slopes at the interval ends, pivoting at the mean abscissa
        const double a = fit + (lo - slope) * (ab[i] - xm), b = fit + (hi - slope) * (ab[i] - xm);
        csv += detail::csv_row({lv[i], ls[i], fit, std::min(a, b), std::max(a, b)});
      }
      emit(std::string(axis) + "_tail.csv", csv);
    }
  } else if (cmd == "cycles") {
    if (res.contains("zeta_tail")) {
      const json& z = res["zeta_tail"];
      const auto t = z["t"].get<std::vector<double>>();
      const auto s = z["survival"].get<std::vector<double>>();
      const double c = z["c"].get<double>(), icpt = z["intercept"].get<double>();
      std::string csv = "t,log_surv,fit\n";
      for (std::size_t i = 0; i < t.size(); ++i) csv += detail::csv_row({t[i], std::log(s[i]), icpt - c * t[i]});
      emit("zeta_survival.csv", csv);
    }
  } else if (cmd == "stationary") {
    for (const char* which : {"renewal", "time_average"}) {
      const json& m = res[std::string("marginals_") + which];
      const auto ve = m["v_edges"].get<std::vector<double>>();
      const auto vm = m["v_mass"].get<std::vector<double>>();
      const auto he = m["h_edges"].get<std::vector<double>>();
      const auto hm = m["h_mass"].get<std::vector<double>>();
      double total = 0.0;
      for (double x : vm) total += x;
      require(total > 0.0, errc::empty_measure, std::string("empty-measure: ") + which + " measure has no mass");
      std::string csv = "axis,lo,hi,mass\n";
      for (std::size_t i = 0; i < hm.size(); ++i)
        csv += "h," + detail::csv_row({he[i], he[i + 1], hm[i]});
      for (std::size_t j = 0; j < vm.size(); ++j)
        csv += "v," + detail::csv_row({ve[j], ve[j + 1], vm[j]});
      emit(std::string("marginals_") + which + ".csv", csv);
    }
  } else if (cmd == "fluctuations") {
    std::string csv = "t,v_ratio,h_ratio\n";
    for (const auto& p : res["series"])
      csv += detail::csv_row({p["t"].get<double>(), p["v_ratio"].get<double>(), p["h_ratio"].get<double>()});
    emit("fluctuation_ratios.csv", csv);
  } else if (cmd == "ergodicity") {
    std::string csv = "init_h,init_v,t,tv,floor,fit\n";
    for (const auto& run : res["runs"]) {
      const auto t = run["times"].get<std::vector<double>>();
      const auto tv = run["tv"].get<std::vector<double>>();
      const auto idx = run["fit_indices"].get<std::vector<std::size_t>>();
      const double floor = std::max(run["noise_floor"].get<double>(), run["split_floor"].get<double>());
      const double slope = run["slope"].get<double>();
      // intercept through the centroid of the fitted points
      double xm = 0.0, ym = 0.0;
      for (std::size_t k : idx) {
        xm += t[k] / static_cast<double>(idx.size());
        ym += std::log(tv[k]) / static_cast<double>(idx.size());
      }
      for (std::size_t k = 0; k < t.size(); ++k) {
        const bool fitted = std::find(idx.begin(), idx.end(), k) != idx.end();
        csv += detail::csv_row({run["init"][0].get<double>(), run["init"][1].get<double>(), t[k], tv[k], floor,
                                fitted ? std::exp(ym + slope * (t[k] - xm)) : NAN});
      }
    }
    emit("tv_decay.csv", csv);
  } else if (cmd == "lln") {
    std::string csv = "seed_index,s_over_t,x_over_t\n";
    const auto s = res["s_over_t"].get<std::vector<double>>();
    const auto x = res["x_over_t"].get<std::vector<double>>();
    for (std::size_t i = 0; i < s.size(); ++i) csv += detail::csv_row({static_cast<double>(i), s[i], x[i]});
    emit("lln.csv", csv);
  } else if (cmd == "bounds") {
    std::string csv = "spec,setting,p_hat,wilson_lo,wilson_hi,bound,verdict\n";
    for (const auto& s : res["specs"]) {
      std::size_t i = 0;
      for (const auto& p : s["points"]) {
        csv += s["spec"].get<std::string>() + "," + std::to_string(i++) + "," +
               detail::csv_number(p["p_hat"].get<double>()) + "," +
               detail::csv_number(p["wilson99"][0].get<double>()) + "," +
               detail::csv_number(p["wilson99"][1].get<double>()) + "," +
               (p["bound"].is_null() ? std::string() : detail::csv_number(p["bound"].get<double>())) + "," +
               p["verdict"].get<std::string>() + "\n";
      }
    }
    emit("bounds.csv", csv);
  } else if (cmd == "convergence") {
    std::string csv = "dt,mean_error\n";
    for (const auto& l : res["levels"]) csv += detail::csv_row({l["dt"].get<double>(), l["mean_error"].get<double>()});
    emit("convergence.csv", csv);
  }
  return out;
}

// ------------------------------------------------------------------ run

inline int exit_code_for(const std::string& code) {
  if (code == errc::config || code == errc::invalid_argument) return 2;
  return 3;
}

inline json error_record(const std::string& code, const std::string& message) {
  return {{"error", {{"code", code}, {"message", message}, {"exit_status", exit_code_for(code)}}}};
}

/// Runs the configured command into cfg.output_dir (created if needed).
/// result.json holds only numbers derived from (config, seeds); the manifest
/// carries the wall time and timestamp.
inline json run(const ExperimentConfig& cfg) {
  validate_config(cfg);
  RunContext ctx;
  ctx.cfg = cfg;
  ctx.out = cfg.output_dir;
  ctx.lanes = resolve_workers(cfg.workers);
  std::error_code ec;
  std::filesystem::create_directories(ctx.out, ec);
  require(!ec, errc::io, "cannot create output directory " + ctx.out.string());

  const auto t0 = std::chrono::steady_clock::now();
  const std::time_t started = std::time(nullptr);
  json result;
  const std::string& cmd = cfg.command;
  if (cmd == "simulate") result = detail::run_simulate(ctx);
  else if (cmd == "cycles") result = detail::run_cycles(ctx);
  else if (cmd == "stationary") result = detail::run_stationary(ctx);
  else if (cmd == "tails") result = detail::run_tails(ctx);
  else if (cmd == "fluctuations") result = detail::run_fluctuations(ctx);
  else if (cmd == "lln") result = detail::run_lln(ctx);
  else if (cmd == "ergodicity") result = detail::run_ergodicity(ctx);
  else if (cmd == "bounds") result = detail::run_bounds(ctx);
  else if (cmd == "oracle") result = detail::run_oracle(ctx);
  else if (cmd == "convergence") result = detail::run_convergence(ctx);

  const json doc = {{"command", cmd},
                    {"params", to_json(cfg.params)},
                    {"dt", cfg.step.dt},
                    {"seed", cfg.seed},
                    {"lanes", ctx.lanes},
                    {"result", result}};
  detail::write_text(ctx.file("result.json"), doc.dump(2) + "\n");
  detail::write_text(ctx.file("config.ini"), serialize_config(cfg));
  for (const auto& f : emit_plot_data(ctx.out)) ctx.artifacts.push_back(f);

  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&started));
  const json manifest = {{"tool", "inertdrift"},
                         {"version", kVersion},
                         {"compiler", __VERSION__},
                         {"command", cmd},
                         {"config", serialize_config(cfg)},
                         {"lanes", ctx.lanes},
                         {"started_utc", stamp},
                         {"wall_time_s", wall},
                         {"artifacts", ctx.artifacts}};
  detail::write_text(ctx.out / "manifest.json", manifest.dump(2) + "\n");
  return doc;
}

}  // namespace inertdrift
