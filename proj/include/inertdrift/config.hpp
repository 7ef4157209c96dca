#pragma once

// Experiment configuration: a flat INI file with one section per module.
// Every key belongs to a fixed schema; unknown sections or keys are errors.
// serialize() writes every field in schema order with shortest round-trip
// number formatting, so parse(serialize(c)) == c.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <system_error>
#include <utility>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "inertdrift/core_model.hpp"
#include "inertdrift/error.hpp"
#include "inertdrift/integrator.hpp"

namespace inertdrift {

inline const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = {"simulate", "cycles",    "stationary", "tails",  "fluctuations",
                                                 "lln",      "ergodicity", "bounds",     "oracle", "convergence"};
  return names;
}

struct SimulateSection {
  double horizon = 10.0;
  double h0 = 0.0;
  double v0 = -0.5;
  friend bool operator==(const SimulateSection&, const SimulateSection&) = default;
};

struct CyclesSection {
  std::uint64_t n_cycles = 10000;
  double t_cap_per_cycle = 1000.0;
  double abort_budget = 1e-4;  // maximal tolerated fraction of aborted cycles
  friend bool operator==(const CyclesSection&, const CyclesSection&) = default;
};

struct StationarySection {
  std::uint64_t n_cycles = 10000;
  std::uint64_t bins_h = 200;
  std::uint64_t bins_v = 200;
  double pilot_horizon = 2000.0;
  double pilot_quantile = 1e-4;
  double burn_in = 0.0;
  double h0 = 0.0;  // start of the time-average path
  double v0 = 0.0;
  friend bool operator==(const StationarySection&, const StationarySection&) = default;
};

struct TailsSection {
  std::uint64_t n_cycles = 100000;
  double v_span = 4.0;
  double h_span = 20.0;
  std::uint64_t bins = 4000;
  std::uint64_t groups = 32;
  double p_hi = 0.1;
  double p_lo = 1e-5;
  std::uint64_t n_levels = 12;
  std::uint64_t min_units = 200;
  double level = 0.95;
  bool mills_correction = true;
  friend bool operator==(const TailsSection&, const TailsSection&) = default;
};

struct FluctuationsSection {
  double horizon = 1e4;
  std::uint64_t n_checkpoints = 20;
  double upper_slack = 1.1;
  double lower_slack = 0.5;
  double h0 = 0.0;
  double v0 = -0.5;
  friend bool operator==(const FluctuationsSection&, const FluctuationsSection&) = default;
};

struct LlnSection {
  double horizon = 1e5;
  std::uint64_t n_seeds = 20;
  double tolerance = 0.02;
  friend bool operator==(const LlnSection&, const LlnSection&) = default;
};

struct ErgodicitySection {
  std::vector<double> init_h = {5.0, 3.0};
  std::vector<double> init_v = {2.0, -0.9};
  double t_max = 20.0;
  double t_step = 0.5;
  std::uint64_t n_chains = 10000;
  std::uint64_t n_cycles = 20000;
  std::uint64_t bins = 40;
  friend bool operator==(const ErgodicitySection&, const ErgodicitySection&) = default;
};

struct BoundsSection {
  std::uint64_t n_trials = 10000;
  std::string specs = "all";  // comma-separated spec names or "all"
  friend bool operator==(const BoundsSection&, const BoundsSection&) = default;
};

struct OracleSection {
  std::uint64_t n_samples = 10000;
  double horizon = 20.0;
  double refine_span = 1.0;
  double refine_dt = 1e-5;
  bool negative_control = true;  // also test gamma = 1 samples
  friend bool operator==(const OracleSection&, const OracleSection&) = default;
};

struct ConvergenceSection {
  double horizon = 1.0;
  double dt_coarse = 1.0 / 32.0;
  std::uint64_t levels = 5;  // dt_coarse / 2^k for k < levels, each against dt / 16
  std::uint64_t n_paths = 200;
  double h0 = 5.0;
  double v0 = 0.0;
  friend bool operator==(const ConvergenceSection&, const ConvergenceSection&) = default;
};

struct ExperimentConfig {
  std::string command = "simulate";
  std::uint64_t seed = 1;
  std::uint64_t workers = 1;
  std::string output_dir = "out";
  ModelParams params;
  StepConfig step;
  SimulateSection simulate;
  CyclesSection cycles;
  StationarySection stationary;
  TailsSection tails;
  FluctuationsSection fluctuations;
  LlnSection lln;
  ErgodicitySection ergodicity;
  BoundsSection bounds;
  OracleSection oracle;
  ConvergenceSection convergence;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// Calls v(section, key, field) for every configurable field, in file order.
template <class Cfg, class V>
void visit_fields(Cfg& c, V&& v) {
  v("experiment", "command", c.command);
  v("experiment", "seed", c.seed);
  v("experiment", "workers", c.workers);
  v("experiment", "output_dir", c.output_dir);
  v("model", "gamma", c.params.gamma);
  v("model", "g", c.params.g);
  v("model", "gamma_zero_mode", c.params.gamma_zero_mode);
  v("step", "dt", c.step.dt);
  v("step", "max_steps", c.step.max_steps);
  v("step", "record_stride", c.step.record_stride);
  v("simulate", "horizon", c.simulate.horizon);
  v("simulate", "h0", c.simulate.h0);
  v("simulate", "v0", c.simulate.v0);
  v("cycles", "n_cycles", c.cycles.n_cycles);
  v("cycles", "t_cap_per_cycle", c.cycles.t_cap_per_cycle);
  v("cycles", "abort_budget", c.cycles.abort_budget);
  v("stationary", "n_cycles", c.stationary.n_cycles);
  v("stationary", "bins_h", c.stationary.bins_h);
  v("stationary", "bins_v", c.stationary.bins_v);
  v("stationary", "pilot_horizon", c.stationary.pilot_horizon);
  v("stationary", "pilot_quantile", c.stationary.pilot_quantile);
  v("stationary", "burn_in", c.stationary.burn_in);
  v("stationary", "h0", c.stationary.h0);
  v("stationary", "v0", c.stationary.v0);
  v("tails", "n_cycles", c.tails.n_cycles);
  v("tails", "v_span", c.tails.v_span);
  v("tails", "h_span", c.tails.h_span);
  v("tails", "bins", c.tails.bins);
  v("tails", "groups", c.tails.groups);
  v("tails", "p_hi", c.tails.p_hi);
  v("tails", "p_lo", c.tails.p_lo);
  v("tails", "n_levels", c.tails.n_levels);
  v("tails", "min_units", c.tails.min_units);
  v("tails", "level", c.tails.level);
  v("tails", "mills_correction", c.tails.mills_correction);
  v("fluctuations", "horizon", c.fluctuations.horizon);
  v("fluctuations", "n_checkpoints", c.fluctuations.n_checkpoints);
  v("fluctuations", "upper_slack", c.fluctuations.upper_slack);
  v("fluctuations", "lower_slack", c.fluctuations.lower_slack);
  v("fluctuations", "h0", c.fluctuations.h0);
  v("fluctuations", "v0", c.fluctuations.v0);
  v("lln", "horizon", c.lln.horizon);
  v("lln", "n_seeds", c.lln.n_seeds);
  v("lln", "tolerance", c.lln.tolerance);
  v("ergodicity", "init_h", c.ergodicity.init_h);
  v("ergodicity", "init_v", c.ergodicity.init_v);
  v("ergodicity", "t_max", c.ergodicity.t_max);
  v("ergodicity", "t_step", c.ergodicity.t_step);
  v("ergodicity", "n_chains", c.ergodicity.n_chains);
  v("ergodicity", "n_cycles", c.ergodicity.n_cycles);
  v("ergodicity", "bins", c.ergodicity.bins);
  v("bounds", "n_trials", c.bounds.n_trials);
  v("bounds", "specs", c.bounds.specs);
  v("oracle", "n_samples", c.oracle.n_samples);
  v("oracle", "horizon", c.oracle.horizon);
  v("oracle", "refine_span", c.oracle.refine_span);
  v("oracle", "refine_dt", c.oracle.refine_dt);
  v("oracle", "negative_control", c.oracle.negative_control);
  v("convergence", "horizon", c.convergence.horizon);
  v("convergence", "dt_coarse", c.convergence.dt_coarse);
  v("convergence", "levels", c.convergence.levels);
  v("convergence", "n_paths", c.convergence.n_paths);
  v("convergence", "h0", c.convergence.h0);
  v("convergence", "v0", c.convergence.v0);
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::string where(const std::string& section, const std::string& key) { return "[" + section + "] " + key; }

inline void parse_value(const std::string& text, const std::string&, std::string& out) { out = text; }

inline void parse_value(const std::string& text, const std::string& at, bool& out) {
  if (text == "true") {
    out = true;
  } else if (text == "false") {
    out = false;
  } else {
    throw Error(errc::config, at + ": expected true or false, got '" + text + "'");
  }
}

template <class T>
  requires std::is_arithmetic_v<T>
void parse_value(const std::string& text, const std::string& at, T& out) {
  T v{};
  const char* b = text.data();
  const char* e = b + text.size();
  const auto [ptr, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || ptr != e || text.empty())
    throw Error(errc::config, at + ": cannot parse '" + text + "' as a number");
  out = v;
}

inline void parse_value(const std::string& text, const std::string& at, std::vector<double>& out) {
  out.clear();
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    double v = 0.0;
    parse_value(trim(item), at, v);
    out.push_back(v);
  }
  if (out.empty()) throw Error(errc::config, at + ": empty list");
}

inline std::string format_value(const std::string& v) { return v; }
inline std::string format_value(bool v) { return v ? "true" : "false"; }

template <class T>
  requires std::is_arithmetic_v<T>
std::string format_value(T v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, ptr);
}

inline std::string format_value(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + format_value(v[i]);
  return s;
}

}  // namespace detail

/// Strict parse; fields absent from the file keep their defaults.
inline ExperimentConfig parse_config(std::istream& is) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::ini_parser::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw Error(errc::config, std::string("config syntax: ") + e.what());
  }
  ExperimentConfig c;
  std::set<std::pair<std::string, std::string>> known;
  visit_fields(c, [&](const char* s, const char* k, auto&) { known.emplace(s, k); });
  for (const auto& [section, body] : tree) {
    if (!body.data().empty())
      throw Error(errc::config, "config: key '" + section + "' outside any section");
    bool section_known = false;
    for (const auto& kk : known) section_known |= kk.first == section;
    if (!section_known) throw Error(errc::config, "config: unknown section [" + section + "]");
    for (const auto& [key, value] : body) {
      if (!known.count({section, key})) throw Error(errc::config, "config: unknown key " + detail::where(section, key));
      (void)value;
    }
  }
  visit_fields(c, [&](const char* s, const char* k, auto& field) {
    const auto v = tree.get_optional<std::string>(pt::ptree::path_type(std::string(s) + "." + k, '.'));
    if (v) detail::parse_value(detail::trim(*v), detail::where(s, k), field);
  });
  return c;
}

inline ExperimentConfig parse_config_string(const std::string& text) {
  std::istringstream is(text);
  return parse_config(is);
}

inline std::string serialize_config(const ExperimentConfig& cfg) {
  ExperimentConfig c = cfg;
  std::string out, section;
  visit_fields(c, [&](const char* s, const char* k, auto& field) {
    if (section != s) {
      if (!section.empty()) out += '\n';
      section = s;
      out += "[" + section + "]\n";
    }
    out += std::string(k) + " = " + detail::format_value(field) + '\n';
  });
  return out;
}

inline bool command_uses_renewal(const std::string& cmd) {
  return cmd == "cycles" || cmd == "stationary" || cmd == "tails" || cmd == "ergodicity" || cmd == "bounds";
}

/// Semantic checks; every failure is a config error.
inline void validate_config(const ExperimentConfig& c) {
  auto fail = [](const std::string& m) { throw Error(errc::config, m); };
  bool known = false;
  for (const auto& n : command_names()) known |= n == c.command;
  if (!known) fail("config: unknown command '" + c.command + "'");
  if (c.workers < 1) fail("config: workers must be >= 1");
  try {
    c.params.validate();
    c.step.validate(c.params);
  } catch (const Error& e) {
    fail(std::string("config: ") + e.what());
  }
  if (c.params.gamma_zero_mode && command_uses_renewal(c.command))
    fail("config: command '" + c.command + "' needs renewal constants, which are undefined in gamma-zero mode");
  if (c.command == "oracle" && !c.params.gamma_zero_mode) fail("config: oracle requires gamma_zero_mode = true");
  if (c.command == "fluctuations" && c.fluctuations.horizon < 10.0 * std::exp(1.0))
    fail("config: fluctuations horizon must be at least 10e");
  if (c.ergodicity.init_h.size() != c.ergodicity.init_v.size())
    fail("config: ergodicity init_h and init_v must have the same length");
  if (c.command == "bounds" && c.bounds.n_trials < 10000) fail("config: bounds n_trials must be >= 10000");
  if (c.command == "cycles" && c.cycles.n_cycles < 1) fail("config: cycles n_cycles must be >= 1");
  if (c.command == "oracle" && c.oracle.n_samples < 100) fail("config: oracle n_samples must be >= 100");
  if (c.command == "convergence" && c.convergence.levels < 2) fail("config: convergence needs at least 2 levels");
}

}  // namespace inertdrift
