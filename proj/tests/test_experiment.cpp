#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "inertdrift/experiment.hpp"

using namespace inertdrift;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("inertdrift_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::string first_line(const fs::path& p) {
  std::ifstream is(p);
  std::string line;
  std::getline(is, line);
  return line;
}

ExperimentConfig small_cycles(const fs::path& out) {
  ExperimentConfig c;
  c.command = "cycles";
  c.workers = 2;
  c.cycles.n_cycles = 300;
  c.output_dir = out.string();
  return c;
}

std::string code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return "";
}

}  // namespace

TEST(Run, RerunIsByteIdentical) {
  const fs::path a = scratch("rerun_a"), b = scratch("rerun_b");
  (void)run(small_cycles(a));
  (void)run(small_cycles(b));
  EXPECT_EQ(slurp(a / "result.json"), slurp(b / "result.json"));
  EXPECT_EQ(slurp(a / "cycles.dat"), slurp(b / "cycles.dat"));
  EXPECT_EQ(slurp(a / "zeta_survival.csv"), slurp(b / "zeta_survival.csv"));
}

TEST(Run, ArtifactsAndManifest) {
  const fs::path d = scratch("manifest");
  const json doc = run(small_cycles(d));
  EXPECT_EQ(doc["command"], "cycles");
  EXPECT_EQ(doc["result"]["n_cycles"], 300);
  const json m = json::parse(slurp(d / "manifest.json"));
  for (const char* k : {"tool", "version", "compiler", "command", "config", "lanes", "started_utc", "wall_time_s",
                        "artifacts"})
    EXPECT_TRUE(m.contains(k)) << k;
  for (const auto& f : m["artifacts"]) EXPECT_TRUE(fs::exists(d / f.get<std::string>())) << f;
  EXPECT_EQ(parse_config_string(m["config"].get<std::string>()), small_cycles(d));
  EXPECT_EQ(parse_config_string(slurp(d / "config.ini")), small_cycles(d));
  EXPECT_EQ(first_line(d / "zeta_survival.csv"), "t,log_surv,fit");
}

TEST(Run, SimulateWritesTrajectory) {
  const fs::path d = scratch("simulate");
  ExperimentConfig c;
  c.simulate.horizon = 1.0;
  c.output_dir = d.string();
  const json doc = run(c);
  EXPECT_EQ(doc["result"]["steps"], std::llround(c.simulate.horizon / c.step.dt));
  EXPECT_TRUE(fs::exists(d / "trajectory.csv"));
}

TEST(Run, LlnPlotColumns) {
  const fs::path d = scratch("lln");
  ExperimentConfig c;
  c.command = "lln";
  c.lln.horizon = 20.0;
  c.lln.n_seeds = 3;
  c.output_dir = d.string();
  (void)run(c);
  EXPECT_EQ(first_line(d / "lln.csv"), "seed_index,s_over_t,x_over_t");
}

TEST(Run, InvalidConfigRejected) {
  ExperimentConfig c = small_cycles(scratch("invalid"));
  c.params.gamma = 0.0;
  EXPECT_EQ(code_of([&] { (void)run(c); }), errc::config);
}

TEST(PlotData, MissingResult) {
  EXPECT_EQ(code_of([] { (void)emit_plot_data(scratch("missing")); }), errc::missing_artifact);
}

TEST(PlotData, EmptyTailLevels) {
  const fs::path d = scratch("empty_tail");
  fs::create_directories(d);
  const json empty_fit = {{"levels", json::array()}, {"abscissa", json::array()}, {"log_surv", json::array()},
                          {"response", json::array()}, {"slope", 0.0}, {"intercept", 0.0}, {"ci", {0.0, 0.0}}};
  std::ofstream(d / "result.json") << json{{"command", "tails"}, {"result", {{"velocity", empty_fit}, {"gap", empty_fit}}}}.dump();
  EXPECT_EQ(code_of([&] { (void)emit_plot_data(d); }), errc::empty_measure);
}

TEST(PlotData, ZeroMassMarginals) {
  const fs::path d = scratch("empty_marginal");
  fs::create_directories(d);
  const json m = {{"h_edges", {0.0, 1.0}}, {"h_mass", {0.0}}, {"v_edges", {0.0, 1.0}}, {"v_mass", {0.0}}};
  std::ofstream(d / "result.json")
      << json{{"command", "stationary"}, {"result", {{"marginals_renewal", m}, {"marginals_time_average", m}}}}.dump();
  EXPECT_EQ(code_of([&] { (void)emit_plot_data(d); }), errc::empty_measure);
}

TEST(ErrorRecord, ExitCodes) {
  EXPECT_EQ(exit_code_for(errc::config), 2);
  EXPECT_EQ(exit_code_for(errc::invalid_argument), 2);
  for (const char* c : {errc::insufficient_data, errc::empty_measure, errc::missing_artifact, errc::numeric,
                        errc::abort_budget, errc::io})
    EXPECT_EQ(exit_code_for(c), 3) << c;
  const json r = error_record(errc::empty_measure, "nothing here");
  EXPECT_EQ(r["error"]["code"], "empty-measure");
  EXPECT_EQ(r["error"]["message"], "nothing here");
  EXPECT_EQ(r["error"]["exit_status"], 3);
}
