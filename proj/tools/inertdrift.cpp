// inertdrift <command> --config <file> [--seed N] [--workers K] [--out DIR]
// inertdrift plot --in DIR

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "inertdrift/experiment.hpp"

namespace fs = std::filesystem;
using namespace inertdrift;

namespace {

int report_failure(const std::string& code, const std::string& message, const std::optional<fs::path>& dir) {
  const json rec = error_record(code, message);
  std::cerr << rec.dump() << '\n';
  if (dir) {
    std::error_code ec;
    fs::create_directories(*dir, ec);
    std::ofstream os(*dir / "error.json");
    if (os) os << rec.dump(2) << '\n';
  }
  return exit_code_for(code);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulation and analysis of a Brownian particle pushing an inert particle"};
  app.require_subcommand(1);

  std::string config_path, out_dir, in_dir;
  std::optional<std::uint64_t> seed, workers;
  std::string chosen;

  for (const auto& name : command_names()) {
    CLI::App* sub = app.add_subcommand(name, "run the " + name + " experiment");
    sub->add_option("--config", config_path, "INI configuration file")->required();
    sub->add_option("--seed", seed, "base seed (overrides [experiment] seed)");
    sub->add_option("--workers", workers, "simulation lanes (overrides [experiment] workers)")
        ->check(CLI::PositiveNumber);
    sub->add_option("--out", out_dir, "output directory (overrides [experiment] output_dir)");
    sub->callback([&chosen, name] { chosen = name; });
  }
  CLI::App* plot = app.add_subcommand("plot", "write plot-ready CSV files from an existing result directory");
  plot->add_option("--in", in_dir, "result directory")->required();
  plot->callback([&chosen] { chosen = "plot"; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_failure(errc::config, e.what(), std::nullopt);
  }

  if (chosen == "plot") {
    try {
      for (const auto& f : emit_plot_data(in_dir)) std::cout << (fs::path(in_dir) / f).string() << '\n';
      return 0;
    } catch (const Error& e) {
      return report_failure(e.code(), e.what(), std::nullopt);
    } catch (const std::exception& e) {
      return report_failure(errc::io, e.what(), std::nullopt);
    }
  }

  std::optional<fs::path> out;
  if (!out_dir.empty()) out = out_dir;
  try {
    std::ifstream is(config_path);
    require(static_cast<bool>(is), errc::config, "cannot open config file " + config_path);
    ExperimentConfig cfg = parse_config(is);
    if (cfg.command != chosen)
      throw Error(errc::config, "config command '" + cfg.command + "' does not match '" + chosen + "'");
    if (seed) cfg.seed = *seed;
    if (workers) cfg.workers = *workers;
    if (out) cfg.output_dir = out->string();
    out = fs::path(cfg.output_dir);
    const json doc = run(cfg);
    std::cout << "wrote " << (*out / "result.json").string() << '\n';
    return 0;
  } catch (const Error& e) {
    return report_failure(e.code(), e.what(), out);
  } catch (const std::exception& e) {
    return report_failure(errc::numeric, e.what(), out);
  }
}
