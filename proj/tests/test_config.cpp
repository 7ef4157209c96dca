#include <gtest/gtest.h>

#include "inertdrift/config.hpp"

using namespace inertdrift;

namespace {

std::string error_code(const std::string& text, bool validate = false) {
  try {
    const ExperimentConfig c = parse_config_string(text);
    if (validate) validate_config(c);
  } catch (const Error& e) {
    return e.code();
  }
  return "";
}

}  // namespace

TEST(Config, DefaultsRoundTrip) {
  const ExperimentConfig c;
  EXPECT_EQ(parse_config_string(serialize_config(c)), c);
}

TEST(Config, EditedValuesRoundTrip) {
  ExperimentConfig c;
  c.command = "ergodicity";
  c.seed = 18446744073709551615ull;
  c.workers = 7;
  c.params = ModelParams::make(0.3, 2.5);
  c.step.dt = 1.0 / 3.0 * 1e-3;
  c.ergodicity.init_h = {0.1, 2.0 / 3.0, 9.0};
  c.ergodicity.init_v = {-0.125, 1e-17, 3.0};
  c.tails.mills_correction = false;
  c.bounds.specs = "velocity_tail_exponential,cycle_gap_reaches_level_upper";
  const std::string text = serialize_config(c);
  const ExperimentConfig back = parse_config_string(text);
  EXPECT_EQ(back, c);
  EXPECT_EQ(serialize_config(back), text);
}

TEST(Config, PartialFileKeepsDefaults) {
  const ExperimentConfig c = parse_config_string("[experiment]\ncommand = lln\n[lln]\nn_seeds = 3\n");
  EXPECT_EQ(c.command, "lln");
  EXPECT_EQ(c.lln.n_seeds, 3u);
  EXPECT_EQ(c.lln.horizon, LlnSection{}.horizon);
  EXPECT_EQ(c.params, ModelParams{});
}

TEST(Config, RejectsUnknownKey) { EXPECT_EQ(error_code("[model]\ngamma = 1\nbeta = 2\n"), errc::config); }

TEST(Config, RejectsUnknownSection) { EXPECT_EQ(error_code("[solver]\ndt = 1\n"), errc::config); }

TEST(Config, RejectsKeyOutsideSection) { EXPECT_EQ(error_code("gamma = 1\n"), errc::config); }

TEST(Config, RejectsMalformedNumbers) {
  EXPECT_EQ(error_code("[model]\ngamma = 1.0x\n"), errc::config);
  EXPECT_EQ(error_code("[experiment]\nseed = -3\n"), errc::config);
  EXPECT_EQ(error_code("[tails]\nmills_correction = yes\n"), errc::config);
}

TEST(Config, AcceptsEmptySection) { EXPECT_EQ(error_code("[model]\n[step]\ndt = 0.001\n"), ""); }

TEST(Config, GammaZeroWithRenewalCommandIsRejected) {
  EXPECT_EQ(error_code("[experiment]\ncommand = cycles\n[model]\ngamma = 0\n", true), errc::config);
  EXPECT_EQ(error_code("[experiment]\ncommand = cycles\n[model]\ngamma = 0\ngamma_zero_mode = true\n", true),
            errc::config);
}

TEST(Config, OracleNeedsGammaZeroMode) {
  EXPECT_EQ(error_code("[experiment]\ncommand = oracle\n", true), errc::config);
  EXPECT_EQ(error_code("[experiment]\ncommand = oracle\n[model]\ngamma = 0\ngamma_zero_mode = true\n", true), "");
}

TEST(Config, SemanticChecks) {
  EXPECT_EQ(error_code("[experiment]\ncommand = fly\n", true), errc::config);
  EXPECT_EQ(error_code("[experiment]\nworkers = 0\n", true), errc::config);
  EXPECT_EQ(error_code("[step]\ndt = 2\n", true), errc::config);
  EXPECT_EQ(error_code("[experiment]\ncommand = bounds\n[bounds]\nn_trials = 999\n", true), errc::config);
  EXPECT_EQ(error_code("[ergodicity]\ninit_h = 1, 2\ninit_v = 0\n", true), errc::config);
  EXPECT_EQ(error_code("[experiment]\ncommand = fluctuations\n[fluctuations]\nhorizon = 20\n", true), errc::config);
}
