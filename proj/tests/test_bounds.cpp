#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "inertdrift/bounds.hpp"

using namespace inertdrift;

namespace {

const ModelParams kUnit = ModelParams::make(1.0, 1.0);
const std::vector<BoundSpec> kSpecs = registry();

StepConfig step(double dt) {
  StepConfig c;
  c.dt = dt;
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

BoundReport synthetic_point(double p, std::uint64_t n) {
  BoundReport r;
  r.n_trials = n;
  r.successes = static_cast<std::uint64_t>(std::llround(p * static_cast<double>(n)));
  r.p_hat = static_cast<double>(r.successes) / static_cast<double>(n);
  return r;
}

}  // namespace

TEST(Registry, AtLeastTenWellFormedSpecs) {
  const auto specs = registry();
  EXPECT_GE(specs.size(), 10u);
  std::set<std::string> names;
  for (const BoundSpec& s : specs) {
    EXPECT_TRUE(names.insert(s.name).second) << s.name;
    EXPECT_FALSE(s.statement.empty()) << s.name;
    EXPECT_TRUE(static_cast<bool>(s.trial)) << s.name;
    EXPECT_TRUE(static_cast<bool>(s.validity)) << s.name;
    EXPECT_GE(s.default_trials, kMinBoundTrials) << s.name;
    if (s.mode == BoundMode::shape) {
      EXPECT_TRUE(static_cast<bool>(s.abscissa)) << s.name;
      EXPECT_TRUE(static_cast<bool>(s.exponent)) << s.name;
    }
  }
}

TEST(Registry, DefaultSettingsAreValid) {
  for (const ModelParams& p : {kUnit, ModelParams::make(2.0, 1.0), ModelParams::make(0.5, 2.0)})
    for (const BoundSpec& s : registry()) {
      const auto settings = s.default_settings(p);
      EXPECT_GE(settings.size(), 3u) << s.name;
      for (const BoundArgs& a : settings) EXPECT_NO_THROW(s.validity(p, a)) << s.name;
    }
}

TEST(Registry, UnknownSpec) {
  EXPECT_EQ(code_of([] { (void)find_spec(kSpecs, "no_such_bound"); }), errc::invalid_argument);
}

TEST(BoundFn, VelocityTailClampsAtZeroTime) {
  const BoundSpec& s = find_spec(kSpecs, "velocity_tail_exponential");
  EXPECT_EQ(s.bound_fn(kUnit, {{"u", 0.5}, {"nu", 1.5}, {"t", 0.0}, {"h", 0.0}}), 1.0);
  const double b = s.bound_fn(kUnit, {{"u", 0.5}, {"nu", 1.5}, {"t", 1.0}, {"h", 0.0}});
  EXPECT_DOUBLE_EQ(b, std::exp(-2.0 * 0.5 * (0.5 - 1.5 + 1.5)));
}

TEST(BoundFn, GapLevelsAtDomainEdges) {
  const BoundSpec& up = find_spec(kSpecs, "gap_reaches_level_before_zero_upper");
  const BoundSpec& lo = find_spec(kSpecs, "gap_reaches_level_before_zero_lower");
  for (double x : {1e-9, 1.0, 50.0}) {
    EXPECT_LE(up.bound_fn(kUnit, {{"x", x}, {"nu", 0.0}}), 1.0);
    EXPECT_LE(lo.bound_fn(kUnit, {{"x", x}}), up.bound_fn(kUnit, {{"x", x}}));
  }
  EXPECT_DOUBLE_EQ(up.bound_fn(kUnit, {{"x", 4.0}}), std::exp(-2.0));
}

TEST(Validity, RejectsOutsideDomain) {
  const auto specs = registry();
  const BoundSpec& tail = find_spec(specs, "velocity_tail_exponential");
  EXPECT_EQ(code_of([&] { tail.validity(kUnit, {{"u", 0.5}, {"nu", 0.4}, {"t", 1.0}, {"h", 0.0}}); }),
            errc::invalid_argument);
  EXPECT_EQ(code_of([&] { tail.validity(kUnit, {{"u", 0.5}, {"nu", 1.0}, {"t", -1.0}, {"h", 0.0}}); }),
            errc::invalid_argument);
  EXPECT_EQ(code_of([&] { tail.validity(kUnit, {{"u", 0.5}}); }), errc::invalid_argument);
  const BoundSpec& up = find_spec(specs, "gap_reaches_level_before_zero_upper");
  // nu above gamma x/4 - g/gamma
  EXPECT_EQ(code_of([&] { up.validity(kUnit, {{"x", 4.0}, {"nu", 0.5}}); }), errc::invalid_argument);
}

TEST(RunBound, TrialCountFloor) {
  const BoundSpec& s = find_spec(kSpecs, "gap_reaches_level_before_zero_upper");
  BoundRunOptions o;
  o.n_trials = 9999;
  EXPECT_EQ(code_of([&] { (void)run_bound(s, kUnit, {{"x", 4.0}, {"nu", 0.0}}, step(1e-3), 1, 0, o); }),
            errc::invalid_argument);
}

TEST(RunBound, InvalidArgsRejectedBeforeSimulation) {
  const BoundSpec& s = find_spec(kSpecs, "gap_reaches_level_before_zero_upper");
  EXPECT_EQ(code_of([&] { (void)run_bound(s, kUnit, {{"x", -1.0}, {"nu", 0.0}}, step(1e-3), 1, 0); }),
            errc::invalid_argument);
}

TEST(RunBound, GapLevelUpperHolds) {
  const BoundSpec& s = find_spec(kSpecs, "gap_reaches_level_before_zero_upper");
  const BoundReport r = run_bound(s, kUnit, {{"x", 4.0}, {"nu", 0.0}}, step(1e-3), 3, 0);
  EXPECT_EQ(r.n_trials, kMinBoundTrials);
  ASSERT_TRUE(r.bound_value.has_value());
  EXPECT_DOUBLE_EQ(*r.bound_value, std::exp(-2.0));
  EXPECT_LE(r.wilson.lo, r.p_hat);
  EXPECT_GE(r.wilson.hi, r.p_hat);
  EXPECT_EQ(r.verdict, Verdict::pass);
}

TEST(RunBound, CountsIndependentOfLanes) {
  const BoundSpec& s = find_spec(kSpecs, "velocity_tail_exponential");
  const BoundArgs a{{"u", 0.5}, {"nu", 1.5}, {"t", 1.0}, {"h", 0.0}};
  BoundRunOptions one, three;
  three.lanes = 3;
  three.threads = 3;
  const BoundReport x = run_bound(s, kUnit, a, step(1e-3), 8, 1, one);
  const BoundReport y = run_bound(s, kUnit, a, step(1e-3), 8, 1, three);
  EXPECT_EQ(x.successes, y.successes);
  EXPECT_EQ(x.truncated, y.truncated);
}

TEST(FitShape, ExactExponentialDecay) {
  const std::vector<double> x{1.0, 2.0, 3.0, 4.0};
  std::vector<BoundReport> pts;
  for (double xi : x) pts.push_back(synthetic_point(std::exp(-xi), 100000000));
  Verdict v = Verdict::inconclusive;
  const ShapeSummary s = fit_shape(x, pts, 1.0, BoundDirection::upper, v);
  EXPECT_NEAR(s.slope, -1.0, 1e-3);
  EXPECT_TRUE(s.tight);
  EXPECT_EQ(v, Verdict::pass);
  (void)fit_shape(x, pts, 3.0, BoundDirection::upper, v);
  EXPECT_EQ(v, Verdict::fail);
  (void)fit_shape(x, pts, 0.5, BoundDirection::lower, v);
  EXPECT_EQ(v, Verdict::fail);
  (void)fit_shape(x, pts, 0.0, BoundDirection::upper, v);
  EXPECT_EQ(v, Verdict::pass);
}

TEST(FitShape, DegenerateAbscissa) {
  const std::vector<double> x{1.0, 1.0, 1.0};
  const std::vector<BoundReport> pts(3, synthetic_point(0.1, 10000));
  Verdict v;
  EXPECT_EQ(code_of([&] { (void)fit_shape(x, pts, 1.0, BoundDirection::upper, v); }), errc::invalid_argument);
}

TEST(RunSpec, NeedsThreeSettings) {
  const BoundSpec& s = find_spec(kSpecs, "gap_reaches_level_before_zero_upper");
  EXPECT_EQ(code_of([&] {
              (void)run_spec(s, kUnit, step(1e-3), 1, {}, {{{"x", 4.0}, {"nu", 0.0}}, {{"x", 5.0}, {"nu", 0.0}}});
            }),
            errc::invalid_argument);
}
