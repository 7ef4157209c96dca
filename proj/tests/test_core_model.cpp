#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "inertdrift/core_model.hpp"

using namespace inertdrift;

TEST(RenewalConfig, UnitParameters) {
  const RenewalConfig rc = derive_renewal_config(ModelParams::make(1.0, 1.0));
  EXPECT_DOUBLE_EQ(rc.a, -0.75);
  EXPECT_DOUBLE_EQ(rc.b, -0.375);
  EXPECT_DOUBLE_EQ(rc.renewal_v, -0.5);
}

TEST(RenewalConfig, GammaTwo) {
  const RenewalConfig rc = derive_renewal_config(ModelParams::make(2.0, 1.0));
  EXPECT_NEAR(rc.renewal_v, -1.0 / 3.0, 1e-15);
  EXPECT_NEAR(rc.a, -1.25 / 3.0, 1e-15);
  EXPECT_NEAR(rc.b, -(1.0 - 1.0 / 6.0) / 3.0, 1e-15);
}

TEST(ModelParams, RejectsNonPositiveG) {
  try {
    (void)ModelParams::make(1.0, 0.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_STREQ(e.code().c_str(), errc::invalid_argument);
  }
  EXPECT_THROW((void)ModelParams::make(0.0, 1.0), Error);
  EXPECT_THROW((void)ModelParams::make(-1.0, 1.0), Error);
}

TEST(RenewalConfig, RejectsGammaZeroMode) {
  EXPECT_THROW((void)derive_renewal_config(ModelParams::gamma_zero(1.0)), Error);
}

TEST(RenewalConfig, OrderingOnParameterGrid) {
  const double vals[] = {0.1, 0.5, 1.0, 2.0, 10.0};
  for (double gm : vals)
    for (double g : vals) {
      const ModelParams p = ModelParams::make(gm, g);
      const RenewalConfig rc = derive_renewal_config(p);
      EXPECT_LT(-g / gm, rc.a) << gm << ' ' << g;
      EXPECT_LT(rc.a, -g / (1.0 + gm));
      EXPECT_EQ(rc.renewal_v, -g / (1.0 + gm));
      EXPECT_LT(rc.renewal_v, rc.b);
      EXPECT_LT(rc.b, 0.0);
    }
}

TEST(InteriorVelocity, Examples) {
  const ModelParams p = ModelParams::make(1.0, 1.0);
  EXPECT_NEAR(interior_velocity(p, 1.0, std::numbers::ln2), 0.0, 1e-15);
  EXPECT_EQ(interior_velocity(p, -0.5, INFINITY), -1.0);
  EXPECT_NEAR(interior_velocity(p, -0.5, 60.0), -1.0, 1e-15);
  EXPECT_EQ(interior_velocity(ModelParams::make(2.0, 1.0), 0.0, 0.0), 0.0);
}

TEST(InteriorVelocity, StrictlyDecreasingAboveFloor) {
  const ModelParams p = ModelParams::make(0.7, 1.3);
  double prev = interior_velocity(p, 0.4, 0.0);
  for (int i = 1; i <= 100; ++i) {
    const double v = interior_velocity(p, 0.4, 0.05 * i);
    EXPECT_LT(v, prev);
    EXPECT_GT(v, p.velocity_floor());
    prev = v;
  }
}

TEST(InteriorVelocity, GammaZeroIsLinear) {
  EXPECT_DOUBLE_EQ(interior_velocity(ModelParams::gamma_zero(2.0), 1.0, 0.25), 0.5);
}

TEST(InteriorHittingTime, Examples) {
  const ModelParams p = ModelParams::make(1.0, 1.0);
  EXPECT_NEAR(interior_hitting_time(p, 1.0, 0.0), std::numbers::ln2, 1e-15);
  EXPECT_NEAR(interior_hitting_time(p, 0.0, -0.5), std::numbers::ln2, 1e-15);
  EXPECT_THROW((void)interior_hitting_time(p, 1.0, -1.0), Error);
  EXPECT_THROW((void)interior_hitting_time(p, 1.0, 1.0), Error);
  EXPECT_THROW((void)interior_hitting_time(p, 1.0, 2.0), Error);
}

TEST(InteriorHittingTime, CompositionIsIdentity) {
  const double vals[] = {0.1, 0.5, 1.0, 2.0, 10.0};
  for (double gm : vals)
    for (double g : vals) {
      const ModelParams p = ModelParams::make(gm, g);
      const double fl = p.velocity_floor();
      for (double v0 : {fl + 0.3, 0.0, 2.0, 17.0})
        for (double frac : {0.01, 0.3, 0.9, 0.999}) {
          const double a = fl + frac * (v0 - fl);
          const double t = interior_hitting_time(p, v0, a);
          EXPECT_GT(t, 0.0);
          EXPECT_NEAR(interior_velocity(p, v0, t), a, 1e-12 * std::max(1.0, std::fabs(a)));
        }
    }
}

TEST(SystemState, MakeStateSetsGap) {
  const SystemState s = make_state(2.0, -0.3);
  EXPECT_EQ(s.h, 2.0);
  EXPECT_EQ(s.x, -2.0);
  EXPECT_EQ(s.s - s.x, s.h);
  EXPECT_THROW((void)make_state(-1.0, 0.0), Error);
  EXPECT_THROW((void)make_state(NAN, 0.0), Error);
}

TEST(SystemState, VelocityMustExceedFloor) {
  const ModelParams p = ModelParams::make(1.0, 1.0);
  EXPECT_THROW(validate_initial_state(p, make_state(0.0, -1.0)), Error);
  EXPECT_NO_THROW(validate_initial_state(p, make_state(0.0, -0.999)));
  EXPECT_NO_THROW(validate_initial_state(ModelParams::gamma_zero(1.0), make_state(0.0, -50.0)));
}

TEST(SystemState, RenewalPoint) {
  const SystemState s = renewal_point_state(ModelParams::make(3.0, 2.0));
  EXPECT_EQ(s.h, 0.0);
  EXPECT_EQ(s.v, -0.5);
}
