#pragma once

// Monte Carlo checks of the closed-form hitting probability bounds. Each
// BoundSpec pairs an initial condition and a stopping event with an analytic
// bound. Level mode compares p-hat with the bound through a 99% Wilson
// interval; shape mode regresses log p-hat on the bound's variable and
// compares the slope with the bound's exponent.

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "inertdrift/analytics.hpp"
#include "inertdrift/core_model.hpp"
#include "inertdrift/error.hpp"
#include "inertdrift/integrator.hpp"
#include "inertdrift/parallel.hpp"
#include "inertdrift/renewal.hpp"
#include "inertdrift/rng.hpp"
#include "inertdrift/stats.hpp"

namespace inertdrift {

inline constexpr std::uint64_t kMinBoundTrials = 10000;
inline constexpr double kBoundLevel = 0.99;

using BoundArgs = std::map<std::string, double>;

enum class BoundDirection { upper, lower };
enum class BoundMode { level, shape };

inline const char* to_string(BoundDirection d) { return d == BoundDirection::upper ? "upper" : "lower"; }
inline const char* to_string(BoundMode m) { return m == BoundMode::level ? "level" : "shape"; }

struct TrialOutcome {
  bool occurred = false;
  bool truncated = false;
};

using TrialFn = std::function<TrialOutcome(const ModelParams&, const BoundArgs&, const NoiseSource&, double dt)>;
using ArgsFn = std::function<double(const ModelParams&, const BoundArgs&)>;

struct BoundSpec {
  std::string name;
  std::string statement;
  std::string init_sampler;
  std::string event;
  BoundDirection direction = BoundDirection::upper;
  BoundMode mode = BoundMode::level;
  /// Closed-form bound; empty when the level carries an unknown constant.
  ArgsFn bound_fn;
  /// Throws Error(invalid_argument) outside the validity domain.
  std::function<void(const ModelParams&, const BoundArgs&)> validity;
  TrialFn trial;
  // shape mode: log p is regressed on abscissa(args); the claimed decay rate
  // is exponent(params, args), zero meaning "decays" with no rate attached.
  std::string shape_variable;
  ArgsFn abscissa;
  ArgsFn exponent;
  std::function<std::vector<BoundArgs>(const ModelParams&)> default_settings;
  std::uint64_t default_trials = kMinBoundTrials;

  bool has_level() const { return static_cast<bool>(bound_fn); }
};

struct BoundReport {
  std::string spec;
  BoundArgs args;
  std::uint64_t n_trials = 0;
  std::uint64_t successes = 0;
  std::uint64_t truncated = 0;
  double p_hat = 0.0;
  stats::Interval wilson;
  std::optional<double> bound_value;
  Verdict verdict = Verdict::inconclusive;  // level comparison; inconclusive without a level
  bool tight = false;
};

struct ShapeSummary {
  std::string variable;
  double exponent = 0.0;  // claimed decay rate k; the check is against slope -k
  double slope = 0.0;
  double slope_se = 0.0;
  stats::Interval slope_ci;
  bool tight = false;
};

struct SpecResult {
  std::string spec;
  BoundDirection direction = BoundDirection::upper;
  BoundMode mode = BoundMode::level;
  std::vector<BoundReport> points;
  std::optional<ShapeSummary> shape;
  Verdict verdict = Verdict::inconclusive;
  std::string note;
};

namespace detail {

inline double arg(const BoundArgs& a, const std::string& key) {
  auto it = a.find(key);
  require(it != a.end(), errc::invalid_argument, "bound args: missing '" + key + "'");
  return it->second;
}

inline void check_domain(bool ok, const std::string& spec, const std::string& what) {
  require(ok, errc::invalid_argument, spec + ": argument outside validity domain (" + what + ")");
}

inline std::uint64_t name_hash(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) h = (h ^ c) * 1099511628211ull;
  return h;
}

inline double std_normal_cdf(double x) { return boost::math::cdf(boost::math::normal(0.0, 1.0), x); }

// Uniform slots for the bridge tests of the two gap levels.
inline constexpr std::uint32_t kZeroSlot = 0;
inline constexpr std::uint32_t kLevelSlot = 1;

/// Gap reached 0 during the step: reflection fired, or the bridge between the
/// two grid values dipped to 0.
inline bool gap_touches_zero(const SystemState& prev, const StepOutcome& o, double dt, double u) {
  if (o.dl > 0.0 || o.state.h <= 0.0) return true;
  return u < bridge_crossing_probability(prev.h, o.state.h, 0.0, dt);
}

/// Gap reached `level` from below during the step.
inline bool gap_touches_level(const SystemState& prev, const StepOutcome& o, double level, double dt, double u) {
  if (o.state.h >= level) return true;
  return u < bridge_crossing_probability(prev.h, o.state.h, level, dt);
}

enum class StepResult { running, occurred, ended };

/// Runs one path until on_step settles the event or t_max elapses (truncated).
/// When truncation means "the event held up to t_max" the caller passes
/// occurs_at_t_max.
template <class OnStep>
TrialOutcome race(const ModelParams& p, const SystemState& init, double dt, double t_max, const NoiseSource& noise,
                  OnStep&& on_step, bool occurs_at_t_max = false) {
  Stepper<NoiseSource> st(p, init, dt, noise);
  const std::uint64_t n = steps_for(t_max, dt);
  for (std::uint64_t k = 0; k < n; ++k) {
    const SystemState prev = st.state();
    const StepOutcome& o = st.advance();
    switch (on_step(prev, o, k)) {
      case StepResult::occurred: return {true, false};
      case StepResult::ended: return {false, false};
      case StepResult::running: break;
    }
  }
  if (occurs_at_t_max) return {true, false};
  return {false, true};
}

inline constexpr double kHittingCap = 1000.0;

inline TrialOutcome velocity_race(const ModelParams& p, const SystemState& init, double hi, double lo, double dt,
                                  const NoiseSource& noise) {
  return race(p, init, dt, kHittingCap, noise, [&](const SystemState&, const StepOutcome& o, std::uint64_t) {
    if (o.state.v >= hi) return StepResult::occurred;
    if (o.state.v <= lo) return StepResult::ended;
    return StepResult::running;
  });
}

/// Gap reaches x before returning to 0.
inline TrialOutcome gap_level_before_zero(const ModelParams& p, const SystemState& init, double x, double dt,
                                          const NoiseSource& noise) {
  if (init.h >= x) return {true, false};
  return race(p, init, dt, kHittingCap, noise, [&](const SystemState& prev, const StepOutcome& o, std::uint64_t k) {
    if (gap_touches_level(prev, o, x, dt, noise.uniform(k, kLevelSlot))) return StepResult::occurred;
    if (gap_touches_zero(prev, o, dt, noise.uniform(k, kZeroSlot))) return StepResult::ended;
    return StepResult::running;
  });
}

/// One cycle from the renewal point; the event is decided by hit(prev, outcome, step).
template <class Hit>
TrialOutcome cycle_event(const ModelParams& p, double dt, const NoiseSource& noise, Hit&& hit) {
  RenewalDetector det(derive_renewal_config(p));
  return race(p, renewal_point_state(p), dt, kHittingCap, noise,
              [&](const SystemState& prev, const StepOutcome& o, std::uint64_t k) {
                if (hit(prev, o, k)) return StepResult::occurred;
                if (det.feed(prev, o.state, o.dl)) return StepResult::ended;
                return StepResult::running;
              });
}

inline std::vector<BoundArgs> grid(const std::string& key, const std::vector<double>& values, BoundArgs fixed = {}) {
  std::vector<BoundArgs> out;
  for (double v : values) {
    BoundArgs a = fixed;
    a[key] = v;
    out.push_back(a);
  }
  return out;
}

inline double shifted_square(const ModelParams& p, double y) {
  const double s = y + p.g / (1.0 + p.gamma);
  return s * s;
}

}  // namespace detail

// ---------------------------------------------------------------- registry

inline std::vector<BoundSpec> registry() {
  using detail::arg;
  using detail::check_domain;
  using detail::StepResult;
  std::vector<BoundSpec> r;

  {
    BoundSpec s;
    s.name = "vel_hits_large_before_small";
    s.statement = "P_(0,y)(tau^V_2y < tau^V_y/2) <= e^c exp(-(1+gamma)(y+g/(1+gamma))^2), e^c = exp(g^2/(1+gamma))";
    s.init_sampler = "(h, v) = (0, y)";
    s.event = "velocity reaches 2y before y/2";
    s.direction = BoundDirection::upper;
    s.mode = BoundMode::shape;
    s.bound_fn = [](const ModelParams& p, const BoundArgs& a) {
      return std::exp(p.g * p.g / (1.0 + p.gamma)) *
             std::exp(-(1.0 + p.gamma) * detail::shifted_square(p, arg(a, "y")));
    };
    s.validity = [n = s.name](const ModelParams&, const BoundArgs& a) { check_domain(arg(a, "y") > 0.0, n, "y > 0"); };
    s.trial = [](const ModelParams& p, const BoundArgs& a, const NoiseSource& noise, double dt) {
      const double y = arg(a, "y");
      return detail::velocity_race(p, make_state(0.0, y), 2.0 * y, 0.5 * y, dt, noise);
    };
    s.shape_variable = "(y+g/(1+gamma))^2";
    s.abscissa = [](const ModelParams& p, const BoundArgs& a) { return detail::shifted_square(p, arg(a, "y")); };
    s.exponent = [](const ModelParams& p, const BoundArgs&) { return 1.0 + p.gamma; };
    s.default_settings = [](const ModelParams& p) {
      const double r = p.g / (1.0 + p.gamma);
      return detail::grid("y", {0.5 * r, 0.75 * r, r, 1.25 * r});
    };
    r.push_back(s);
  }

  auto cycle_velocity = [](BoundDirection dir) {
    BoundSpec s;
    const bool up = dir == BoundDirection::upper;
    s.name = up ? "cycle_velocity_sup_upper" : "cycle_velocity_sup_lower";
    s.statement = up ? "P_renewal(sup_[0,zeta] V >= y) <= e^c exp(-(1+gamma)/4 (y+g/(1+gamma))^2)"
                     : "P_renewal(sup_[0,zeta] V >= y) >= e^-C exp(-2(1+gamma)(y+g/(1+gamma))^2)";
    s.init_sampler = "renewal point (0, -g/(1+gamma))";
    s.event = "velocity reaches y before the next renewal";
    s.direction = dir;
    s.mode = BoundMode::shape;
    s.validity = [n = s.name](const ModelParams& p, const BoundArgs& a) {
      check_domain(arg(a, "y") > p.drift_velocity(), n, "y above the renewal velocity");
    };
    s.trial = [](const ModelParams& p, const BoundArgs& a, const NoiseSource& noise, double dt) {
      const double y = arg(a, "y");
      return detail::cycle_event(p, dt, noise,
                                 [&](const SystemState&, const StepOutcome& o, std::uint64_t) { return o.state.v >= y; });
    };
    s.shape_variable = "(y+g/(1+gamma))^2";
    s.abscissa = [](const ModelParams& p, const BoundArgs& a) { return detail::shifted_square(p, arg(a, "y")); };
    s.exponent = up ? ArgsFn([](const ModelParams& p, const BoundArgs&) { return (1.0 + p.gamma) / 4.0; })
                    : ArgsFn([](const ModelParams& p, const BoundArgs&) { return 2.0 * (1.0 + p.gamma); });
    s.default_settings = [](const ModelParams& p) {
      const double r = p.g / (1.0 + p.gamma);
      return detail::grid("y", {0.5 * r, r, 1.5 * r});
    };
    return s;
  };
  r.push_back(cycle_velocity(BoundDirection::lower));
  r.push_back(cycle_velocity(BoundDirection::upper));

  {
    BoundSpec s;
    s.name = "gap_reaches_level_before_zero_upper";
    s.statement = "sup over nu in (-g/gamma, gamma x/4 - g/gamma] of P_(x/2,nu)(tau^H_x < sigma(0)) <= exp(-x g/(2 gamma))";
    s.init_sampler = "(h, v) = (x/2, nu)";
    s.event = "gap reaches x before returning to 0";
    s.direction = BoundDirection::upper;
    s.mode = BoundMode::level;
    s.bound_fn = [](const ModelParams& p, const BoundArgs& a) { return std::exp(-arg(a, "x") * p.g / (2.0 * p.gamma)); };
    s.validity = [n = s.name](const ModelParams& p, const BoundArgs& a) {
      const double x = arg(a, "x"), nu = arg(a, "nu");
      check_domain(x > 0.0, n, "x > 0");
      check_domain(nu > p.velocity_floor() && nu <= p.gamma * x / 4.0 - p.g / p.gamma, n,
                   "-g/gamma < nu <= gamma x/4 - g/gamma");
    };
    s.trial = [](const ModelParams& p, const BoundArgs& a, const NoiseSource& noise, double dt) {
      const double x = arg(a, "x");
      return detail::gap_level_before_zero(p, make_state(x / 2.0, arg(a, "nu")), x, dt, noise);
    };
    s.default_settings = [](const ModelParams& p) {
      // the largest admissible nu for the smallest x, kept fixed across x
      const double x0 = 8.0 * p.g / (p.gamma * p.gamma) * 0.25;
      const double nu = p.gamma * x0 / 4.0 - p.g / p.gamma;
      return detail::grid("x", {x0, 2.0 * x0, 3.0 * x0}, {{"nu", nu}});
    };
    r.push_back(s);
  }

  {
    BoundSpec s;
    s.name = "gap_reaches_level_before_zero_lower";
    s.statement = "inf over h >= (gamma/2g) log 2, nu > -g/gamma of P_(h,nu)(tau^H_x < sigma(0)) >= exp(-2 x g/gamma)";
    s.init_sampler = "(h, v) with h >= (gamma/2g) log 2";
    s.event = "gap reaches x before returning to 0";
    s.direction = BoundDirection::lower;
    s.mode = BoundMode::level;
    s.bound_fn = [](const ModelParams& p, const BoundArgs& a) { return std::exp(-2.0 * arg(a, "x") * p.g / p.gamma); };
    s.validity = [n = s.name](const ModelParams& p, const BoundArgs& a) {
      check_domain(arg(a, "x") > 0.0, n, "x > 0");
      check_domain(arg(a, "h") >= p.gamma / (2.0 * p.g) * std::log(2.0) * (1.0 - 1e-12), n, "h >= (gamma/2g) log 2");
      check_domain(arg(a, "nu") > p.velocity_floor(), n, "nu > -g/gamma");
    };
    s.trial = [](const ModelParams& p, const BoundArgs& a, const NoiseSource& noise, double dt) {
      return detail::gap_level_before_zero(p, make_state(arg(a, "h"), arg(a, "nu")), arg(a, "x"), dt, noise);
    };
    s.default_settings = [](const ModelParams& p) {
      const double h = p.gamma / (2.0 * p.g) * std::log(2.0);
      const double nu = p.velocity_floor() + 0.01 * p.g / p.gamma;
      const double x0 = p.gamma / p.g;
      return detail::grid("x", {x0, 2.0 * x0, 3.0 * x0}, {{"h", h}, {"nu", nu}});
    };
    r.push_back(s);
  }

  {
    BoundSpec s;
    s.name = "gap_zero_before_velocity_drop";
    s.statement =
        "sup over nu in [a, (a+g/gamma) e^(gamma^2 x/(4g)) - g/gamma] of P_(x/2,nu)(sigma(0) < tau^V_a) <= "
        "2 sqrt(2 gamma)/sqrt(pi g x) exp(-x g/(8 gamma))";
    s.init_sampler = "(h, v) = (x/2, nu), nu at the top of its admissible range";
    s.event = "gap returns to 0 before velocity drops to a";
    s.direction = BoundDirection::upper;
    s.mode = BoundMode::shape;
    s.bound_fn = [](const ModelParams& p, const BoundArgs& a) {
      const double x = arg(a, "x");
      return 2.0 * std::sqrt(2.0 * p.gamma) / std::sqrt(std::numbers::pi * p.g * x) * std::exp(-x * p.g / (8.0 * p.gamma));
    };
    s.validity = [n = s.name](const ModelParams& p, const BoundArgs& a) {
      const double x = arg(a, "x"), al = arg(a, "a"), nu = arg(a, "nu");
      check_domain(x > 0.0, n, "x > 0");
      check_domain(al > p.velocity_floor(), n, "a > -g/gamma");
      const double top = (al + p.g / p.gamma) * std::exp(p.gamma * p.gamma * x / (4.0 * p.g)) - p.g / p.gamma;
      check_domain(nu >= al && nu <= top + 1e-12 * std::abs(top) + 1e-15, n, "a <= nu <= (a+g/gamma) e^(gamma^2 x/4g) - g/gamma");
    };
    s.trial = [](const ModelParams& p, const BoundArgs& a, const NoiseSource& noise, double dt) {
      const double x = arg(a, "x"), al = arg(a, "a");
      return detail::race(p, make_state(x / 2.0, arg(a, "nu")), dt, detail::kHittingCap, noise,
                          [&](const SystemState& prev, const StepOutcome& o, std::uint64_t k) {
                            if (detail::gap_touches_zero(prev, o, dt, noise.uniform(k, detail::kZeroSlot)))
                              return StepResult::occurred;
                            if (o.state.v <= al) return StepResult::ended;
                            return StepResult::running;
                          });
    };
    s.shape_variable = "x";
    s.abscissa = [](const ModelParams&, const BoundArgs& a) { return arg(a, "x"); };
    s.exponent = [](const ModelParams& p, const BoundArgs&) { return p.g / (8.0 * p.gamma); };
    s.default_settings = [](const ModelParams& p) {
      const double al = derive_renewal_config(p).a;
      std::vector<BoundArgs> out;
      for (double f : {2.0, 4.0, 6.0, 8.0}) {
        const double x = f * p.g / (p.gamma * p.gamma);
        const double top = (al + p.g / p.gamma) * std::exp(p.gamma * p.gamma * x / (4.0 * p.g)) - p.g / p.gamma;
        out.push_back({{"x", x}, {"a", al}, {"nu", top}});
      }
      return out;
    };
    r.push_back(s);
  }

  auto cycle_gap = [](BoundDirection dir) {
    BoundSpec s;
    const bool up = dir == BoundDirection::upper;
    s.name = up ? "cycle_gap_reaches_level_upper" : "cycle_gap_reaches_level_lower";
    s.statement = up ? "P_renewal(tau^H_x < zeta) <= e^C exp(-x g/(16 gamma))"
                     : "P_renewal(tau^H_x < zeta) >= e^-C' exp(-2 x g/gamma)";
    s.init_sampler = "renewal point (0, -g/(1+gamma))";
    s.event = "gap reaches x before the next renewal";
    s.direction = dir;
    s.mode = BoundMode::shape;
    s.validity = [n = s.name](const ModelParams&, const BoundArgs& a) { check_domain(arg(a, "x") > 0.0, n, "x > 0"); };
    s.trial = [](const ModelParams& p, const BoundArgs& a, const NoiseSource& noise, double dt) {
      const double x = arg(a, "x");
      return detail::cycle_event(p, dt, noise, [&](const SystemState& prev, const StepOutcome& o, std::uint64_t k) {
        return detail::gap_touches_level(prev, o, x, dt, noise.uniform(k, detail::kLevelSlot));
      });
    };
    s.shape_variable = "x";
    s.abscissa = [](const ModelParams&, const BoundArgs& a) { return arg(a, "x"); };
    s.exponent = up ? ArgsFn([](const ModelParams& p, const BoundArgs&) { return p.g / (16.0 * p.gamma); })
                    : ArgsFn([](const ModelParams& p, const BoundArgs&) { return 2.0 * p.g / p.gamma; });
    s.default_settings = [](const ModelParams& p) {
      const double x0 = p.gamma / p.g;
      return detail::grid("x", {x0, 2.0 * x0, 3.0 * x0});
    };
    return s;
  };
  r.push_back(cycle_gap(BoundDirection::lower));
  r.push_back(cycle_gap(BoundDirection::upper));

  {
    BoundSpec s;
    s.name = "velocity_escapes_interval";
    s.statement = "sup over nu in [a,b] of P_(0,nu)(tau^V_[a,b]^c > m(l+1)) <= Phi(b - a + (1+gamma) b + g)^m";
    s.init_sampler = "(h, v) = (0, nu), nu in [a, b]";
    s.event = "velocity stays in [a, b] up to time m(l+1)";
    s.direction = BoundDirection::upper;
    s.mode = BoundMode::level;
    s.bound_fn = [](const ModelParams& p, const BoundArgs& a) {
      const double lo = arg(a, "a"), hi = arg(a, "b");
      return std::pow(detail::std_normal_cdf(hi - lo + (1.0 + p.gamma) * hi + p.g), arg(a, "m"));
    };
    s.validity = [n = s.name](const ModelParams& p, const BoundArgs& a) {
      const double lo = arg(a, "a"), hi = arg(a, "b"), l = arg(a, "l"), nu = arg(a, "nu");
      check_domain(p.velocity_floor() < lo && lo < hi, n, "-g/gamma < a < b");
      check_domain(l > (hi - lo) / (p.gamma * lo + p.g), n, "l > (b-a)/(gamma a + g)");
      check_domain(arg(a, "m") >= 1.0, n, "m >= 1");
      check_domain(nu >= lo && nu <= hi, n, "nu in [a, b]");
    };
    s.trial = [](const ModelParams& p, const BoundArgs& a, const NoiseSource& noise, double dt) {
      const double lo = arg(a, "a"), hi = arg(a, "b");
      const double horizon = arg(a, "m") * (arg(a, "l") + 1.0);
      return detail::race(
          p, make_state(0.0, arg(a, "nu")), dt, horizon, noise,
          [&](const SystemState&, const StepOutcome& o, std::uint64_t) {
            return (o.state.v < lo || o.state.v > hi) ? StepResult::ended : StepResult::running;
          },
          true);
    };
    s.default_settings = [](const ModelParams& p) {
      const RenewalConfig rc = derive_renewal_config(p);
      const double l = 1.05 * (rc.b - rc.a) / (p.gamma * rc.a + p.g);
      return detail::grid("m", {1.0, 2.0, 3.0}, {{"a", rc.a}, {"b", rc.b}, {"l", l}, {"nu", rc.renewal_v}});
    };
    r.push_back(s);
  }

  {
    BoundSpec s;
    s.name = "gap_return_after_velocity_drop";
    s.statement =
        "sup over (h,nu) in [0, t g/(4 gamma (1+gamma))] x (a,b) of P(sigma(tau^V_a) - tau^V_a > t, tau^V_a < tau^V_b) "
        "<= e^(-c t)";
    s.init_sampler = "(h, nu) with a < nu < b";
    s.event = "velocity reaches a before b, then the gap takes longer than t to return to 0";
    s.direction = BoundDirection::upper;
    s.mode = BoundMode::shape;
    s.validity = [n = s.name](const ModelParams& p, const BoundArgs& a) {
      const RenewalConfig rc = derive_renewal_config(p);
      const double t = arg(a, "t"), h = arg(a, "h"), nu = arg(a, "nu");
      check_domain(t > 0.0, n, "t > 0");
      check_domain(h >= 0.0 && h <= t * p.g / (4.0 * p.gamma * (1.0 + p.gamma)), n, "0 <= h <= t g/(4 gamma (1+gamma))");
      check_domain(nu > rc.a && nu < rc.b, n, "a < nu < b");
    };
    s.trial = [](const ModelParams& p, const BoundArgs& a, const NoiseSource& noise, double dt) {
      const RenewalConfig rc = derive_renewal_config(p);
      const double t = arg(a, "t");
      std::optional<double> t_a;
      return detail::race(p, make_state(arg(a, "h"), arg(a, "nu")), dt, detail::kHittingCap, noise,
                          [&](const SystemState& prev, const StepOutcome& o, std::uint64_t k) {
                            if (!t_a) {
                              if (o.state.v <= rc.a) {
                                t_a = o.state.t;
                                if (o.dl > 0.0 || o.state.h <= 0.0) return StepResult::ended;
                              } else if (o.state.v >= rc.b) {
                                return StepResult::ended;
                              }
                              return StepResult::running;
                            }
                            if (detail::gap_touches_zero(prev, o, dt, noise.uniform(k, detail::kZeroSlot)))
                              return StepResult::ended;
                            if (o.state.t - *t_a > t) return StepResult::occurred;
                            return StepResult::running;
                          });
    };
    s.shape_variable = "t";
    s.abscissa = [](const ModelParams&, const BoundArgs& a) { return arg(a, "t"); };
    s.exponent = [](const ModelParams&, const BoundArgs&) { return 0.0; };
    s.default_settings = [](const ModelParams& p) {
      const RenewalConfig rc = derive_renewal_config(p);
      const double t0 = 1.0 / p.g;
      return detail::grid("t", {2.0 * t0, 4.0 * t0, 6.0 * t0}, {{"h", 0.0}, {"nu", rc.renewal_v}});
    };
    r.push_back(s);
  }

  {
    BoundSpec s;
    s.name = "velocity_drop_from_above";
    s.statement = "sup over nu in (u,0] of P_(0,nu)(tau^V_u > t) <= exp(-(t((1+gamma)u+g) + u - nu)^2/(2t))";
    s.init_sampler = "(h, v) = (0, nu), u < nu <= 0";
    s.event = "velocity stays above u up to time t";
    s.direction = BoundDirection::upper;
    s.mode = BoundMode::level;
    s.bound_fn = [](const ModelParams& p, const BoundArgs& a) {
      const double u = arg(a, "u"), nu = arg(a, "nu"), t = arg(a, "t");
      const double z = t * ((1.0 + p.gamma) * u + p.g) + u - nu;
      return std::exp(-z * z / (2.0 * t));
    };
    s.validity = [n = s.name](const ModelParams& p, const BoundArgs& a) {
      const double u = arg(a, "u"), nu = arg(a, "nu"), t = arg(a, "t");
      check_domain(u > p.drift_velocity() && u < 0.0, n, "-g/(1+gamma) < u < 0");
      check_domain(nu > u && nu <= 0.0, n, "u < nu <= 0");
      check_domain(t > 0.0 && t * ((1.0 + p.gamma) * u + p.g) + u > std::sqrt(t), n,
                   "t beyond t_0: t((1+gamma)u+g) + u > sqrt(t)");
    };
    s.trial = [](const ModelParams& p, const BoundArgs& a, const NoiseSource& noise, double dt) {
      const double u = arg(a, "u");
      return detail::race(
          p, make_state(0.0, arg(a, "nu")), dt, arg(a, "t"), noise,
          [&](const SystemState&, const StepOutcome& o, std::uint64_t) {
            return o.state.v <= u ? StepResult::ended : StepResult::running;
          },
          true);
    };
    s.default_settings = [](const ModelParams& p) {
      const double u = 0.2 * p.drift_velocity();
      const double rate = (1.0 + p.gamma) * u + p.g;
      // smallest admissible t solves rate s^2 - s + u = 0 for s = sqrt(t)
      const double s0 = (1.0 + std::sqrt(1.0 - 4.0 * rate * u)) / (2.0 * rate);
      const double t_min = s0 * s0;
      return detail::grid("t", {1.1 * t_min, 1.65 * t_min, 2.2 * t_min}, {{"u", u}, {"nu", 0.0}});
    };
    r.push_back(s);
  }

  {
    BoundSpec s;
    s.name = "velocity_rise_from_below";
    s.statement =
        "sup over nu in (-g/gamma, u) of P_(h,nu)(tau^V_u > t) <= e^c e^(eps0 h) e^(-eps0^2 t/2), "
        "u = -(g+eps0)/(1+gamma), t > 2h/eps0 + 2g/(eps0 gamma (1+gamma)) + 4/eps0^2";
    s.init_sampler = "(h, nu) with -g/gamma < nu < u";
    s.event = "velocity stays below u up to time t";
    s.direction = BoundDirection::upper;
    s.mode = BoundMode::shape;
    s.validity = [n = s.name](const ModelParams& p, const BoundArgs& a) {
      const double e = arg(a, "eps0"), h = arg(a, "h"), nu = arg(a, "nu"), t = arg(a, "t");
      check_domain(e > 0.0 && e < p.g / p.gamma, n, "0 < eps0 < g/gamma");
      const double u = -(p.g + e) / (1.0 + p.gamma);
      check_domain(h >= 0.0, n, "h >= 0");
      check_domain(nu > p.velocity_floor() && nu < u, n, "-g/gamma < nu < u");
      const double t0 = 2.0 * h / e + 2.0 * p.g / (e * p.gamma * (1.0 + p.gamma)) + 4.0 / (e * e);
      check_domain(t > t0, n, "t > t_0");
    };
    s.trial = [](const ModelParams& p, const BoundArgs& a, const NoiseSource& noise, double dt) {
      const double u = -(p.g + arg(a, "eps0")) / (1.0 + p.gamma);
      return detail::race(
          p, make_state(arg(a, "h"), arg(a, "nu")), dt, arg(a, "t"), noise,
          [&](const SystemState&, const StepOutcome& o, std::uint64_t) {
            return o.state.v >= u ? StepResult::ended : StepResult::running;
          },
          true);
    };
    s.shape_variable = "t";
    s.abscissa = [](const ModelParams&, const BoundArgs& a) { return arg(a, "t"); };
    s.exponent = [](const ModelParams&, const BoundArgs& a) { return arg(a, "eps0") * arg(a, "eps0") / 2.0; };
    s.default_settings = [](const ModelParams& p) {
      const double e = 0.95 * p.g / p.gamma;
      const double h = 0.75 * p.g / (p.gamma * p.gamma);
      const double nu = p.velocity_floor() + 0.01 * p.g / p.gamma;
      const double t0 = 2.0 * h / e + 2.0 * p.g / (e * p.gamma * (1.0 + p.gamma)) + 4.0 / (e * e);
      return detail::grid("t", {t0 + 0.25, t0 + 1.25, t0 + 2.25}, {{"eps0", e}, {"h", h}, {"nu", nu}});
    };
    s.default_trials = 200000;
    r.push_back(s);
  }

  {
    BoundSpec s;
    s.name = "velocity_tail_exponential";
    s.statement = "sup over h >= 0 of P_(h,nu)(tau^V_u > t) <= 1 ^ exp(-2u(u - nu + t(gamma u + g))), u > 0, nu > u";
    s.init_sampler = "(h, nu) with nu > u";
    s.event = "velocity stays above u up to time t";
    s.direction = BoundDirection::upper;
    s.mode = BoundMode::level;
    s.bound_fn = [](const ModelParams& p, const BoundArgs& a) {
      const double u = arg(a, "u"), nu = arg(a, "nu"), t = arg(a, "t");
      return std::min(1.0, std::exp(-2.0 * u * (u - nu + t * (p.gamma * u + p.g))));
    };
    s.validity = [n = s.name](const ModelParams&, const BoundArgs& a) {
      const double u = arg(a, "u");
      check_domain(u > 0.0, n, "u > 0");
      check_domain(arg(a, "nu") > u, n, "nu > u");
      check_domain(arg(a, "t") >= 0.0, n, "t >= 0");
      check_domain(arg(a, "h") >= 0.0, n, "h >= 0");
    };
    s.trial = [](const ModelParams& p, const BoundArgs& a, const NoiseSource& noise, double dt) {
      const double u = arg(a, "u");
      return detail::race(
          p, make_state(arg(a, "h"), arg(a, "nu")), dt, arg(a, "t"), noise,
          [&](const SystemState&, const StepOutcome& o, std::uint64_t) {
            return o.state.v <= u ? StepResult::ended : StepResult::running;
          },
          true);
    };
    s.default_settings = [](const ModelParams& p) {
      const double u = 0.5 * p.g;
      return detail::grid("t", {0.75 / p.g, 1.0 / p.g, 1.5 / p.g}, {{"u", u}, {"nu", 3.0 * u}, {"h", 0.0}});
    };
    r.push_back(s);
  }

  return r;
}

inline const BoundSpec& find_spec(const std::vector<BoundSpec>& specs, const std::string& name) {
  for (const BoundSpec& s : specs)
    if (s.name == name) return s;
  throw Error(errc::invalid_argument, "unknown bound spec '" + name + "'");
}
const BoundSpec& find_spec(std::vector<BoundSpec>&&, const std::string&) = delete;

// ---------------------------------------------------------------- runners

struct BoundRunOptions {
  std::uint64_t n_trials = kMinBoundTrials;
  std::size_t lanes = 1;
  std::size_t threads = 1;
};

/// Trial i of setting `setting` draws from NoiseSource(derive_seed(seed, spec, setting), i),
/// so counts do not depend on the lane split.
inline BoundReport run_bound(const BoundSpec& spec, const ModelParams& p, const BoundArgs& args, const StepConfig& cfg,
                             std::uint64_t seed, std::uint64_t setting, const BoundRunOptions& o = {}) {
  p.validate();
  cfg.validate(p);
  require(o.n_trials >= kMinBoundTrials, errc::invalid_argument,
          "run_bound: n_trials must be at least " + std::to_string(kMinBoundTrials));
  require(o.n_trials <= 0xffffffffull, errc::invalid_argument, "run_bound: n_trials exceeds the stream id range");
  require(o.lanes >= 1, errc::invalid_argument, "run_bound: lanes must be >= 1");
  spec.validity(p, args);
  const std::uint64_t key = derive_seed(seed, detail::name_hash(spec.name), setting);

  struct Counts {
    std::uint64_t hits = 0, truncated = 0;
  };
  const auto lanes = run_lanes(
      o.lanes,
      [&](std::size_t lane) {
        std::uint64_t begin = 0;
        for (std::size_t j = 0; j < lane; ++j) begin += lane_share(o.n_trials, o.lanes, j);
        const std::uint64_t end = begin + lane_share(o.n_trials, o.lanes, lane);
        Counts c;
        for (std::uint64_t i = begin; i < end; ++i) {
          const TrialOutcome t = spec.trial(p, args, NoiseSource(key, static_cast<std::uint32_t>(i)), cfg.dt);
          c.hits += t.occurred ? 1 : 0;
          c.truncated += t.truncated ? 1 : 0;
        }
        return c;
      },
      o.threads);

  BoundReport rep;
  rep.spec = spec.name;
  rep.args = args;
  rep.n_trials = o.n_trials;
  for (const Counts& c : lanes) {
    rep.successes += c.hits;
    rep.truncated += c.truncated;
  }
  rep.p_hat = static_cast<double>(rep.successes) / static_cast<double>(rep.n_trials);
  rep.wilson = stats::wilson_interval(rep.successes, rep.n_trials, kBoundLevel);
  if (spec.has_level()) {
    const double b = spec.bound_fn(p, args);
    rep.bound_value = b;
    rep.tight = rep.wilson.contains(b);
    if (spec.direction == BoundDirection::upper)
      rep.verdict = rep.wilson.lo <= b ? Verdict::pass : Verdict::fail;
    else
      rep.verdict = rep.wilson.hi >= b ? Verdict::pass : Verdict::fail;
  }
  return rep;
}

/// Slope of log p-hat against the abscissa, weighted by the binomial delta-method
/// variance (1-p)/(n p) of each log p-hat. The variances are known, so the
/// interval uses the normal quantile.
inline ShapeSummary fit_shape(const std::vector<double>& x, const std::vector<BoundReport>& pts, double exponent,
                              BoundDirection dir, Verdict& verdict) {
  ShapeSummary s;
  s.exponent = exponent;
  double sw = 0.0, sx = 0.0, sy = 0.0;
  std::vector<double> y(x.size()), w(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double p = pts[i].p_hat;
    y[i] = std::log(p);
    w[i] = static_cast<double>(pts[i].n_trials) * p / std::max(1e-300, 1.0 - p);
    sw += w[i];
    sx += w[i] * x[i];
    sy += w[i] * y[i];
  }
  const double xm = sx / sw, ym = sy / sw;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += w[i] * (x[i] - xm) * (x[i] - xm);
    sxy += w[i] * (x[i] - xm) * (y[i] - ym);
  }
  require(sxx > 0.0, errc::invalid_argument, "shape fit: settings share one abscissa value");
  s.slope = sxy / sxx;
  s.slope_se = 1.0 / std::sqrt(sxx);
  const double z = stats::normal_two_sided_z(kBoundLevel);
  s.slope_ci = {s.slope - z * s.slope_se, s.slope + z * s.slope_se};
  const double target = -exponent;
  s.tight = s.slope_ci.contains(target);
  if (exponent == 0.0) {
    // decay with no stated rate
    verdict = s.slope_ci.hi < 0.0 ? Verdict::pass : (s.slope_ci.lo > 0.0 ? Verdict::fail : Verdict::inconclusive);
  } else if (dir == BoundDirection::upper) {
    verdict = s.slope_ci.lo <= target ? Verdict::pass : Verdict::fail;
  } else {
    verdict = s.slope_ci.hi >= target ? Verdict::pass : Verdict::fail;
  }
  return s;
}

/// Runs one spec over its settings (the defaults when `settings` is empty).
inline SpecResult run_spec(const BoundSpec& spec, const ModelParams& p, const StepConfig& cfg, std::uint64_t seed,
                           const BoundRunOptions& o, std::vector<BoundArgs> settings = {}) {
  if (settings.empty()) settings = spec.default_settings(p);
  require(settings.size() >= 3, errc::invalid_argument, spec.name + ": at least 3 argument settings are required");
  SpecResult res;
  res.spec = spec.name;
  res.direction = spec.direction;
  res.mode = spec.mode;
  for (std::size_t i = 0; i < settings.size(); ++i) res.points.push_back(run_bound(spec, p, settings[i], cfg, seed, i, o));

  if (spec.mode == BoundMode::level) {
    res.verdict = Verdict::pass;
    for (const BoundReport& r : res.points)
      if (r.verdict == Verdict::fail) res.verdict = Verdict::fail;
    if (spec.direction == BoundDirection::lower)
      for (const BoundReport& r : res.points)
        if (r.truncated > 0) res.note = "truncated trials counted as not occurred";
    return res;
  }

  std::vector<double> x;
  const double k = spec.exponent(p, settings.front());
  for (std::size_t i = 0; i < settings.size(); ++i) {
    require(spec.exponent(p, settings[i]) == k, errc::invalid_argument,
            spec.name + ": settings must share the exponent being tested");
    if (res.points[i].successes == 0) {
      res.verdict = Verdict::inconclusive;
      res.note = "no events at setting " + std::to_string(i) + "; log p-hat undefined";
      return res;
    }
    if (res.points[i].successes == res.points[i].n_trials) {
      res.verdict = Verdict::inconclusive;
      res.note = "event certain at setting " + std::to_string(i);
      return res;
    }
    x.push_back(spec.abscissa(p, settings[i]));
  }
  Verdict v = Verdict::inconclusive;
  ShapeSummary s = fit_shape(x, res.points, k, spec.direction, v);
  s.variable = spec.shape_variable;
  res.shape = s;
  res.verdict = v;
  return res;
}

inline std::vector<SpecResult> run_suite(const ModelParams& p, const StepConfig& cfg, std::uint64_t seed,
                                         const BoundRunOptions& o) {
  std::vector<SpecResult> out;
  for (const BoundSpec& s : registry()) {
    BoundRunOptions so = o;
    so.n_trials = std::max(o.n_trials, s.default_trials);
    out.push_back(run_spec(s, p, cfg, seed, so));
  }
  return out;
}

}  // namespace inertdrift
