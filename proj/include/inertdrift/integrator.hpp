#pragma once

// Euler-Maruyama discretisation with a per-step Skorohod projection.
//
// One step of length dt with Brownian increment dB:
//   h*  = h + v dt - dB            unconstrained gap
//   dL  = max(0, -h*)              local-time increment (discrete Skorohod map)
//   h'  = h* + dL                  >= 0, and dL > 0 only if h' = 0
//   v'  = v - (gamma v + g) dt + dL
//   s' = s + v dt,  x' = s' - h',  b' = b + dB,  l' = l + dL

#include <cmath>
#include <concepts>
#include <cstdint>
#include <optional>
#include <ostream>
#include <iomanip>
#include <string>
#include <utility>
#include <vector>

#include "inertdrift/core_model.hpp"
#include "inertdrift/error.hpp"
#include "inertdrift/rng.hpp"

namespace inertdrift {

struct StepConfig {
  double dt = 1e-4;
  std::uint64_t max_steps = std::uint64_t{1} << 40;
  std::uint64_t record_stride = 1;

  void validate(const ModelParams& p) const {
    require(std::isfinite(dt) && dt > 0.0, errc::invalid_argument, "step: dt must be > 0");
    require(p.gamma * dt < 1.0, errc::invalid_argument, "step: gamma * dt must be < 1");
    require(record_stride >= 1, errc::invalid_argument, "step: record_stride must be >= 1");
    require(max_steps >= 1, errc::invalid_argument, "step: max_steps must be >= 1");
  }

  friend bool operator==(const StepConfig&, const StepConfig&) = default;
};

struct StepOutcome {
  SystemState state;
  double dl = 0.0;  // local-time increment of this step
  double db = 0.0;  // Brownian increment of this step
};

inline StepOutcome reflect_step(const SystemState& st, const ModelParams& p, double db, double dt) {
  require(!std::isnan(st.h) && !std::isnan(st.v) && !std::isnan(db) && !std::isnan(dt), errc::numeric,
          "reflect_step: NaN input");
  const double h_free = st.h + st.v * dt - db;
  const double dl = h_free < 0.0 ? -h_free : 0.0;
  StepOutcome out;
  out.dl = dl;
  out.db = db;
  SystemState& n = out.state;
  n.t = st.t + dt;
  n.h = h_free < 0.0 ? 0.0 : h_free;
  n.v = st.v - (p.gamma * st.v + p.g) * dt + dl;
  n.s = st.s + st.v * dt;
  n.x = n.s - n.h;
  n.b = st.b + db;
  n.l = st.l + dl;
  return out;
}

/// Anything that yields a standard normal (and a uniform) per step index.
template <class N>
concept NoiseLike = requires(const N& n, std::uint64_t k) {
  { n.standard_normal(k) } -> std::convertible_to<double>;
  { n.uniform(k) } -> std::convertible_to<double>;
};

/// Online integrator for one path. Time is computed from the step count, not
/// accumulated, so restarting from a checkpoint reproduces the path exactly.
template <NoiseLike Noise = NoiseSource>
class Stepper {
 public:
  struct Checkpoint {
    SystemState state;
    std::uint64_t step = 0;
    double origin_t = 0.0;
    std::uint64_t origin_step = 0;
  };

  Stepper(const ModelParams& p, const SystemState& init, double dt, Noise noise, std::uint64_t first_step = 0)
      : Stepper(p, dt, std::move(noise), Checkpoint{init, first_step, init.t, first_step}) {}

  Stepper(const ModelParams& p, double dt, Noise noise, const Checkpoint& cp)
      : params_(p),
        dt_(dt),
        sqrt_dt_(std::sqrt(dt)),
        noise_(std::move(noise)),
        last_{cp.state, 0.0, 0.0},
        step_(cp.step),
        origin_t_(cp.origin_t),
        origin_step_(cp.origin_step) {}

  const StepOutcome& advance() {
    const double db = sqrt_dt_ * noise_.standard_normal(step_);
    last_ = reflect_step(last_.state, params_, db, dt_);
    ++step_;
    last_.state.t = origin_t_ + static_cast<double>(step_ - origin_step_) * dt_;
    return last_;
  }

  const SystemState& state() const { return last_.state; }
  const StepOutcome& last() const { return last_; }
  std::uint64_t step() const { return step_; }
  double dt() const { return dt_; }
  const ModelParams& params() const { return params_; }
  const Noise& noise() const { return noise_; }
  Checkpoint checkpoint() const { return {last_.state, step_, origin_t_, origin_step_}; }

 private:
  ModelParams params_;
  double dt_;
  double sqrt_dt_;
  Noise noise_;
  StepOutcome last_;
  std::uint64_t step_;
  double origin_t_;
  std::uint64_t origin_step_;
};

enum class StopReason { horizon, predicate, timeout, step_cap };

inline const char* to_string(StopReason r) {
  switch (r) {
    case StopReason::horizon: return "horizon";
    case StopReason::predicate: return "predicate";
    case StopReason::timeout: return "timeout";
    case StopReason::step_cap: return "step_cap";
  }
  return "?";
}

struct StopInfo {
  StopReason reason = StopReason::horizon;
  double crossing_time = 0.0;  // interpolated event time for predicate stops, else the final time
  std::uint64_t steps = 0;
};

struct Trajectory {
  ModelParams params;
  double dt = 0.0;
  std::vector<SystemState> states;
  std::optional<StopInfo> stop_info;

  const SystemState& final_state() const { return states.back(); }
};

namespace detail {

template <NoiseLike Noise>
Trajectory start_trajectory(const ModelParams& p, const SystemState& init, const StepConfig& cfg) {
  p.validate();
  cfg.validate(p);
  validate_initial_state(p, init);
  Trajectory tr;
  tr.params = p;
  tr.dt = cfg.dt;
  tr.states.push_back(init);
  return tr;
}

inline std::uint64_t steps_for(double span, double dt) {
  const double n = std::ceil(span / dt - 1e-9);
  return n < 1.0 ? 1 : static_cast<std::uint64_t>(n);
}

}  // namespace detail

/// Runs ceil(horizon/dt) steps (capped at cfg.max_steps) and calls
/// observer(prev_state, outcome) after every step. Returns the stop record.
template <NoiseLike Noise, class Observer>
StopInfo simulate_with(const ModelParams& p, const SystemState& init, const StepConfig& cfg, const Noise& noise,
                       double horizon, Observer&& observer) {
  p.validate();
  cfg.validate(p);
  validate_initial_state(p, init);
  require(horizon > 0.0, errc::invalid_argument, "simulate: horizon must be > 0");
  const std::uint64_t wanted = detail::steps_for(horizon, cfg.dt);
  const std::uint64_t n = wanted > cfg.max_steps ? cfg.max_steps : wanted;
  Stepper<Noise> stepper(p, init, cfg.dt, noise);
  for (std::uint64_t k = 0; k < n; ++k) {
    const SystemState prev = stepper.state();
    observer(prev, stepper.advance());
  }
  StopInfo info;
  info.reason = wanted > cfg.max_steps ? StopReason::step_cap : StopReason::horizon;
  info.crossing_time = stepper.state().t;
  info.steps = n;
  return info;
}

template <NoiseLike Noise>
Trajectory simulate(const ModelParams& p, const SystemState& init, const StepConfig& cfg, const Noise& noise,
                    double horizon) {
  Trajectory tr = detail::start_trajectory<Noise>(p, init, cfg);
  std::uint64_t k = 0;
  SystemState last = init;
  const StopInfo info = simulate_with(p, init, cfg, noise, horizon, [&](const SystemState&, const StepOutcome& o) {
    last = o.state;
    if (++k % cfg.record_stride == 0) tr.states.push_back(o.state);
  });
  if (tr.states.back().t < last.t) tr.states.push_back(last);  // the final state is always recorded
  tr.stop_info = info;
  return tr;
}

enum class Field { h, v };
enum class Direction { at_or_above, at_or_below };

inline double field_value(const SystemState& s, Field f) { return f == Field::h ? s.h : s.v; }

/// Probability that a Brownian bridge of variance dt between y0 and y1 (both
/// strictly on one side of level) touches the level.
inline double bridge_crossing_probability(double y0, double y1, double level, double dt) {
  const double d0 = y0 - level;
  const double d1 = y1 - level;
  if (d0 * d1 <= 0.0) return 1.0;
  return std::exp(-2.0 * d0 * d1 / dt);
}

/// Stop condition "field reaches level from the given side". For the gap an
/// optional Brownian-bridge test also catches crossings between grid points.
struct LevelCrossing {
  Field field = Field::v;
  Direction direction = Direction::at_or_below;
  double level = 0.0;
  bool bridge_correction = false;

  bool holds(const SystemState& s) const {
    const double y = field_value(s, field);
    return direction == Direction::at_or_above ? y >= level : y <= level;
  }

  double crossing_time(const SystemState& prev, const SystemState& next) const {
    const double y0 = field_value(prev, field);
    const double y1 = field_value(next, field);
    if (y1 == y0) return next.t;
    double theta = (level - y0) / (y1 - y0);
    theta = theta < 0.0 ? 0.0 : (theta > 1.0 ? 1.0 : theta);
    return prev.t + theta * (next.t - prev.t);
  }

  bool bridged(const SystemState& prev, const SystemState& next, double dt, double u) const {
    if (!bridge_correction || field != Field::h) return false;
    return u < bridge_crossing_probability(prev.h, next.h, level, dt);
  }
};

/// Wraps a plain state predicate; the crossing time is the first step time at
/// which it holds.
template <class F>
struct StatePredicate {
  F f;
  bool holds(const SystemState& s) const { return f(s); }
  double crossing_time(const SystemState&, const SystemState& next) const { return next.t; }
  bool bridged(const SystemState&, const SystemState&, double, double) const { return false; }
};

template <class F>
StatePredicate<F> when(F f) {
  return StatePredicate<F>{std::move(f)};
}

template <class C>
concept StopCondition = requires(const C& c, const SystemState& s, double x) {
  { c.holds(s) } -> std::convertible_to<bool>;
  { c.crossing_time(s, s) } -> std::convertible_to<double>;
  { c.bridged(s, s, x, x) } -> std::convertible_to<bool>;
};

template <NoiseLike Noise, StopCondition Cond>
Trajectory simulate_until(const ModelParams& p, const SystemState& init, const StepConfig& cfg, const Noise& noise,
                          const Cond& cond, double t_max) {
  Trajectory tr = detail::start_trajectory<Noise>(p, init, cfg);
  StopInfo info;
  if (cond.holds(init)) {
    info.reason = StopReason::predicate;
    info.crossing_time = init.t;
    tr.stop_info = info;
    return tr;
  }
  Stepper<Noise> stepper(p, init, cfg.dt, noise);
  std::uint64_t k = 0;
  for (;;) {
    if (k >= cfg.max_steps) {
      info.reason = StopReason::step_cap;
      info.crossing_time = stepper.state().t;
      break;
    }
    if (stepper.state().t >= t_max) {
      info.reason = StopReason::timeout;
      info.crossing_time = stepper.state().t;
      break;
    }
    const SystemState prev = stepper.state();
    const std::uint64_t step_index = stepper.step();
    const SystemState& next = stepper.advance().state;
    ++k;
    const bool hit = cond.holds(next);
    if (hit || cond.bridged(prev, next, cfg.dt, noise.uniform(step_index))) {
      info.reason = StopReason::predicate;
      info.crossing_time = hit ? cond.crossing_time(prev, next) : 0.5 * (prev.t + next.t);
      tr.states.push_back(next);
      break;
    }
    if (k % cfg.record_stride == 0) tr.states.push_back(next);
  }
  if (tr.states.back().t < stepper.state().t) tr.states.push_back(stepper.state());
  info.steps = k;
  tr.stop_info = info;
  return tr;
}

/// Two paths from different initial states driven by the same increments.
template <NoiseLike Noise>
std::pair<Trajectory, Trajectory> shared_noise_pair(const ModelParams& p, const SystemState& init1,
                                                    const SystemState& init2, const StepConfig& cfg,
                                                    const Noise& noise, double horizon) {
  return {simulate(p, init1, cfg, noise, horizon), simulate(p, init2, cfg, noise, horizon)};
}

/// sup_t |(H, V)(t) - (H', V')(t)| in the Euclidean norm over paired states.
inline double sup_distance_hv(const Trajectory& a, const Trajectory& b) {
  require(a.states.size() == b.states.size(), errc::invalid_argument, "sup_distance: trajectories differ in length");
  double best = 0.0;
  for (std::size_t i = 0; i < a.states.size(); ++i) {
    const double dh = a.states[i].h - b.states[i].h;
    const double dv = a.states[i].v - b.states[i].v;
    best = std::max(best, std::hypot(dh, dv));
  }
  return best;
}

inline constexpr const char* kTrajectoryCsvHeader = "t,h,v,s,x,b,l";

inline void write_trajectory_csv(std::ostream& os, const Trajectory& tr) {
  os << kTrajectoryCsvHeader << '\n' << std::setprecision(17);
  for (const SystemState& s : tr.states) {
    os << s.t << ',' << s.h << ',' << s.v << ',' << s.s << ',' << s.x << ',' << s.b << ',' << s.l << '\n';
  }
}

// ------------------------------------------------------ strong convergence

struct ConvergenceLevel {
  double dt = 0.0;
  double mean_error = 0.0;  // E |(H,V)_dt(T) - (H,V)_{dt/16}(T)|
};

struct ConvergenceReport {
  std::vector<ConvergenceLevel> levels;
  std::vector<double> ratios;  // mean_error(dt/2) / mean_error(dt)
  double order = 0.0;          // least-squares slope of log error on log dt
};

/// Terminal-state discrepancy of each step size dt_coarse / 2^k (k < n_levels)
/// against the dt/16 path driven by the same Brownian increments. All paths
/// aggregate increments of one finest grid, dt_coarse / 2^(n_levels - 1) / 16.
inline ConvergenceReport strong_convergence(const ModelParams& p, const SystemState& init, double horizon,
                                            double dt_coarse, std::size_t n_levels, std::size_t n_paths,
                                            std::uint64_t seed) {
  p.validate();
  validate_initial_state(p, init);
  require(n_levels >= 2 && n_paths >= 2, errc::invalid_argument, "convergence: need >= 2 levels and >= 2 paths");
  const std::uint64_t coarse_steps = detail::steps_for(horizon, dt_coarse);
  require(std::fabs(static_cast<double>(coarse_steps) * dt_coarse - horizon) < 1e-9 * horizon, errc::invalid_argument,
          "convergence: horizon must be a multiple of dt_coarse");
  const int depth = static_cast<int>(n_levels - 1) + 4;
  const std::uint64_t n_fine = coarse_steps << depth;
  const double dt_fine = dt_coarse / static_cast<double>(std::uint64_t{1} << depth);
  require(p.gamma * dt_coarse < 1.0, errc::invalid_argument, "convergence: gamma * dt_coarse must be < 1");

  std::vector<double> err(n_levels, 0.0);
  std::vector<double> db(n_fine);
  std::vector<SystemState> terminal(static_cast<std::size_t>(depth) + 1);
  for (std::size_t path = 0; path < n_paths; ++path) {
    const NoiseSource noise(seed, static_cast<std::uint32_t>(path));
    const double sd = std::sqrt(dt_fine);
    for (std::uint64_t i = 0; i < n_fine; ++i) db[i] = sd * noise.standard_normal(i);
    for (int lev = 0; lev <= depth; ++lev) {
      const std::uint64_t agg = std::uint64_t{1} << (depth - lev);
      const double dt = dt_fine * static_cast<double>(agg);
      SystemState st = init;
      for (std::uint64_t i = 0; i < n_fine; i += agg) {
        double inc = 0.0;
        for (std::uint64_t j = 0; j < agg; ++j) inc += db[i + j];
        st = reflect_step(st, p, inc, dt).state;
      }
      terminal[static_cast<std::size_t>(lev)] = st;
    }
    for (std::size_t k = 0; k < n_levels; ++k) {
      const SystemState& a = terminal[k];
      const SystemState& b = terminal[k + 4];
      err[k] += std::hypot(a.h - b.h, a.v - b.v) / static_cast<double>(n_paths);
    }
  }
  ConvergenceReport r;
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t k = 0; k < n_levels; ++k) {
    const double dt = dt_coarse / static_cast<double>(std::uint64_t{1} << k);
    r.levels.push_back({dt, err[k]});
    if (k > 0) r.ratios.push_back(err[k] / err[k - 1]);
    const double x = std::log(dt), y = std::log(err[k]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double n = static_cast<double>(n_levels);
  r.order = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  return r;
}

}  // namespace inertdrift
