#pragma once

// Model constants, the augmented trajectory state and the closed-form
// interior dynamics of the gravitation + viscosity inert-drift system
//
//   dH = V dt - dB + dL,   dV = -(gamma V + g) dt + dL,
//
// where L is the local time of H at zero.

#include <cmath>
#include <limits>
#include <sstream>
#include <string>

#include "inertdrift/error.hpp"

namespace inertdrift {

inline constexpr double kDefaultBoundaryTol = 1e-9;

struct ModelParams {
  double gamma = 1.0;  // viscosity, 1/time
  double g = 1.0;      // gravitational acceleration
  bool gamma_zero_mode = false;

  static ModelParams make(double gamma, double g) {
    ModelParams p{gamma, g, false};
    p.validate();
    return p;
  }

  /// The gamma = 0 model (product-form stationary law); integrator only.
  static ModelParams gamma_zero(double g) {
    ModelParams p{0.0, g, true};
    p.validate();
    return p;
  }

  void validate() const {
    require(std::isfinite(g) && g > 0.0, errc::invalid_argument, "model: g must be > 0");
    if (gamma_zero_mode) {
      require(gamma == 0.0, errc::invalid_argument, "model: gamma must be exactly 0 in gamma-zero mode");
    } else {
      require(std::isfinite(gamma) && gamma > 0.0, errc::invalid_argument, "model: gamma must be > 0");
    }
  }

  /// -g/gamma: the velocity can never reach it. -inf in gamma-zero mode.
  double velocity_floor() const {
    return gamma_zero_mode ? -std::numeric_limits<double>::infinity() : -g / gamma;
  }

  /// -g/(1+gamma): long-run drift of both particles and the renewal velocity.
  double drift_velocity() const { return -g / (1.0 + gamma); }

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

struct RenewalConfig {
  double a = 0.0;
  double b = 0.0;
  double renewal_v = 0.0;
  double boundary_tol = kDefaultBoundaryTol;

  void validate() const {
    require(a < renewal_v && renewal_v < b && b < 0.0, errc::invalid_argument,
            "renewal config: need a < renewal_v < b < 0");
    require(boundary_tol > 0.0, errc::invalid_argument, "renewal config: boundary_tol must be > 0");
  }

  friend bool operator==(const RenewalConfig&, const RenewalConfig&) = default;
};

/// One point of the augmented path. h = s - x is the gap, l the local time.
struct SystemState {
  double t = 0.0;
  double h = 0.0;
  double v = 0.0;
  double s = 0.0;
  double x = 0.0;
  double b = 0.0;
  double l = 0.0;

  friend bool operator==(const SystemState&, const SystemState&) = default;
};

/// Fresh state at time 0 with S_0 = B_0 = L_0 = 0 and X_0 = -h.
inline SystemState make_state(double h, double v) {
  require(std::isfinite(h) && std::isfinite(v), errc::invalid_argument, "state: non-finite value");
  require(h >= 0.0, errc::invalid_argument, "state: gap must be >= 0");
  SystemState st;
  st.h = h;
  st.v = v;
  st.x = -h;
  return st;
}

inline void validate_initial_state(const ModelParams& p, const SystemState& st) {
  require(std::isfinite(st.h) && std::isfinite(st.v), errc::invalid_argument, "state: non-finite value");
  require(st.h >= 0.0, errc::invalid_argument, "state: gap must be >= 0");
  if (!p.gamma_zero_mode) {
    std::ostringstream msg;
    msg << "state: velocity " << st.v << " must exceed -g/gamma = " << p.velocity_floor();
    require(st.v > p.velocity_floor(), errc::invalid_argument, msg.str());
  }
}

inline RenewalConfig derive_renewal_config(const ModelParams& p, double boundary_tol = kDefaultBoundaryTol) {
  p.validate();
  require(!p.gamma_zero_mode, errc::invalid_argument,
          "renewal constants are undefined in gamma-zero mode (they involve g/gamma)");
  const double gm = p.gamma;
  const double g = p.g;
  RenewalConfig rc;
  rc.a = -(g + g / (2.0 * gm)) / (1.0 + gm);
  rc.b = -(g - g / (2.0 * (1.0 + gm))) / (1.0 + gm);
  rc.renewal_v = -g / (1.0 + gm);
  rc.boundary_tol = boundary_tol;
  rc.validate();
  require(p.velocity_floor() < rc.a, errc::numeric, "renewal config: a must exceed -g/gamma");
  return rc;
}

/// The renewal point (0, -g/(1+gamma)) as a fresh state.
inline SystemState renewal_point_state(const ModelParams& p) { return make_state(0.0, p.drift_velocity()); }

/// Velocity after dt of interior motion (no local time): the ODE solution
/// (v0 + g/gamma) e^{-gamma dt} - g/gamma, or v0 - g dt when gamma = 0.
inline double interior_velocity(const ModelParams& p, double v0, double dt) {
  if (p.gamma_zero_mode) return v0 - p.g * dt;
  const double floor_shift = p.g / p.gamma;
  if (std::isinf(dt)) return -floor_shift;
  return (v0 + floor_shift) * std::exp(-p.gamma * dt) - floor_shift;
}

/// Time for the interior velocity to decay from v0 to a_level.
inline double interior_hitting_time(const ModelParams& p, double v0, double a_level) {
  require(a_level < v0, errc::invalid_argument, "interior_hitting_time: level must lie below v0");
  if (p.gamma_zero_mode) return (v0 - a_level) / p.g;
  const double floor_shift = p.g / p.gamma;
  require(a_level > -floor_shift, errc::invalid_argument,
          "interior_hitting_time: level must exceed -g/gamma");
  return std::log((v0 + floor_shift) / (a_level + floor_shift)) / p.gamma;
}

}  // namespace inertdrift
