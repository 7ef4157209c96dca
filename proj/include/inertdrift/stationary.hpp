#pragma once

// Two estimators of the stationary law pi on a fixed grid: the renewal-reward
// ratio (summed cycle occupation over summed cycle length) and the plain
// occupation measure of one long path.

#include "inertdrift/error.hpp"
#include "inertdrift/integrator.hpp"
#include "inertdrift/measure.hpp"
#include "inertdrift/renewal.hpp"

namespace inertdrift {

inline constexpr double kMaxOverflowFraction = 0.10;

inline void check_overflow(const EmpiricalMeasure& m) {
  require(m.total() > 0.0, errc::empty_measure, "measure: total mass is zero");
  require(m.overflow_fraction() <= kMaxOverflowFraction, errc::binning_too_narrow,
          "binning too narrow: overflow fraction " + std::to_string(m.overflow_fraction()) + " exceeds 10%");
}

/// Renewal-reward estimate. The batch must have been collected with a binning.
inline EmpiricalMeasure estimate_pi(const CycleBatch& batch) {
  require(!batch.cycles.empty(), errc::insufficient_data, "estimate_pi: empty batch");
  require(batch.occupation.has_value(), errc::invalid_argument,
          "estimate_pi: batch was collected without an occupation binning");
  check_overflow(*batch.occupation);
  return batch.occupation->normalized_copy();
}

/// Occupation measure of a recorded path after burn_in (left-point rule over
/// the recorded states, so record_stride should be 1 for a faithful estimate).
inline EmpiricalMeasure time_average_measure(const Trajectory& tr, const Binning& binning, double burn_in) {
  require(tr.states.size() >= 2, errc::insufficient_data, "time_average_measure: trajectory too short");
  require(tr.states.back().t > burn_in, errc::invalid_argument, "time_average_measure: horizon <= burn_in");
  EmpiricalMeasure m(binning);
  for (std::size_t i = 0; i + 1 < tr.states.size(); ++i) {
    const SystemState& s = tr.states[i];
    const double t0 = std::max(s.t, burn_in);
    const double t1 = tr.states[i + 1].t;
    if (t1 > t0) m.add(s.h, s.v, t1 - t0);
  }
  check_overflow(m);
  return m.normalized_copy();
}

/// Same estimate computed on the fly, without storing the path.
template <NoiseLike Noise>
EmpiricalMeasure time_average_measure(const ModelParams& p, const SystemState& init, const StepConfig& cfg,
                                      const Noise& noise, double horizon, const Binning& binning, double burn_in) {
  require(horizon > burn_in, errc::invalid_argument, "time_average_measure: horizon <= burn_in");
  EmpiricalMeasure m(binning);
  simulate_with(p, init, cfg, noise, horizon, [&](const SystemState& prev, const StepOutcome& o) {
    const double t0 = std::max(prev.t, burn_in);
    if (o.state.t > t0) m.add(prev.h, prev.v, o.state.t - t0);
  });
  check_overflow(m);
  return m.normalized_copy();
}

}  // namespace inertdrift
