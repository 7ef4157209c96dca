#pragma once

// Stationary tails, fluctuation ratios, law of large numbers, total-variation
// decay, and the product-form check for the gamma = 0 model.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "inertdrift/core_model.hpp"
#include "inertdrift/error.hpp"
#include "inertdrift/integrator.hpp"
#include "inertdrift/measure.hpp"
#include "inertdrift/parallel.hpp"
#include "inertdrift/rng.hpp"
#include "inertdrift/stats.hpp"

namespace inertdrift {

// ---------------------------------------------------------------- tails

enum class TailTransform { linear, quadratic_shifted };

inline const char* to_string(TailTransform t) {
  return t == TailTransform::linear ? "linear-in-x" : "quadratic-in-(y+g/(1+gamma))";
}

struct TailFitOptions {
  double p_hi = 1e-1;  // survival range used for the levels
  double p_lo = 1e-5;
  std::size_t n_levels = 12;
  std::size_t min_units = 200;  // independent units (cycles) above every level
  double level = 0.95;          // confidence level of the slope interval
  bool mills_correction = true; // velocity only: regress log S + log(s)/2
};

enum class Verdict { pass, fail, inconclusive };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::pass: return "pass";
    case Verdict::fail: return "fail";
    case Verdict::inconclusive: return "inconclusive";
  }
  return "?";
}

struct TailFit {
  TailAxis axis = TailAxis::velocity;
  TailTransform transform = TailTransform::linear;
  double slope = 0.0;
  double intercept = 0.0;
  stats::Interval ci;
  stats::Interval fit_range;  // in the original variable (x or y)
  std::size_t n_effective = 0;
  bool mills_correction = false;
  std::vector<double> levels;     // original variable
  std::vector<double> abscissa;   // transformed variable
  std::vector<double> log_surv;   // log of empirical survival
  std::vector<double> response;   // regression response (log_surv, possibly corrected)
  stats::Interval bracket;        // admissible slope range
  Verdict verdict = Verdict::inconclusive;

  /// Fitted log survival at the given level index (undoing the response correction).
  double fitted_log_surv(std::size_t i) const {
    return intercept + slope * abscissa[i] - (response[i] - log_surv[i]);
  }
};

inline Verdict bracket_verdict(const stats::Interval& ci, const stats::Interval& bracket) {
  if (ci.lo >= bracket.lo && ci.hi <= bracket.hi) return Verdict::pass;
  if (ci.hi < bracket.lo || ci.lo > bracket.hi) return Verdict::fail;
  return Verdict::inconclusive;
}

inline stats::Interval velocity_tail_bracket(const ModelParams& p) {
  return {-4.0 * (1.0 + p.gamma), -(1.0 + p.gamma) / 8.0};
}

inline stats::Interval gap_tail_bracket(const ModelParams& p) {
  return {-4.0 * p.g / p.gamma, -p.g / (32.0 * p.gamma)};
}

namespace detail {

/// Levels log-spaced in pooled survival, slope by pooled least squares,
/// interval by delete-one-group jackknife.
inline TailFit fit_tail(const TailHistogram& th, TailTransform tr, double shift, const TailFitOptions& o,
                        bool mills) {
  require(o.p_hi > o.p_lo && o.p_lo > 0.0 && o.p_hi < 1.0, errc::invalid_argument,
          "tail fit: need 0 < p_lo < p_hi < 1");
  const std::size_t nb = th.n_bins;
  // pooled survival at every edge
  std::vector<double> above(nb + 1, 0.0);
  double total = 0.0;
  for (std::size_t g = 0; g < th.groups(); ++g) {
    total += th.group_below[g];
    for (std::size_t i = 0; i <= nb; ++i) total += th.group_mass[g][i];
  }
  require(total > 0.0, errc::empty_measure, "tail fit: empty histogram");
  {
    std::vector<double> col(nb + 1, 0.0);
    for (std::size_t g = 0; g < th.groups(); ++g)
      for (std::size_t i = 0; i <= nb; ++i) col[i] += th.group_mass[g][i];
    double run = 0.0;
    for (std::size_t i = nb + 1; i-- > 0;) {
      run += col[i];
      above[i] = run / total;
    }
  }
  std::vector<std::size_t> ks;
  for (std::size_t j = 0; j < o.n_levels; ++j) {
    const double target =
        o.p_hi * std::pow(o.p_lo / o.p_hi, static_cast<double>(j) / static_cast<double>(o.n_levels - 1));
    std::size_t k = 1;
    while (k < nb && above[k] > target) ++k;
    if (k >= nb || above[k] <= 0.0) continue;  // beyond the resolved range
    const double y = th.edge(k);
    if (tr == TailTransform::quadratic_shifted && y <= shift) continue;
    if (th.units_above(y) < o.min_units) continue;
    if (!ks.empty() && ks.back() == k) continue;
    ks.push_back(k);
  }
  require(ks.size() >= 3, errc::insufficient_data,
          "tail fit: insufficient tail mass (fewer than 3 levels with enough support in the range)");

  auto xform = [&](double y) { return tr == TailTransform::linear ? y : (y - shift) * (y - shift); };
  TailFit f;
  f.axis = th.axis;
  f.transform = tr;
  f.mills_correction = mills;
  f.n_effective = th.unit_max.empty() ? 0 : th.units_above(th.edge(ks.back()));
  for (std::size_t k : ks) {
    const double y = th.edge(k);
    const double s = xform(y);
    f.levels.push_back(y);
    f.abscissa.push_back(s);
    f.log_surv.push_back(std::log(above[k]));
    f.response.push_back(std::log(above[k]) + (mills ? 0.5 * std::log(s) : 0.0));
  }
  f.fit_range = {f.levels.front(), f.levels.back()};
  const stats::LinearFit lf = stats::linear_fit(f.abscissa, f.response);
  f.slope = lf.slope;
  f.intercept = lf.intercept;

  // jackknife over groups
  const std::size_t G = th.groups();
  std::vector<double> jk;
  for (std::size_t skip = 0; skip < G; ++skip) {
    std::vector<double> resp;
    bool ok = true;
    for (std::size_t i = 0; i < ks.size(); ++i) {
      const auto [a, t] = th.survival(ks[i], skip);
      if (a <= 0.0 || t <= 0.0) {
        ok = false;
        break;
      }
      resp.push_back(std::log(a / t) + (mills ? 0.5 * std::log(f.abscissa[i]) : 0.0));
    }
    if (ok) jk.push_back(stats::linear_fit(f.abscissa, resp).slope);
  }
  require(jk.size() >= 2, errc::insufficient_data, "tail fit: too few usable groups for the interval");
  const double m = stats::mean(jk);
  double ss = 0.0;
  for (double s : jk) ss += (s - m) * (s - m);
  const double gj = static_cast<double>(jk.size());
  const double se = std::sqrt((gj - 1.0) / gj * ss);
  const double t = stats::student_two_sided_t(o.level, gj - 1.0);
  f.ci = {f.slope - t * se, f.slope + t * se};
  return f;
}

}  // namespace detail

/// Regresses log pi(V > y) on (y + g/(1+gamma))^2.
inline TailFit fit_velocity_tail(const TailHistogram& th, const ModelParams& p, const TailFitOptions& o = {}) {
  require(th.axis == TailAxis::velocity, errc::invalid_argument, "fit_velocity_tail: histogram is not a velocity tail");
  TailFit f = detail::fit_tail(th, TailTransform::quadratic_shifted, p.drift_velocity(), o, o.mills_correction);
  f.bracket = velocity_tail_bracket(p);
  f.verdict = bracket_verdict(f.ci, f.bracket);
  return f;
}

/// Regresses log pi(H > x) on x.
inline TailFit fit_gap_tail(const TailHistogram& th, const ModelParams& p, const TailFitOptions& o = {}) {
  require(th.axis == TailAxis::gap, errc::invalid_argument, "fit_gap_tail: histogram is not a gap tail");
  TailFit f = detail::fit_tail(th, TailTransform::linear, 0.0, o, false);
  f.bracket = gap_tail_bracket(p);
  f.verdict = bracket_verdict(f.ci, f.bracket);
  return f;
}

/// Fine tail histograms sized for the given parameters: velocity from the
/// renewal value upwards, gap from 0.
inline TailHistogram default_velocity_tail(const ModelParams& p, double span = 4.0, std::size_t bins = 4000,
                                           std::size_t groups = 32) {
  return TailHistogram(TailAxis::velocity, p.drift_velocity(), p.drift_velocity() + span, bins, groups);
}

inline TailHistogram default_gap_tail(double span = 20.0, std::size_t bins = 4000, std::size_t groups = 32) {
  return TailHistogram(TailAxis::gap, 0.0, span, bins, groups);
}

// ---------------------------------------------------------- fluctuations

struct FluctuationPoint {
  double t = 0.0;
  double v_ratio = 0.0;  // sup_{s<=t} V_s / sqrt(log t)
  double h_ratio = 0.0;  // sup_{s<=t} H_s / log t
};

struct FluctuationReport {
  std::vector<FluctuationPoint> series;
  double v_final = 0.0;
  double h_final = 0.0;
  double v_last_decade = 0.0;  // sup over [T/10, T] of V_s / sqrt(log T)
  double h_last_decade = 0.0;
  stats::Interval v_bracket;   // limsup bracket
  stats::Interval h_bracket;
  double upper_slack = 1.1;
  double lower_slack = 0.5;
  bool v_pass = false;
  bool h_pass = false;
};

inline stats::Interval velocity_limsup_bracket(const ModelParams& p) {
  return {1.0 / std::sqrt(2.0 * (1.0 + p.gamma)), 2.0 / std::sqrt(1.0 + p.gamma)};
}

inline stats::Interval gap_limsup_bracket(const ModelParams& p) {
  return {p.gamma / (2.0 * p.g), 16.0 * p.gamma / p.g};
}

/// Finite-horizon proxy for the limsup statements: the final running-max ratio
/// must stay below upper * upper_slack, and the supremum over the last decade
/// [T/10, T] (normalised at T) must reach lower * lower_slack.
template <NoiseLike Noise>
FluctuationReport fluctuation_ratios(const ModelParams& p, const SystemState& init, const StepConfig& cfg,
                                     const Noise& noise, double horizon, std::vector<double> checkpoints,
                                     double upper_slack = 1.1, double lower_slack = 0.5) {
  require(horizon >= 10.0 * std::exp(1.0), errc::insufficient_data,
          "fluctuations: horizon too short (need T/10 >= e)");
  std::sort(checkpoints.begin(), checkpoints.end());
  require(checkpoints.empty() || checkpoints.front() >= std::exp(1.0), errc::invalid_argument,
          "fluctuations: checkpoints must satisfy t >= e");
  FluctuationReport r;
  r.upper_slack = upper_slack;
  r.lower_slack = lower_slack;
  double run_v = init.v, run_h = init.h, dec_v = -INFINITY, dec_h = -INFINITY;
  std::size_t next = 0;
  const double decade_start = horizon / 10.0;
  simulate_with(p, init, cfg, noise, horizon, [&](const SystemState&, const StepOutcome& o) {
    const SystemState& s = o.state;
    run_v = std::max(run_v, s.v);
    run_h = std::max(run_h, s.h);
    if (s.t >= decade_start) {
      dec_v = std::max(dec_v, s.v);
      dec_h = std::max(dec_h, s.h);
    }
    while (next < checkpoints.size() && s.t >= checkpoints[next]) {
      const double lt = std::log(checkpoints[next]);
      r.series.push_back({checkpoints[next], run_v / std::sqrt(lt), run_h / lt});
      ++next;
    }
  });
  const double lT = std::log(horizon);
  r.v_final = run_v / std::sqrt(lT);
  r.h_final = run_h / lT;
  r.v_last_decade = dec_v / std::sqrt(lT);
  r.h_last_decade = dec_h / lT;
  r.v_bracket = velocity_limsup_bracket(p);
  r.h_bracket = gap_limsup_bracket(p);
  r.v_pass = r.v_final <= r.v_bracket.hi * upper_slack && r.v_last_decade >= r.v_bracket.lo * lower_slack;
  r.h_pass = r.h_final <= r.h_bracket.hi * upper_slack && r.h_last_decade >= r.h_bracket.lo * lower_slack;
  return r;
}

/// Running-max ratios of a recorded trajectory at the given checkpoints.
inline std::vector<FluctuationPoint> fluctuation_ratios(const Trajectory& tr, std::vector<double> checkpoints) {
  std::sort(checkpoints.begin(), checkpoints.end());
  require(!checkpoints.empty() && checkpoints.front() >= std::exp(1.0), errc::invalid_argument,
          "fluctuations: checkpoints must satisfy t >= e");
  require(tr.states.back().t >= checkpoints.back(), errc::insufficient_data, "fluctuations: horizon too short");
  std::vector<FluctuationPoint> out;
  double run_v = -INFINITY, run_h = -INFINITY;
  std::size_t next = 0;
  for (const auto& s : tr.states) {
    run_v = std::max(run_v, s.v);
    run_h = std::max(run_h, s.h);
    while (next < checkpoints.size() && s.t >= checkpoints[next]) {
      const double lt = std::log(checkpoints[next]);
      out.push_back({checkpoints[next], run_v / std::sqrt(lt), run_h / lt});
      ++next;
    }
  }
  return out;
}

// ------------------------------------------------------------------- LLN

struct LlnEstimate {
  double s_over_t = 0.0;
  double x_over_t = 0.0;
  double horizon = 0.0;
};

inline LlnEstimate lln_estimate(const Trajectory& tr) {
  const SystemState& f = tr.final_state();
  const SystemState& i = tr.states.front();
  const double T = f.t - i.t;
  require(T > 0.0, errc::insufficient_data, "lln: horizon too short");
  return {(f.s - i.s) / T, (f.x - i.x) / T, T};
}

/// Streaming version: only the terminal state is kept.
template <NoiseLike Noise>
LlnEstimate lln_estimate(const ModelParams& p, const SystemState& init, const StepConfig& cfg, const Noise& noise,
                         double horizon) {
  SystemState last = init;
  simulate_with(p, init, cfg, noise, horizon, [&](const SystemState&, const StepOutcome& o) { last = o.state; });
  const double T = last.t - init.t;
  return {(last.s - init.s) / T, (last.x - init.x) / T, T};
}

// ---------------------------------------------------------- ergodicity

struct DecayFit {
  std::vector<double> times;
  std::vector<double> tv_values;
  double noise_floor = 0.0;        // expected TV of an n_chains sample drawn from pi_hat itself
  double split_floor = 0.0;        // TV between the two halves of pi_hat, when supplied
  std::vector<std::size_t> fit_indices;
  double slope = 0.0;              // of log TV against t
  stats::Interval slope_ci;        // 95%
  double lambda_fit = 0.0;
  double r2 = 0.0;
};

inline constexpr double kTvSaturation = 0.95;
inline constexpr double kTvFloorFactor = 1.5;

/// Expected binned TV between pi and the empirical law of n i.i.d. draws from
/// it, by parametric bootstrap (inverse-cdf sampling on counter noise).
inline double sampling_tv_floor(const EmpiricalMeasure& pi, std::size_t n, std::uint64_t seed,
                                std::size_t replicates = 8) {
  const EmpiricalMeasure p = pi.normalized_copy();
  std::vector<double> cdf(p.mass().size() + 1);
  double run = 0.0;
  for (std::size_t i = 0; i < p.mass().size(); ++i) {
    run += p.mass()[i];
    cdf[i] = run;
  }
  cdf.back() = 1.0;  // overflow cell
  double acc = 0.0;
  for (std::size_t r = 0; r < replicates; ++r) {
    const NoiseSource u(seed, static_cast<std::uint32_t>(r));
    std::vector<double> mass(p.mass().size(), 0.0);
    double overflow = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t c = static_cast<std::size_t>(std::lower_bound(cdf.begin(), cdf.end(), u.uniform(k)) - cdf.begin());
      if (c < mass.size()) {
        mass[c] += 1.0;
      } else {
        overflow += 1.0;
      }
    }
    acc += tv_distance(EmpiricalMeasure::from_mass(p.binning(), std::move(mass), overflow), p);
  }
  return acc / static_cast<double>(replicates);
}

/// Binned TV between the law of (H_t, V_t) over n_chains independent chains
/// from init and pi_hat, at each requested time. Chain i uses stream_id i, so
/// the result does not depend on `lanes`. log TV is fitted against t over the
/// points above kTvFloorFactor * floor and below kTvSaturation.
inline DecayFit tv_decay_curve(const ModelParams& p, const SystemState& init, std::vector<double> times,
                               std::size_t n_chains, const EmpiricalMeasure& pi_hat, const StepConfig& cfg,
                               std::uint64_t seed, std::size_t lanes = 1, std::size_t threads = 0,
                               std::optional<double> split_floor = std::nullopt) {
  require(!times.empty() && std::is_sorted(times.begin(), times.end()) && times.front() > 0.0,
          errc::invalid_argument, "tv_decay: times must be positive and increasing");
  require(n_chains >= 100, errc::insufficient_data, "tv_decay: need at least 100 chains");
  const Binning& bin = pi_hat.binning();
  const std::size_t L = std::max<std::size_t>(lanes, 1);
  auto parts = run_lanes(
      L,
      [&](std::size_t lane) {
        std::vector<EmpiricalMeasure> ms(times.size(), EmpiricalMeasure(bin));
        for (std::size_t c = lane; c < n_chains; c += L) {
          Stepper<NoiseSource> st(p, init, cfg.dt, NoiseSource(seed, static_cast<std::uint32_t>(c)));
          for (std::size_t k = 0; k < times.size(); ++k) {
            const std::uint64_t target = detail::steps_for(times[k], cfg.dt);
            while (st.step() < target) st.advance();
            ms[k].add(st.state().h, st.state().v, 1.0);
          }
        }
        return ms;
      },
      threads);
  DecayFit f;
  f.times = times;
  for (std::size_t k = 0; k < times.size(); ++k) {
    EmpiricalMeasure m = parts[0][k];
    for (std::size_t l = 1; l < parts.size(); ++l) m.merge(parts[l][k]);
    f.tv_values.push_back(tv_distance(m, pi_hat));
  }
  f.noise_floor = sampling_tv_floor(pi_hat, n_chains, seed ^ 0x9e3779b97f4a7c15ull);
  if (split_floor) f.split_floor = *split_floor;
  const double floor = std::max(f.noise_floor, f.split_floor);
  std::vector<double> x, y;
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (f.tv_values[k] > kTvFloorFactor * floor && f.tv_values[k] < kTvSaturation) {
      f.fit_indices.push_back(k);
      x.push_back(times[k]);
      y.push_back(std::log(f.tv_values[k]));
    }
  }
  require(x.size() >= 3, errc::insufficient_data,
          "tv_decay: fewer than 3 points above the noise floor (horizon too long / too few chains)");
  const stats::LinearFit lf = stats::linear_fit(x, y);
  f.slope = lf.slope;
  f.slope_ci = lf.slope_ci(0.95);
  f.lambda_fit = std::exp(lf.slope);
  f.r2 = lf.r2;
  return f;
}

// ------------------------------------------------------ gamma = 0 oracle

struct ProductFormReport {
  std::size_t n = 0;
  double exp_rate = 0.0;  // fitted rate of H
  double v_mean = 0.0;
  double v_sd = 0.0;
  stats::KsResult ks_gap;
  stats::KsResult ks_velocity;
  stats::Chi2Result independence;
  double alpha = 0.01;
  bool gap_exponential() const { return ks_gap.p_value > alpha; }
  bool velocity_gaussian() const { return ks_velocity.p_value > alpha; }
  bool independent() const { return independence.p_value > alpha; }
  bool product_form() const { return gap_exponential() && velocity_gaussian() && independent(); }
};

/// Exponential fit and KS for H, Gaussian fit and KS for V, and a chi-square
/// independence test on a 6 x 6 table cut at the marginal sextiles.
inline ProductFormReport product_form_tests(const std::vector<double>& h, const std::vector<double>& v,
                                            double alpha = 0.01) {
  require(h.size() == v.size(), errc::invalid_argument, "product form: sample size mismatch");
  require(h.size() >= 100, errc::insufficient_data, "product form: need at least 100 samples");
  ProductFormReport r;
  r.n = h.size();
  r.alpha = alpha;
  r.exp_rate = 1.0 / stats::mean(h);
  r.v_mean = stats::mean(v);
  r.v_sd = std::sqrt(stats::variance(v));
  const double rate = r.exp_rate, mu = r.v_mean, sd = r.v_sd;
  r.ks_gap = stats::ks_one_sample(h, [rate](double x) { return x <= 0.0 ? 0.0 : 1.0 - std::exp(-rate * x); });
  r.ks_velocity = stats::ks_one_sample(v, [mu, sd](double x) { return 0.5 * std::erfc(-(x - mu) / (sd * std::sqrt(2.0))); });
  const std::size_t k = 6;
  std::vector<double> hc, vc;
  for (std::size_t i = 1; i < k; ++i) {
    hc.push_back(stats::quantile(h, static_cast<double>(i) / k));
    vc.push_back(stats::quantile(v, static_cast<double>(i) / k));
  }
  std::vector<std::vector<double>> table(k, std::vector<double>(k, 0.0));
  for (std::size_t i = 0; i < h.size(); ++i) {
    const std::size_t a = static_cast<std::size_t>(std::upper_bound(hc.begin(), hc.end(), h[i]) - hc.begin());
    const std::size_t b = static_cast<std::size_t>(std::upper_bound(vc.begin(), vc.end(), v[i]) - vc.begin());
    table[a][b] += 1.0;
  }
  r.independence = stats::chi2_independence(table);
  return r;
}

struct StationarySampleOptions {
  double refine_span = 1.0;    // final stretch integrated with the fine step
  double refine_dt = 1e-5;
  std::size_t lanes = 1;
  std::size_t threads = 0;
};

/// One (H, V) sample per independent chain at time `horizon`, from (0, 0).
/// The last refine_span time units use refine_dt, which keeps the point mass
/// that the projected scheme puts at H = 0 (of order sqrt(dt)) out of the sample.
inline std::pair<std::vector<double>, std::vector<double>> stationary_samples(
    const ModelParams& p, std::size_t n, double horizon, const StepConfig& cfg, std::uint64_t seed,
    const StationarySampleOptions& o = {}) {
  require(horizon > o.refine_span, errc::invalid_argument, "samples: horizon must exceed the refine span");
  const std::size_t L = std::max<std::size_t>(o.lanes, 1);
  auto parts = run_lanes(
      L,
      [&](std::size_t lane) {
        std::vector<std::pair<double, double>> out;
        for (std::size_t c = lane; c < n; c += L) {
          const NoiseSource noise(seed, static_cast<std::uint32_t>(c));
          Stepper<NoiseSource> coarse(p, make_state(0.0, 0.0), cfg.dt, noise);
          const std::uint64_t n1 = detail::steps_for(horizon - o.refine_span, cfg.dt);
          while (coarse.step() < n1) coarse.advance();
          // the fine stretch draws from a disjoint block of step indices
          const std::uint64_t offset = std::uint64_t{1} << 48;
          SystemState s = coarse.state();
          Stepper<NoiseSource> fine(p, o.refine_dt, noise, {s, offset, s.t, offset});
          const std::uint64_t n2 = detail::steps_for(o.refine_span, o.refine_dt);
          for (std::uint64_t k = 0; k < n2; ++k) fine.advance();
          out.emplace_back(fine.state().h, fine.state().v);
        }
        return out;
      },
      o.threads);
  std::vector<double> h(n), v(n);
  for (std::size_t lane = 0; lane < L; ++lane)
    for (std::size_t j = 0; j < parts[lane].size(); ++j) {
      h[lane + j * L] = parts[lane][j].first;
      v[lane + j * L] = parts[lane][j].second;
    }
  return {h, v};
}

inline ProductFormReport gamma_zero_oracle(const ModelParams& p, std::size_t n_samples, double horizon,
                                           const StepConfig& cfg, std::uint64_t seed,
                                           const StationarySampleOptions& o = {}) {
  require(p.gamma_zero_mode, errc::invalid_argument, "gamma_zero_oracle: parameters are not in gamma-zero mode");
  require(n_samples >= 100, errc::insufficient_data, "gamma_zero_oracle: need at least 100 samples");
  const auto [h, v] = stationary_samples(p, n_samples, horizon, cfg, seed, o);
  return product_form_tests(h, v);
}

}  // namespace inertdrift
