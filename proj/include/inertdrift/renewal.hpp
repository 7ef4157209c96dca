#pragma once

// Online detection of the renewal times zeta_j and collection of per-cycle
// statistics.
//
// Two-phase rule: after a renewal (or from the start) wait until V leaves
// (a, b); then fire at the first upcrossing of renewal_v = -g/(1+gamma). An
// upcrossing can only happen through a local-time push, i.e. with H = 0, so
// the firing state is the renewal point (0, renewal_v).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
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

class RenewalDetector {
 public:
  explicit RenewalDetector(const RenewalConfig& rc, bool armed = false) : rc_(rc), armed_(armed) { rc.validate(); }

  /// Feeds one step. Returns the fraction of the step at which the renewal
  /// fired (linear interpolation of v), or nothing.
  std::optional<double> feed(const SystemState& prev, const SystemState& next, double dl) {
    if (!armed_) {
      armed_ = outside(next.v);
      return std::nullopt;
    }
    const bool up = prev.v < rc_.renewal_v && next.v >= rc_.renewal_v;
    if (!up || !(dl > 0.0 || next.h <= rc_.boundary_tol)) return std::nullopt;
    armed_ = outside(next.v);
    return (rc_.renewal_v - prev.v) / (next.v - prev.v);
  }

  bool armed() const { return armed_; }
  void reset(bool armed = false) { armed_ = armed; }
  const RenewalConfig& config() const { return rc_; }

 private:
  bool outside(double v) const { return v <= rc_.a || v >= rc_.b; }

  RenewalConfig rc_;
  bool armed_;
};

/// Renewal times of a recorded trajectory (record_stride must be 1 so that the
/// local-time increment of every step is visible).
inline std::vector<double> detect_renewals(const Trajectory& tr, const RenewalConfig& rc) {
  RenewalDetector det(rc);
  std::vector<double> out;
  for (std::size_t i = 1; i < tr.states.size(); ++i) {
    const SystemState& a = tr.states[i - 1];
    const SystemState& b = tr.states[i];
    if (auto theta = det.feed(a, b, b.l - a.l)) out.push_back(a.t + *theta * (b.t - a.t));
  }
  return out;
}

struct RenewalCycle {
  double start = 0.0;     // zeta_j
  double duration = 0.0;  // zeta_{j+1} - zeta_j
  double max_v = 0.0;
  double max_h = 0.0;
  std::uint64_t seed = 0;
  std::uint32_t stream_id = 0;
  std::uint64_t index = 0;  // cycle index within its stream
};

/// What to accumulate while collecting cycles. Occupation is attributed with
/// the left-point rule: a step of length dt adds dt at the state where it starts.
struct CollectOptions {
  double t_cap_per_cycle = 1e3;
  std::optional<Binning> binning;
  std::optional<TailHistogram> v_tail;  // empty template fixing the layout
  std::optional<TailHistogram> h_tail;
  std::optional<SystemState> start;  // default: the renewal point; otherwise the first partial cycle is discarded
  std::size_t lanes = 1;
  std::size_t threads = 0;
};

struct CycleBatch {
  ModelParams params;
  RenewalConfig renewal;
  double dt = 0.0;
  std::uint64_t seed = 0;
  std::vector<RenewalCycle> cycles;
  std::uint64_t aborted = 0;
  std::optional<EmpiricalMeasure> occupation;
  std::optional<TailHistogram> v_tail;
  std::optional<TailHistogram> h_tail;

  double total_time() const {
    double t = 0.0;
    for (const auto& c : cycles) t += c.duration;
    return t;
  }
  double mean_duration() const {
    require(!cycles.empty(), errc::insufficient_data, "cycle batch is empty");
    return total_time() / static_cast<double>(cycles.size());
  }
  double abort_fraction() const {
    const double n = static_cast<double>(cycles.size() + aborted);
    return n > 0.0 ? static_cast<double>(aborted) / n : 0.0;
  }
  std::vector<double> durations() const {
    std::vector<double> d;
    d.reserve(cycles.size());
    for (const auto& c : cycles) d.push_back(c.duration);
    return d;
  }

  /// Appends another batch. Raw sums are pooled, so estimates from the merged
  /// batch equal those from pooling the two inputs.
  void merge(const CycleBatch& o) {
    require(params == o.params && dt == o.dt && renewal == o.renewal, errc::invalid_argument,
            "cycle batch merge: parameters or dt differ");
    cycles.insert(cycles.end(), o.cycles.begin(), o.cycles.end());
    aborted += o.aborted;
    auto merge_opt = [](auto& mine, const auto& theirs) {
      if (mine && theirs) {
        mine->merge(*theirs);
      } else if (theirs) {
        mine = theirs;
      }
    };
    merge_opt(occupation, o.occupation);
    merge_opt(v_tail, o.v_tail);
    merge_opt(h_tail, o.h_tail);
  }
};

/// Cycle stream of one lane: a single driving path cut at its renewal times.
template <NoiseLike Noise = NoiseSource>
class CycleStream {
 public:
  struct Checkpoint {
    typename Stepper<Noise>::Checkpoint stepper;
    bool armed = false;
    bool counting = true;
    double cycle_start = 0.0;
    double max_v = 0.0;
    double max_h = 0.0;
    std::uint64_t completed = 0;
  };

  CycleStream(const ModelParams& p, const RenewalConfig& rc, double dt, Noise noise, const CollectOptions& opt,
              std::uint64_t seed = 0, std::uint32_t stream_id = 0)
      : params_(p),
        rc_(rc),
        opt_(opt),
        stepper_(p, opt.start ? *opt.start : renewal_point_state(p), dt, std::move(noise)),
        detector_(rc),
        seed_(seed),
        stream_id_(stream_id) {
    const SystemState& s = stepper_.state();
    counting_ = !opt.start.has_value();
    cycle_start_ = s.t;
    max_v_ = s.v;
    max_h_ = s.h;
    init_accumulators();
  }

  CycleStream(const ModelParams& p, const RenewalConfig& rc, double dt, Noise noise, const CollectOptions& opt,
              const Checkpoint& cp, std::uint64_t seed = 0, std::uint32_t stream_id = 0)
      : params_(p),
        rc_(rc),
        opt_(opt),
        stepper_(p, dt, std::move(noise), cp.stepper),
        detector_(rc, cp.armed),
        seed_(seed),
        stream_id_(stream_id),
        counting_(cp.counting),
        cycle_start_(cp.cycle_start),
        max_v_(cp.max_v),
        max_h_(cp.max_h),
        completed_(cp.completed) {
    init_accumulators();
  }

  /// Runs until the next cycle completes. Cycles exceeding the time cap are
  /// dropped (counted in aborted()) and the path restarts at the renewal point.
  RenewalCycle next_cycle() {
    const double dt = stepper_.dt();
    for (;;) {
      const SystemState prev = stepper_.state();
      const StepOutcome& o = stepper_.advance();
      const auto theta = detector_.feed(prev, o.state, o.dl);
      if (theta) {
        const double t_fire = prev.t + *theta * dt;
        pend(prev, *theta * dt);
        std::optional<RenewalCycle> done;
        if (counting_) done = finish(t_fire);
        counting_ = true;
        pending_.clear();
        cycle_start_ = t_fire;
        max_v_ = std::max(rc_.renewal_v, o.state.v);
        max_h_ = o.state.h;
        pend(prev, (1.0 - *theta) * dt);
        if (done) return *done;
        continue;
      }
      pend(prev, dt);
      max_v_ = std::max(max_v_, o.state.v);
      max_h_ = std::max(max_h_, o.state.h);
      if (o.state.t - cycle_start_ > opt_.t_cap_per_cycle) restart_after_abort();
    }
  }

  /// Restart point for the path and the detector. Occupation already pending
  /// for the open cycle is not part of it.
  Checkpoint checkpoint() const {
    return {stepper_.checkpoint(), detector_.armed(), counting_, cycle_start_, max_v_, max_h_, completed_};
  }

  std::uint64_t aborted() const { return aborted_; }
  const SystemState& state() const { return stepper_.state(); }
  std::uint64_t completed() const { return completed_; }

  /// Moves the accumulated measures into the batch.
  void export_to(CycleBatch& b) {
    b.aborted += aborted_;
    if (occupation_) b.occupation = std::move(occupation_);
    if (v_tail_) b.v_tail = std::move(v_tail_);
    if (h_tail_) b.h_tail = std::move(h_tail_);
  }

 private:
  struct Pending {
    std::uint32_t cell;
    std::uint32_t vbin;
    std::uint32_t hbin;
    double w;
  };

  void init_accumulators() {
    if (opt_.binning) occupation_.emplace(*opt_.binning);
    if (opt_.v_tail) v_tail_ = *opt_.v_tail;
    if (opt_.h_tail) h_tail_ = *opt_.h_tail;
  }

  void pend(const SystemState& s, double w) {
    if (!counting_ || w <= 0.0) return;
    if (!occupation_ && !v_tail_ && !h_tail_) return;
    Pending p{0, 0, 0, w};
    if (occupation_) p.cell = static_cast<std::uint32_t>(occupation_->binning().index(s.h, s.v));
    if (v_tail_) p.vbin = static_cast<std::uint32_t>(v_tail_->bin_of(s.v));
    if (h_tail_) p.hbin = static_cast<std::uint32_t>(h_tail_->bin_of(s.h));
    if (!pending_.empty()) {
      Pending& last = pending_.back();
      if (last.cell == p.cell && last.vbin == p.vbin && last.hbin == p.hbin) {
        last.w += w;
        return;
      }
    }
    pending_.push_back(p);
  }

  RenewalCycle finish(double t_fire) {
    RenewalCycle c;
    c.start = cycle_start_;
    c.duration = t_fire - cycle_start_;
    c.max_v = max_v_;
    c.max_h = max_h_;
    c.seed = seed_;
    c.stream_id = stream_id_;
    c.index = completed_;
    const std::size_t group = static_cast<std::size_t>(completed_) * std::max<std::size_t>(opt_.lanes, 1) + stream_id_;
    for (const Pending& p : pending_) {
      if (occupation_) occupation_->add_cell(p.cell, p.w);
      if (v_tail_) v_tail_->add_bin(group, p.vbin, p.w);
      if (h_tail_) h_tail_->add_bin(group, p.hbin, p.w);
    }
    if (v_tail_) v_tail_->unit_max.push_back(max_v_);
    if (h_tail_) h_tail_->unit_max.push_back(max_h_);
    ++completed_;
    return c;
  }

  void restart_after_abort() {
    ++aborted_;
    pending_.clear();
    SystemState s = renewal_point_state(params_);
    s.t = stepper_.state().t;
    const std::uint64_t k = stepper_.step();
    stepper_ = Stepper<Noise>(params_, stepper_.dt(), stepper_.noise(), {s, k, s.t, k});
    detector_.reset();
    counting_ = true;
    cycle_start_ = s.t;
    max_v_ = s.v;
    max_h_ = s.h;
  }

  ModelParams params_;
  RenewalConfig rc_;
  CollectOptions opt_;
  Stepper<Noise> stepper_;
  RenewalDetector detector_;
  std::uint64_t seed_;
  std::uint32_t stream_id_;
  bool counting_ = true;
  double cycle_start_ = 0.0;
  double max_v_ = 0.0;
  double max_h_ = 0.0;
  std::uint64_t completed_ = 0;
  std::uint64_t aborted_ = 0;
  std::vector<Pending> pending_;
  std::optional<EmpiricalMeasure> occupation_;
  std::optional<TailHistogram> v_tail_;
  std::optional<TailHistogram> h_tail_;
};

/// Collects n_cycles completed cycles over opt.lanes lanes; lane i uses
/// NoiseSource(seed, i) and contributes its share of the cycles. Lane results
/// are merged in lane order.
inline CycleBatch collect_cycles(const ModelParams& p, std::uint64_t n_cycles, const StepConfig& cfg,
                                 std::uint64_t seed, const CollectOptions& opt = {}) {
  p.validate();
  cfg.validate(p);
  require(n_cycles >= 1, errc::invalid_argument, "collect_cycles: n_cycles must be >= 1");
  const RenewalConfig rc = derive_renewal_config(p);
  const std::size_t lanes = std::max<std::size_t>(opt.lanes, 1);
  auto parts = run_lanes(
      lanes,
      [&](std::size_t lane) {
        CycleBatch b;
        b.params = p;
        b.renewal = rc;
        b.dt = cfg.dt;
        b.seed = seed;
        const std::uint64_t n = lane_share(n_cycles, lanes, lane);
        CycleStream<NoiseSource> stream(p, rc, cfg.dt, NoiseSource(seed, static_cast<std::uint32_t>(lane)), opt, seed,
                                        static_cast<std::uint32_t>(lane));
        b.cycles.reserve(n);
        for (std::uint64_t i = 0; i < n; ++i) b.cycles.push_back(stream.next_cycle());
        stream.export_to(b);
        return b;
      },
      opt.threads);
  CycleBatch out = std::move(parts.front());
  for (std::size_t i = 1; i < parts.size(); ++i) out.merge(parts[i]);
  return out;
}

inline constexpr const char* kCycleFileMagic = "inertdrift-cycles";
inline constexpr int kCycleFileVersion = 1;

inline void write_cycle_file(std::ostream& os, const CycleBatch& b) {
  os << std::setprecision(17);
  os << kCycleFileMagic << ' ' << kCycleFileVersion << '\n';
  os << "gamma=" << b.params.gamma << '\n'
     << "g=" << b.params.g << '\n'
     << "gamma_zero_mode=" << (b.params.gamma_zero_mode ? 1 : 0) << '\n'
     << "dt=" << b.dt << '\n'
     << "a=" << b.renewal.a << '\n'
     << "b=" << b.renewal.b << '\n'
     << "renewal_v=" << b.renewal.renewal_v << '\n'
     << "boundary_tol=" << b.renewal.boundary_tol << '\n'
     << "seed=" << b.seed << '\n'
     << "aborted=" << b.aborted << '\n'
     << "n_cycles=" << b.cycles.size() << '\n';
  os << "duration,max_v,max_h\n";
  for (const auto& c : b.cycles) os << c.duration << ',' << c.max_v << ',' << c.max_h << '\n';
}

inline CycleBatch read_cycle_file(std::istream& is) {
  std::string magic;
  int version = 0;
  is >> magic >> version;
  require(static_cast<bool>(is) && magic == kCycleFileMagic, errc::io, "cycle file: bad magic line");
  require(version == kCycleFileVersion, errc::io, "cycle file: unsupported version " + std::to_string(version));
  std::string line;
  std::getline(is, line);
  CycleBatch b;
  std::uint64_t n = 0;
  auto num = [](const std::string& s) {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    require(pos == s.size(), errc::io, "cycle file: bad number '" + s + "'");
    return v;
  };
  while (std::getline(is, line)) {
    if (line == "duration,max_v,max_h") break;
    const auto eq = line.find('=');
    require(eq != std::string::npos, errc::io, "cycle file: bad header line '" + line + "'");
    const std::string key = line.substr(0, eq);
    const std::string val = line.substr(eq + 1);
    if (key == "gamma") b.params.gamma = num(val);
    else if (key == "g") b.params.g = num(val);
    else if (key == "gamma_zero_mode") b.params.gamma_zero_mode = val == "1";
    else if (key == "dt") b.dt = num(val);
    else if (key == "a") b.renewal.a = num(val);
    else if (key == "b") b.renewal.b = num(val);
    else if (key == "renewal_v") b.renewal.renewal_v = num(val);
    else if (key == "boundary_tol") b.renewal.boundary_tol = num(val);
    else if (key == "seed") b.seed = std::stoull(val);
    else if (key == "aborted") b.aborted = std::stoull(val);
    else if (key == "n_cycles") n = std::stoull(val);
    else throw Error(errc::io, "cycle file: unknown header key '" + key + "'");
  }
  b.cycles.reserve(n);
  double start = 0.0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string f[3];
    for (auto& x : f) require(static_cast<bool>(std::getline(ls, x, ',')), errc::io, "cycle file: short record");
    RenewalCycle c;
    c.start = start;
    c.duration = num(f[0]);
    c.max_v = num(f[1]);
    c.max_h = num(f[2]);
    c.seed = b.seed;
    c.index = b.cycles.size();
    start += c.duration;
    b.cycles.push_back(c);
  }
  require(b.cycles.size() == n, errc::io, "cycle file: record count does not match header");
  b.params.validate();
  b.renewal.validate();
  return b;
}

struct ZetaTailReport {
  std::vector<double> t;         // abscissa t, survival evaluated at t^2
  std::vector<double> survival;  // empirical P(zeta > t^2)
  std::vector<double> counts;    // number of cycles exceeding t^2
  double c = 0.0;                // fitted decay rate in log P(zeta > t^2) ~ intercept - c t
  double intercept = 0.0;
  stats::Interval c_ci;          // 95% interval
  double curvature = 0.0;        // quadratic coefficient of log survival in t
  stats::Interval curvature_ci;
  bool monotone = false;
  bool concave = false;
  bool degenerate = false;
  bool c_positive() const { return !degenerate && c_ci.lo > 0.0; }
};

/// Empirical survival P(zeta > t^2) on levels log-spaced in survival from 1/2
/// down to 30 exceedances, and the weighted fit log S = const - c t (weights
/// n S / (1 - S), the inverse delta-method variance of log S).
inline ZetaTailReport zeta_tail_check(const CycleBatch& batch, double level = 0.95) {
  require(batch.cycles.size() >= 100, errc::insufficient_data, "zeta tail: insufficient cycles");
  std::vector<double> d = batch.durations();
  std::sort(d.begin(), d.end());
  ZetaTailReport r;
  const double n = static_cast<double>(d.size());
  if (d.front() == d.back()) {
    r.degenerate = true;
    return r;
  }
  const double s_min = 30.0 / n;
  const int levels = 16;
  double prev_t = -1.0;
  for (int k = 0; k < levels; ++k) {
    const double s_target = 0.5 * std::pow(s_min / 0.5, static_cast<double>(k) / (levels - 1));
    // duration with exactly floor(n s_target) cycles above it
    const std::size_t above = static_cast<std::size_t>(std::floor(n * s_target));
    const double q = d[d.size() - above - 1];
    const double t = std::sqrt(q);
    if (t <= prev_t) continue;
    const auto it = std::upper_bound(d.begin(), d.end(), q);
    const double cnt = static_cast<double>(d.end() - it);
    if (cnt < 1.0) continue;
    prev_t = t;
    r.t.push_back(t);
    r.counts.push_back(cnt);
    r.survival.push_back(cnt / n);
  }
  if (r.t.size() < 4) {
    r.degenerate = true;
    return r;
  }
  std::vector<double> y, w, t2;
  for (std::size_t i = 0; i < r.t.size(); ++i) {
    y.push_back(std::log(r.survival[i]));
    w.push_back(r.counts[i] / (1.0 - r.survival[i]));
    t2.push_back(r.t[i] * r.t[i]);
  }
  const stats::LinearFit f = stats::linear_fit(r.t, y, w);
  r.c = -f.slope;
  r.intercept = f.intercept;
  const stats::Interval sci = f.slope_ci(level);
  r.c_ci = {-sci.hi, -sci.lo};
  r.monotone = std::is_sorted(r.survival.rbegin(), r.survival.rend()) &&
               std::adjacent_find(r.survival.begin(), r.survival.end()) == r.survival.end();
  const stats::QuadraticFit qf = stats::quadratic_fit(r.t, y, w);
  r.curvature = qf.c2;
  r.curvature_ci = qf.c2_ci(level);
  r.concave = r.curvature_ci.hi < 0.0;
  return r;
}

struct IidReport {
  double lag1 = 0.0;
  double lag2 = 0.0;
  double band = 0.0;  // 99% null band for the autocorrelations
  double ks_halves_p = 1.0;
  bool consistent = true;
};

inline IidReport cycle_iid_diagnostics(const std::vector<double>& durations) {
  require(durations.size() >= 100, errc::insufficient_data, "iid diagnostics: insufficient cycles");
  IidReport r;
  const double n = static_cast<double>(durations.size());
  r.lag1 = stats::autocorrelation(durations, 1);
  r.lag2 = stats::autocorrelation(durations, 2);
  r.band = stats::normal_two_sided_z(0.99) / std::sqrt(n);
  const std::size_t half = durations.size() / 2;
  r.ks_halves_p = stats::ks_two_sample({durations.begin(), durations.begin() + static_cast<std::ptrdiff_t>(half)},
                                       {durations.begin() + static_cast<std::ptrdiff_t>(half), durations.end()})
                      .p_value;
  r.consistent = std::fabs(r.lag1) < r.band && std::fabs(r.lag2) < r.band && r.ks_halves_p > 0.01;
  return r;
}

inline IidReport cycle_iid_diagnostics(const CycleBatch& batch) { return cycle_iid_diagnostics(batch.durations()); }

}  // namespace inertdrift
