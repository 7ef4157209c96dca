#pragma once

// Binned occupation measures on (H, V) space and one-dimensional grouped
// occupation histograms used for tail regressions.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <ostream>
#include <vector>

#include "inertdrift/core_model.hpp"
#include "inertdrift/error.hpp"
#include "inertdrift/stats.hpp"

namespace inertdrift {

/// Uniform grid on [0, h_max] x [v_min, v_max]. Points outside go to overflow.
struct Binning {
  double h_max = 1.0;
  double v_min = -1.0;
  double v_max = 0.0;
  std::size_t n_h = 200;
  std::size_t n_v = 200;

  void validate() const {
    require(h_max > 0.0 && v_min < v_max && n_h >= 1 && n_v >= 1, errc::invalid_argument,
            "binning: need h_max > 0, v_min < v_max and positive bin counts");
  }

  std::size_t size() const { return n_h * n_v; }

  /// Flat bin index or size() when the point falls outside the grid.
  std::size_t index(double h, double v) const {
    const double fh = h / h_max * static_cast<double>(n_h);
    const double fv = (v - v_min) / (v_max - v_min) * static_cast<double>(n_v);
    if (!(fh >= 0.0 && fh < static_cast<double>(n_h) && fv >= 0.0 && fv < static_cast<double>(n_v))) return size();
    return static_cast<std::size_t>(fh) * n_v + static_cast<std::size_t>(fv);
  }

  std::vector<double> h_edges() const {
    std::vector<double> e(n_h + 1);
    for (std::size_t i = 0; i <= n_h; ++i) e[i] = h_max * static_cast<double>(i) / static_cast<double>(n_h);
    return e;
  }
  std::vector<double> v_edges() const {
    std::vector<double> e(n_v + 1);
    for (std::size_t i = 0; i <= n_v; ++i)
      e[i] = v_min + (v_max - v_min) * static_cast<double>(i) / static_cast<double>(n_v);
    return e;
  }

  friend bool operator==(const Binning&, const Binning&) = default;
};

/// Default grid from the time-weighted 1 - q quantiles of a pilot path:
/// h up to its upper quantile, v between its two-sided quantiles, padded by 5%.
inline Binning binning_from_pilot(const std::vector<double>& h, const std::vector<double>& v, double q = 1e-4,
                                  std::size_t n_h = 200, std::size_t n_v = 200) {
  require(h.size() >= 100 && h.size() == v.size(), errc::insufficient_data, "binning: pilot sample too small");
  Binning b;
  b.n_h = n_h;
  b.n_v = n_v;
  b.h_max = 1.05 * stats::quantile(h, 1.0 - q);
  const double lo = stats::quantile(v, 0.5 * q);
  const double hi = stats::quantile(v, 1.0 - 0.5 * q);
  const double pad = 0.05 * (hi - lo);
  b.v_min = lo - pad;
  b.v_max = hi + pad;
  if (b.h_max <= 0.0) b.h_max = 1.0;
  b.validate();
  return b;
}

/// Occupation (time or count) measure on a fixed binning. Unnormalised
/// measures are mergeable by bin-wise addition.
class EmpiricalMeasure {
 public:
  EmpiricalMeasure() = default;
  explicit EmpiricalMeasure(const Binning& b) : binning_(b), mass_(b.size(), 0.0) { b.validate(); }

  const Binning& binning() const { return binning_; }
  const std::vector<double>& mass() const { return mass_; }
  double overflow() const { return overflow_; }
  double total() const { return total_; }
  bool normalized() const { return normalized_; }

  void add(double h, double v, double w) {
    const std::size_t i = binning_.index(h, v);
    if (i < mass_.size()) {
      mass_[i] += w;
    } else {
      overflow_ += w;
    }
    total_ += w;
  }

  /// Adds to a flat cell index as returned by Binning::index (size() = overflow).
  void add_cell(std::size_t cell, double w) {
    if (cell < mass_.size()) {
      mass_[cell] += w;
    } else {
      overflow_ += w;
    }
    total_ += w;
  }

  double at(std::size_t ih, std::size_t iv) const { return mass_[ih * binning_.n_v + iv]; }

  double overflow_fraction() const { return total_ > 0.0 ? overflow_ / total_ : 0.0; }

  void merge(const EmpiricalMeasure& o) {
    require(binning_ == o.binning_, errc::binning_mismatch, "measure merge: binning mismatch");
    require(!normalized_ && !o.normalized_, errc::invalid_argument, "measure merge: merge before normalising");
    for (std::size_t i = 0; i < mass_.size(); ++i) mass_[i] += o.mass_[i];
    overflow_ += o.overflow_;
    total_ += o.total_;
  }

  /// Probability version (total mass including overflow = 1).
  EmpiricalMeasure normalized_copy() const {
    require(total_ > 0.0, errc::empty_measure, "measure: total mass is zero");
    EmpiricalMeasure m = *this;
    if (normalized_) return m;
    for (double& x : m.mass_) x /= total_;
    m.overflow_ /= total_;
    m.total_ = 1.0;
    m.normalized_ = true;
    return m;
  }

  /// Mass of the set {h in [h0, h1), v in [v0, v1)} counted over whole bins whose centre lies inside.
  double mass_of(double h0, double h1, double v0, double v1) const {
    double s = 0.0;
    const auto he = binning_.h_edges();
    const auto ve = binning_.v_edges();
    for (std::size_t i = 0; i < binning_.n_h; ++i) {
      const double hc = 0.5 * (he[i] + he[i + 1]);
      if (hc < h0 || hc >= h1) continue;
      for (std::size_t j = 0; j < binning_.n_v; ++j) {
        const double vc = 0.5 * (ve[j] + ve[j + 1]);
        if (vc >= v0 && vc < v1) s += at(i, j);
      }
    }
    return s;
  }

  /// Mean of v (bin centres), ignoring overflow.
  double mean_v() const {
    const auto ve = binning_.v_edges();
    double s = 0.0, m = 0.0;
    for (std::size_t i = 0; i < binning_.n_h; ++i)
      for (std::size_t j = 0; j < binning_.n_v; ++j) {
        s += at(i, j) * 0.5 * (ve[j] + ve[j + 1]);
        m += at(i, j);
      }
    require(m > 0.0, errc::empty_measure, "measure: no mass inside the grid");
    return s / m;
  }

  /// Builds a measure directly from arrays (deserialisation and tests).
  static EmpiricalMeasure from_mass(const Binning& b, std::vector<double> mass, double overflow) {
    require(mass.size() == b.size(), errc::invalid_argument, "measure: mass array does not match binning");
    EmpiricalMeasure m(b);
    double t = overflow;
    for (double x : mass) {
      require(x >= 0.0, errc::invalid_argument, "measure: negative mass");
      t += x;
    }
    m.mass_ = std::move(mass);
    m.overflow_ = overflow;
    m.total_ = t;
    return m;
  }

 private:
  Binning binning_;
  std::vector<double> mass_;
  double overflow_ = 0.0;
  double total_ = 0.0;
  bool normalized_ = false;
};

/// Half L1 distance between the normalised measures, overflow treated as one
/// extra bin. This is the TV distance on the binned sigma-algebra, a lower
/// bound for the TV distance of the underlying laws.
inline double tv_distance(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
  require(mu.binning() == nu.binning(), errc::binning_mismatch, "tv_distance: binning mismatch");
  const EmpiricalMeasure a = mu.normalized_copy();
  const EmpiricalMeasure b = nu.normalized_copy();
  double s = std::fabs(a.overflow() - b.overflow());
  for (std::size_t i = 0; i < a.mass().size(); ++i) s += std::fabs(a.mass()[i] - b.mass()[i]);
  return std::min(1.0, 0.5 * s);
}

inline void write_measure_csv(std::ostream& os, const EmpiricalMeasure& m, const std::vector<std::string>& metadata) {
  os << std::setprecision(17);
  for (const auto& line : metadata) os << "# " << line << '\n';
  const Binning& b = m.binning();
  os << "# overflow=" << m.overflow() << " total=" << m.total() << '\n';
  os << "h_lo,h_hi,v_lo,v_hi,mass\n";
  const auto he = b.h_edges();
  const auto ve = b.v_edges();
  for (std::size_t i = 0; i < b.n_h; ++i)
    for (std::size_t j = 0; j < b.n_v; ++j)
      os << he[i] << ',' << he[i + 1] << ',' << ve[j] << ',' << ve[j + 1] << ',' << m.at(i, j) << '\n';
}

enum class TailAxis { gap, velocity };

inline const char* to_string(TailAxis a) { return a == TailAxis::gap ? "gap" : "velocity"; }

/// One-dimensional occupation histogram with fine uniform bins on [lo, hi],
/// split into independent groups (e.g. by cycle index) for resampling error
/// bars. unit_max holds the maximum reached by each independent unit (a
/// renewal cycle or a single sample) and counts how many units support a level.
struct TailHistogram {
  TailAxis axis = TailAxis::velocity;
  double lo = 0.0;
  double hi = 1.0;
  std::size_t n_bins = 1;
  std::vector<std::vector<double>> group_mass;  // [group][bin], last bin = mass above hi
  std::vector<double> group_below;              // mass below lo per group
  std::vector<double> unit_max;

  TailHistogram() = default;
  TailHistogram(TailAxis ax, double lo_, double hi_, std::size_t bins, std::size_t groups)
      : axis(ax), lo(lo_), hi(hi_), n_bins(bins), group_mass(groups, std::vector<double>(bins + 1, 0.0)),
        group_below(groups, 0.0) {
    require(hi > lo && bins >= 1 && groups >= 2, errc::invalid_argument,
            "tail histogram: need hi > lo, bins >= 1, groups >= 2");
  }

  std::size_t groups() const { return group_mass.size(); }
  double bin_width() const { return (hi - lo) / static_cast<double>(n_bins); }
  double edge(std::size_t i) const { return lo + bin_width() * static_cast<double>(i); }

  /// Bin of y: n_bins for mass above hi, n_bins + 1 for mass below lo.
  std::size_t bin_of(double y) const {
    if (y < lo) return n_bins + 1;
    const double f = (y - lo) / (hi - lo) * static_cast<double>(n_bins);
    return f >= static_cast<double>(n_bins) ? n_bins : static_cast<std::size_t>(f);
  }

  void add_bin(std::size_t group, std::size_t bin, double w) {
    if (bin > n_bins) {
      group_below[group % groups()] += w;
    } else {
      group_mass[group % groups()][bin] += w;
    }
  }

  void add(std::size_t group, double y, double w) { add_bin(group, bin_of(y), w); }

  void merge(const TailHistogram& o) {
    require(axis == o.axis && lo == o.lo && hi == o.hi && n_bins == o.n_bins && groups() == o.groups(),
            errc::binning_mismatch, "tail histogram merge: layout mismatch");
    for (std::size_t g = 0; g < groups(); ++g) {
      for (std::size_t i = 0; i <= n_bins; ++i) group_mass[g][i] += o.group_mass[g][i];
      group_below[g] += o.group_below[g];
    }
    unit_max.insert(unit_max.end(), o.unit_max.begin(), o.unit_max.end());
  }

  /// Survival mass above edge(k) and total mass, optionally leaving one group out.
  std::pair<double, double> survival(std::size_t k, std::size_t skip_group = static_cast<std::size_t>(-1)) const {
    double above = 0.0, total = 0.0;
    for (std::size_t g = 0; g < groups(); ++g) {
      if (g == skip_group) continue;
      double s = 0.0;
      for (std::size_t i = k; i <= n_bins; ++i) s += group_mass[g][i];
      above += s;
      double t = group_below[g];
      for (std::size_t i = 0; i <= n_bins; ++i) t += group_mass[g][i];
      total += t;
    }
    return {above, total};
  }

  /// Number of units whose maximum exceeds y.
  std::size_t units_above(double y) const {
    return static_cast<std::size_t>(std::count_if(unit_max.begin(), unit_max.end(), [y](double m) { return m > y; }));
  }

  /// Histogram of i.i.d. samples (each a unit of mass 1), grouped round-robin.
  static TailHistogram from_samples(TailAxis ax, const std::vector<double>& xs, double lo, double hi,
                                    std::size_t bins, std::size_t groups) {
    TailHistogram t(ax, lo, hi, bins, groups);
    for (std::size_t i = 0; i < xs.size(); ++i) t.add(i, xs[i], 1.0);
    t.unit_max = xs;
    return t;
  }
};

}  // namespace inertdrift
