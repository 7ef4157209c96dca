#pragma once

// Small statistics toolkit: binomial intervals, least squares with slope
// intervals, Kolmogorov-Smirnov tests, chi-square independence, autocorrelation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "inertdrift/error.hpp"

namespace inertdrift::stats {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double x) const { return lo <= x && x <= hi; }
  double width() const { return hi - lo; }
};

/// Two-sided standard normal quantile for confidence level `level` (0.99 -> 2.5758).
inline double normal_two_sided_z(double level) {
  return boost::math::quantile(boost::math::normal(), 0.5 + 0.5 * level);
}

inline double student_two_sided_t(double level, double df) {
  require(df > 0.0, errc::insufficient_data, "student t: need positive degrees of freedom");
  return boost::math::quantile(boost::math::students_t(df), 0.5 + 0.5 * level);
}

inline double chi2_sf(double x, double df) {
  if (x <= 0.0) return 1.0;
  return boost::math::cdf(boost::math::complement(boost::math::chi_squared(df), x));
}

inline Interval wilson_interval(std::uint64_t successes, std::uint64_t n, double level = 0.99) {
  require(n > 0, errc::insufficient_data, "wilson: zero trials");
  require(successes <= n, errc::invalid_argument, "wilson: successes exceed trials");
  const double z = normal_two_sided_z(level);
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(successes) / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double centre = (p + z2 / (2.0 * nn)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / denom;
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

inline double mean(const std::vector<double>& x) {
  require(!x.empty(), errc::insufficient_data, "mean of empty sample");
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

/// Unbiased sample variance.
inline double variance(const std::vector<double>& x) {
  require(x.size() >= 2, errc::insufficient_data, "variance needs two values");
  const double m = mean(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return ss / static_cast<double>(x.size() - 1);
}

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;
  double intercept_se = 0.0;
  double r2 = 0.0;
  std::size_t n = 0;

  double df() const { return static_cast<double>(n) - 2.0; }
  Interval slope_ci(double level) const {
    const double t = student_two_sided_t(level, df());
    return {slope - t * slope_se, slope + t * slope_se};
  }
  double operator()(double x) const { return intercept + slope * x; }
};

/// Weighted least squares y ~ intercept + slope x. Standard errors use the
/// residual scale, so weights only need to be relative.
inline LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y,
                            const std::vector<double>& w = {}) {
  require(x.size() == y.size(), errc::invalid_argument, "linear_fit: size mismatch");
  require(w.empty() || w.size() == x.size(), errc::invalid_argument, "linear_fit: weight size mismatch");
  const std::size_t n = x.size();
  require(n >= 3, errc::insufficient_data, "linear_fit: need at least 3 points");
  auto wt = [&](std::size_t i) { return w.empty() ? 1.0 : w[i]; };
  double sw = 0.0, sx = 0.0, sy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sw += wt(i);
    sx += wt(i) * x[i];
    sy += wt(i) * y[i];
  }
  const double mx = sx / sw;
  const double my = sy / sw;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += wt(i) * (x[i] - mx) * (x[i] - mx);
    sxy += wt(i) * (x[i] - mx) * (y[i] - my);
    syy += wt(i) * (y[i] - my) * (y[i] - my);
  }
  require(sxx > 0.0, errc::insufficient_data, "linear_fit: abscissae are all equal");
  LinearFit f;
  f.n = n;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double rss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - f(x[i]);
    rss += wt(i) * r * r;
  }
  // weights are normalised to sum n so that the residual scale is comparable
  const double scale = static_cast<double>(n) / sw;
  const double sigma2 = rss * scale / (static_cast<double>(n) - 2.0);
  f.slope_se = std::sqrt(sigma2 / (sxx * scale));
  f.intercept_se = std::sqrt(sigma2 * (1.0 / static_cast<double>(n) + mx * mx / (sxx * scale)));
  f.r2 = syy > 0.0 ? 1.0 - rss / syy : 1.0;
  return f;
}

struct QuadraticFit {
  double c0 = 0.0, c1 = 0.0, c2 = 0.0;
  double c2_se = 0.0;
  std::size_t n = 0;

  Interval c2_ci(double level) const {
    const double t = student_two_sided_t(level, static_cast<double>(n) - 3.0);
    return {c2 - t * c2_se, c2 + t * c2_se};
  }
};

/// Weighted least squares y ~ c0 + c1 x + c2 x^2 (x centred internally for conditioning).
inline QuadraticFit quadratic_fit(const std::vector<double>& x, const std::vector<double>& y,
                                  const std::vector<double>& w = {}) {
  require(x.size() == y.size() && (w.empty() || w.size() == x.size()), errc::invalid_argument,
          "quadratic_fit: size mismatch");
  const std::size_t n = x.size();
  require(n >= 4, errc::insufficient_data, "quadratic_fit: need at least 4 points");
  auto wt = [&](std::size_t i) { return w.empty() ? 1.0 : w[i]; };
  double sw = 0.0, sx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sw += wt(i);
    sx += wt(i) * x[i];
  }
  const double xm = sx / sw;
  double m[3][3] = {}, rhs[3] = {};
  for (std::size_t i = 0; i < n; ++i) {
    const double u = x[i] - xm;
    const double f[3] = {1.0, u, u * u};
    for (int a = 0; a < 3; ++a) {
      rhs[a] += wt(i) * f[a] * y[i];
      for (int b = 0; b < 3; ++b) m[a][b] += wt(i) * f[a] * f[b];
    }
  }
  // inverse of the symmetric 3x3 normal matrix by cofactors
  const double det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
                     m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                     m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
  require(std::fabs(det) > 0.0, errc::insufficient_data, "quadratic_fit: singular design");
  double inv[3][3];
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) {
      const int r0 = (b + 1) % 3, r1 = (b + 2) % 3, c0 = (a + 1) % 3, c1 = (a + 2) % 3;
      inv[a][b] = (m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0]) / det;
    }
  double beta[3] = {};
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) beta[a] += inv[a][b] * rhs[b];
  double rss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double u = x[i] - xm;
    const double r = y[i] - (beta[0] + beta[1] * u + beta[2] * u * u);
    rss += wt(i) * r * r;
  }
  const double scale = static_cast<double>(n) / sw;
  const double sigma2 = rss * scale / (static_cast<double>(n) - 3.0);
  QuadraticFit q;
  q.n = n;
  q.c2 = beta[2];
  q.c1 = beta[1] - 2.0 * beta[2] * xm;
  q.c0 = beta[0] - beta[1] * xm + beta[2] * xm * xm;
  q.c2_se = std::sqrt(sigma2 * inv[2][2] / scale);
  return q;
}

/// Asymptotic Kolmogorov distribution tail P(K > lambda).
inline double kolmogorov_sf(double lambda) {
  if (lambda <= 0.0) return 1.0;
  if (lambda < 0.2) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 == 1 ? term : -term);
    if (term < 1e-16) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

/// One-sample KS against a continuous cdf, with the Stephens small-sample correction.
inline KsResult ks_one_sample(std::vector<double> data, const std::function<double(double)>& cdf) {
  require(!data.empty(), errc::insufficient_data, "ks: empty sample");
  std::sort(data.begin(), data.end());
  const double n = static_cast<double>(data.size());
  double d = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double f = cdf(data[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  const double sn = std::sqrt(n);
  return {d, kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d)};
}

inline KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  require(!a.empty() && !b.empty(), errc::insufficient_data, "ks: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::fabs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  const double ne = std::sqrt(na * nb / (na + nb));
  return {d, kolmogorov_sf((ne + 0.12 + 0.11 / ne) * d)};
}

inline double autocorrelation(const std::vector<double>& x, std::size_t lag) {
  require(x.size() > lag + 2, errc::insufficient_data, "autocorrelation: series too short");
  const double m = mean(x);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    den += (x[i] - m) * (x[i] - m);
    if (i + lag < x.size()) num += (x[i] - m) * (x[i + lag] - m);
  }
  require(den > 0.0, errc::insufficient_data, "autocorrelation: zero variance");
  return num / den;
}

struct Chi2Result {
  double statistic = 0.0;
  double df = 0.0;
  double p_value = 1.0;
};

/// Pearson chi-square test of independence for an r x c table of counts.
/// Rows or columns with zero total are dropped.
inline Chi2Result chi2_independence(const std::vector<std::vector<double>>& table) {
  std::vector<double> rows, cols;
  require(!table.empty(), errc::insufficient_data, "chi2: empty table");
  cols.assign(table.front().size(), 0.0);
  double total = 0.0;
  for (const auto& r : table) {
    require(r.size() == cols.size(), errc::invalid_argument, "chi2: ragged table");
    double rs = 0.0;
    for (std::size_t j = 0; j < r.size(); ++j) {
      rs += r[j];
      cols[j] += r[j];
    }
    rows.push_back(rs);
    total += rs;
  }
  require(total > 0.0, errc::insufficient_data, "chi2: empty table");
  double stat = 0.0;
  std::size_t nr = 0, nc = 0;
  for (double c : cols) nc += c > 0.0;
  for (std::size_t i = 0; i < table.size(); ++i) {
    if (rows[i] <= 0.0) continue;
    ++nr;
    for (std::size_t j = 0; j < cols.size(); ++j) {
      if (cols[j] <= 0.0) continue;
      const double e = rows[i] * cols[j] / total;
      stat += (table[i][j] - e) * (table[i][j] - e) / e;
    }
  }
  require(nr >= 2 && nc >= 2, errc::insufficient_data, "chi2: need at least a 2x2 table");
  Chi2Result res;
  res.statistic = stat;
  res.df = static_cast<double>((nr - 1) * (nc - 1));
  res.p_value = chi2_sf(stat, res.df);
  return res;
}

/// Empirical quantile with linear interpolation (type 7). Sorts a copy.
inline double quantile(std::vector<double> x, double q) {
  require(!x.empty(), errc::insufficient_data, "quantile of empty sample");
  std::sort(x.begin(), x.end());
  const double pos = q * static_cast<double>(x.size() - 1);
  const std::size_t i = static_cast<std::size_t>(std::floor(pos));
  if (i + 1 >= x.size()) return x.back();
  return x[i] + (pos - static_cast<double>(i)) * (x[i + 1] - x[i]);
}

}  // namespace inertdrift::stats
