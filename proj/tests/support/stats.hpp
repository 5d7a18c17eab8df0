#pragma once

// Test-side statistics oracles: sample moments and a one-sided paired t-test
// implemented from the incomplete beta function, independent of the library
// under test.

#include <cmath>
#include <stdexcept>
#include <vector>

namespace teststats {

inline double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double sample_sd(const std::vector<double>& v) {
  double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

namespace detail {

inline double gammaln(double x) { return std::lgamma(x); }

// Continued-fraction core of the regularized incomplete beta (modified Lentz).
inline double betacf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 3e-14;
  constexpr double kFpMin = 1e-300;

  double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kFpMin) d = kFpMin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) return h;
  }
  throw std::runtime_error("betacf did not converge");
}

}  // namespace detail

/// Regularized incomplete beta I_x(a, b).
inline double betai(double a, double b, double x) {
  if (x < 0.0 || x > 1.0) throw std::invalid_argument("betai: x out of range");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  double bt = std::exp(detail::gammaln(a + b) - detail::gammaln(a) - detail::gammaln(b) +
                       a * std::log(x) + b * std::log(1.0 - x));
  if (x < (a + 1.0) / (a + b + 2.0)) return bt * detail::betacf(a, b, x) / a;
  return 1.0 - bt * detail::betacf(b, a, 1.0 - x) / b;
}

/// P(T > t) for Student's t with `df` degrees of freedom (upper tail, t >= 0).
inline double student_t_sf(double t, double df) {
  double p = 0.5 * betai(df / 2.0, 0.5, df / (df + t * t));
  return t >= 0.0 ? p : 1.0 - p;
}

/**
 * One-sided paired t-test p-value for H1: mean(diffs) > 0.
 * Degenerate zero-variance samples collapse to p = 0 or 1 by sign.
 */
inline double paired_t_pvalue(const std::vector<double>& diffs) {
  if (diffs.size() < 2) throw std::invalid_argument("paired_t_pvalue: need >= 2 pairs");
  double m = mean(diffs);
  double sd = sample_sd(diffs);
  if (sd == 0.0) return m > 0.0 ? 0.0 : 1.0;
  double n = static_cast<double>(diffs.size());
  double t = m / (sd / std::sqrt(n));
  return student_t_sf(t, n - 1.0);
}

}  // namespace teststats
