#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "egocomm/error.hpp"

namespace egocomm::special {

namespace detail {

// Modified Lentz evaluation of the continued fraction for I_x(a,b).
inline double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIterations = 100000;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIterations; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) return h;
  }
  fail(ErrorCode::DomainError, "incomplete beta continued fraction did not converge");
}

}  // namespace detail

/// Regularized incomplete beta I_x(a, b). Evaluated by continued fraction,
/// switching to 1 - I_{1-x}(b, a) when x > (a+1)/(a+b+2).
inline double reg_incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0) || !(x >= 0.0 && x <= 1.0) || !std::isfinite(a) || !std::isfinite(b))
    fail(ErrorCode::DomainError, "reg_incomplete_beta(a=" + std::to_string(a) + ", b=" + std::to_string(b) +
                                     ", x=" + std::to_string(x) + ")");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double log_front =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * detail::beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * detail::beta_continued_fraction(b, a, 1.0 - x) / b;
}

/// P(T <= t) for Student's t with `df` degrees of freedom.
inline double student_t_cdf(double t, double df) {
  if (!(df > 0.0)) fail(ErrorCode::DomainError, "student_t_cdf: df must be > 0");
  if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
  const double tail = 0.5 * reg_incomplete_beta(0.5 * df, 0.5, df / (df + t * t));
  return t >= 0.0 ? 1.0 - tail : tail;
}

/// Two-sided p-value P(|T| >= |t|).
inline double student_t_two_sided_p(double t, double df) {
  if (!(df > 0.0)) fail(ErrorCode::DomainError, "student_t_two_sided_p: df must be > 0");
  if (std::isinf(t)) return 0.0;
  return reg_incomplete_beta(0.5 * df, 0.5, df / (df + t * t));
}

inline double f_cdf(double f, double df_num, double df_den) {
  if (!(df_num > 0.0) || !(df_den > 0.0)) fail(ErrorCode::DomainError, "f_cdf: dfs must be > 0");
  if (f <= 0.0) return 0.0;
  if (std::isinf(f)) return 1.0;
  return reg_incomplete_beta(0.5 * df_num, 0.5 * df_den, df_num * f / (df_num * f + df_den));
}

/// Upper tail P(F > f), computed directly rather than as 1 - cdf.
inline double f_survival(double f, double df_num, double df_den) {
  if (!(df_num > 0.0) || !(df_den > 0.0)) fail(ErrorCode::DomainError, "f_survival: dfs must be > 0");
  if (f <= 0.0) return 1.0;
  if (std::isinf(f)) return 0.0;
  return reg_incomplete_beta(0.5 * df_den, 0.5 * df_num, df_den / (df_den + df_num * f));
}

/// Inverse of student_t_cdf by bisection, to 1e-10 in t.
inline double student_t_quantile(double prob, double df) {
  if (!(prob > 0.0 && prob < 1.0)) fail(ErrorCode::DomainError, "student_t_quantile: prob must be in (0,1)");
  if (prob == 0.5) return 0.0;
  if (prob < 0.5) return -student_t_quantile(1.0 - prob, df);
  double lo = 0.0, hi = 1.0;
  while (student_t_cdf(hi, df) < prob) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e300) fail(ErrorCode::DomainError, "student_t_quantile: bracket failed");
  }
  while (hi - lo > 1e-10 * std::max(1.0, hi)) {
    const double mid = 0.5 * (lo + hi);
    (student_t_cdf(mid, df) < prob ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// Inverse of f_cdf by bisection, to 1e-10 in f.
inline double f_quantile(double prob, double df_num, double df_den) {
  if (!(prob > 0.0 && prob < 1.0)) fail(ErrorCode::DomainError, "f_quantile: prob must be in (0,1)");
  double lo = 0.0, hi = 1.0;
  while (f_cdf(hi, df_num, df_den) < prob) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e300) fail(ErrorCode::DomainError, "f_quantile: bracket failed");
  }
  while (hi - lo > 1e-10 * std::max(1.0, hi)) {
    const double mid = 0.5 * (lo + hi);
    (f_cdf(mid, df_num, df_den) < prob ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace egocomm::special
