#ifndef COLLOC_STUDENT_T_HPP
#define COLLOC_STUDENT_T_HPP

#include <cmath>
#include <cstddef>

#include "colloc/errors.hpp"

// Student-t CDF and two-sided critical values, dependency-free. The CDF goes
// through the regularized incomplete beta function evaluated with the Lentz
// continued fraction; the quantile inverts the CDF by bisection.

namespace colloc::stats {

inline double log_beta(double a, double b) {
  return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

namespace detail {

// Continued fraction for the incomplete beta, modified Lentz algorithm.
// https://en.wikipedia.org/wiki/Beta_function#Incomplete_beta_function
inline double incbeta_cf(double x, double a, double b) {
  constexpr double tiny = 1e-300;
  constexpr double eps = 1e-15;
  constexpr int max_terms = 400;

  double c = 1.0;
  double d = 1.0 - (a + b) * x / (a + 1.0);
  if (std::abs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double result = d;

  for (int m = 1; m <= max_terms; ++m) {
    const double dm = static_cast<double>(m);
    // even step
    double num = dm * (b - dm) * x / ((a + 2.0 * dm - 1.0) * (a + 2.0 * dm));
    d = 1.0 + num * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + num / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    result *= d * c;
    // odd step
    num = -(a + dm) * (a + b + dm) * x /
          ((a + 2.0 * dm) * (a + 2.0 * dm + 1.0));
    d = 1.0 + num * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + num / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    result *= delta;
    if (std::abs(delta - 1.0) < eps) break;
  }
  return result;
}

} // namespace detail

// Regularized incomplete beta I_x(a, b).
inline double regularized_incomplete_beta(double x, double a, double b) {
  if (!(a > 0.0) || !(b > 0.0))
    throw ValidationError("regularized_incomplete_beta: a, b must be positive");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_front =
      a * std::log(x) + b * std::log1p(-x) - log_beta(a, b);
  if (x < (a + 1.0) / (a + b + 2.0))
    return std::exp(ln_front) * detail::incbeta_cf(x, a, b) / a;
  return 1.0 - std::exp(b * std::log1p(-x) + a * std::log(x) - log_beta(b, a)) *
                   detail::incbeta_cf(1.0 - x, b, a) / b;
}

// P(T <= t) for T ~ Student-t with df degrees of freedom.
inline double student_t_cdf(double t, double df) {
  if (!(df > 0.0)) throw ValidationError("student_t_cdf: df must be positive");
  if (t == 0.0) return 0.5;
  const double x = df / (df + t * t);
  const double tail = 0.5 * regularized_incomplete_beta(x, 0.5 * df, 0.5);
  return t > 0.0 ? 1.0 - tail : tail;
}

// Two-sided critical value t_{α/2, df} for the given confidence level,
// e.g. t_quantile(0.95, 976) ≈ 1.9624. Bisection to 1e-8 absolute.
inline double t_quantile(double confidence, std::size_t df) {
  if (!(confidence > 0.0) || !(confidence < 1.0))
    throw ValidationError("t_quantile: confidence must be in (0, 1)");
  if (df < 1) throw ValidationError("t_quantile: df must be >= 1");
  const double p = 1.0 - (1.0 - confidence) / 2.0; // upper-tail probability

  const double dfd = static_cast<double>(df);
  double lo = 0.0;
  double hi = 1.0;
  while (student_t_cdf(hi, dfd) < p) {
    hi *= 2.0;
    if (hi > 1e12)
      throw DegenerateInputError("t_quantile: failed to bracket quantile");
  }
  constexpr double tol = 1e-8;
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (student_t_cdf(mid, dfd) < p)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

// Two-sided p-value for an observed t statistic.
inline double two_sided_p_value(double t, double df) {
  const double tail = 1.0 - student_t_cdf(std::abs(t), df);
  return std::min(1.0, 2.0 * tail);
}

} // namespace colloc::stats

#endif
