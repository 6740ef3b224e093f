#pragma once

#include <cmath>
#include <limits>

#include "spemix/error.hpp"

namespace spemix {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kLogTwoPi = 1.8378770664093454836;
inline constexpr double kSqrtTwo = 1.4142135623730950488;
inline constexpr double kLn2 = 0.69314718055994530942;

inline double log_pdf_normal(double s) { return -0.5 * s * s - 0.5 * kLogTwoPi; }

namespace detail {

// Laplace continued fraction for the scaled upper tail: for t > 0,
// Phi(-t) = phi(t) / M(t) with M(t) = t + 1/(t + 2/(t + 3/(...))).
// 64 levels are far more than needed at the |s| >= 8 switch point.
inline double mills_cf(double t) {
  double acc = t;
  for (int j = 64; j >= 1; --j) acc = t + j / acc;
  return acc;
}

}  // namespace detail

// log Phi(s), stable over s in [-40, 40] and beyond: erfc in the middle,
// continued fraction in the deep lower tail, log1p near the upper limit.
inline double log_cdf_normal(double s) {
  if (!std::isfinite(s)) throw ValidationError("log_cdf_normal: non-finite input");
  if (s < -8.0) return log_pdf_normal(s) - std::log(detail::mills_cf(-s));
  if (s <= 0.0) return std::log(0.5 * std::erfc(-s / kSqrtTwo));
  return std::log1p(-0.5 * std::erfc(s / kSqrtTwo));
}

// Inverse Mills ratio phi(s)/Phi(s). Underflows to 0 in the far upper tail,
// which is the correct limit.
inline double phi_over_Phi(double s) {
  if (!std::isfinite(s)) throw ValidationError("phi_over_Phi: non-finite input");
  if (s < -8.0) return detail::mills_cf(-s);
  return std::exp(log_pdf_normal(s) - log_cdf_normal(s));
}

inline double cdf_normal(double s) { return 0.5 * std::erfc(-s / kSqrtTwo); }

// Digamma for positive arguments: recurrence up to 8, then the asymptotic
// series through the x^-10 Bernoulli term (abs error < 1e-12 there).
inline double digamma(double x) {
  if (!(x > 0.0)) throw ValidationError("digamma: requires x > 0");
  double acc = 0.0;
  while (x < 8.0) {
    acc -= 1.0 / x;
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  double series = std::log(x) - 0.5 * inv -
                  inv2 * (1.0 / 12.0 -
                          inv2 * (1.0 / 120.0 -
                                  inv2 * (1.0 / 252.0 -
                                          inv2 * (1.0 / 240.0 - inv2 / 132.0))));
  return acc + series;
}

// Regularized lower incomplete gamma P(a, x): series for x < a+1, Lentz
// continued fraction for the complement otherwise.
inline double gamma_cdf_lower(double a, double x) {
  if (!(a > 0.0)) throw ValidationError("gamma_cdf_lower: requires a > 0");
  if (x <= 0.0) return 0.0;
  const double log_prefix = a * std::log(x) - x - std::lgamma(a);
  if (x < a + 1.0) {
    double term = 1.0 / a;
    double sum = term;
    double ap = a;
    for (int k = 0; k < 500; ++k) {
      ap += 1.0;
      term *= x / ap;
      sum += term;
      if (std::fabs(term) < std::fabs(sum) * 1e-16) break;
    }
    return std::exp(log_prefix) * sum;
  }
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int k = 1; k <= 500; ++k) {
    double an = -k * (k - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1.0) < 1e-16) break;
  }
  return 1.0 - std::exp(log_prefix) * h;
}

// Log normalizing constant of the power exponential density:
// log p + log Gamma(p/2) - (p/2) log pi - log Gamma(1 + p/(2 beta))
//   - (1 + p/(2 beta)) log 2.
inline double log_mpe_normalizer(int p, double beta) {
  if (p < 1) throw ValidationError("log_mpe_normalizer: requires p >= 1");
  if (!(beta > 0.0)) throw ValidationError("log_mpe_normalizer: requires beta > 0");
  const double half_p = 0.5 * p;
  const double shape = 1.0 + half_p / beta;
  return std::log(static_cast<double>(p)) + std::lgamma(half_p) -
         half_p * std::log(kPi) - std::lgamma(shape) - shape * kLn2;
}

}  // namespace spemix
