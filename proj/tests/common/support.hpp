#pragma once

// Test-side helpers: deterministic random instances, finite-difference
// oracles, and Kolmogorov-Smirnov machinery. Lives outside the library on
// purpose so library code cannot be "tested against itself" where an
// independent route is required.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "spemix/rng.hpp"

namespace testsup {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline MatrixXd random_gaussian_matrix(int rows, int cols, spemix::Rng& rng) {
  MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = rng.normal();
  return m;
}

inline VectorXd random_gaussian_vector(int n, spemix::Rng& rng) {
  VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = rng.normal();
  return v;
}

// Haar-ish orthogonal matrix: QR of a Gaussian matrix with the R diagonal
// signs folded in.
inline MatrixXd random_orthogonal(int p, spemix::Rng& rng) {
  MatrixXd a = random_gaussian_matrix(p, p, rng);
  Eigen::HouseholderQR<MatrixXd> qr(a);
  MatrixXd q = qr.householderQ();
  MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < p; ++j)
    if (r(j, j) < 0) q.col(j) = -q.col(j);
  return q;
}

// Well-conditioned random SPD matrix with eigenvalues in about [0.5, 3.5].
inline MatrixXd random_spd(int p, spemix::Rng& rng) {
  MatrixXd q = random_orthogonal(p, rng);
  VectorXd eigs(p);
  for (int j = 0; j < p; ++j) eigs[j] = 0.5 + 3.0 * rng.uniform();
  return q * eigs.asDiagonal() * q.transpose();
}

// SPD matrix with a prescribed eigenvalue list (descending not required).
inline MatrixXd spd_with_eigenvalues(const VectorXd& eigs, spemix::Rng& rng) {
  MatrixXd q = random_orthogonal(static_cast<int>(eigs.size()), rng);
  return q * eigs.asDiagonal() * q.transpose();
}

// Central finite-difference gradient of a scalar function.
inline VectorXd fd_gradient(const std::function<double(const VectorXd&)>& f,
                            const VectorXd& x, double h) {
  VectorXd g(x.size());
  for (int i = 0; i < x.size(); ++i) {
    VectorXd hi = x, lo = x;
    hi[i] += h;
    lo[i] -= h;
    g[i] = (f(hi) - f(lo)) / (2.0 * h);
  }
  return g;
}

// Central finite-difference Jacobian of a vector function (used to check a
// Hessian against the analytic gradient).
inline MatrixXd fd_jacobian(const std::function<VectorXd(const VectorXd&)>& f,
                            const VectorXd& x, double h) {
  const int n = static_cast<int>(x.size());
  MatrixXd j(n, n);
  for (int i = 0; i < n; ++i) {
    VectorXd hi = x, lo = x;
    hi[i] += h;
    lo[i] -= h;
    j.col(i) = (f(hi) - f(lo)) / (2.0 * h);
  }
  return j;
}

// Two-sample Kolmogorov-Smirnov statistic sup |F_a - F_b|.
inline double ks_statistic_two_sample(std::vector<double> a,
                                      std::vector<double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("ks: empty sample");
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
    d = std::max(d, std::fabs(i / na - j / nb));
  }
  return d;
}

// One-sample KS statistic against a reference CDF.
inline double ks_statistic_one_sample(
    std::vector<double> x, const std::function<double(double)>& cdf) {
  if (x.empty()) throw std::invalid_argument("ks: empty sample");
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = cdf(x[i]);
    d = std::max(d, std::fabs((i + 1) / n - f));
    d = std::max(d, std::fabs(f - i / n));
  }
  return d;
}

// Kolmogorov critical values at level 0.01 (asymptotic constant 1.628).
inline double ks_crit_two_sample_01(double n, double m) {
  return 1.628 * std::sqrt((n + m) / (n * m));
}
inline double ks_crit_one_sample_01(double n) { return 1.628 / std::sqrt(n); }

// Sample skewness, for symmetric-output sampler checks.
inline double sample_skewness(const std::vector<double>& x) {
  const double n = static_cast<double>(x.size());
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= n;
  double m2 = 0.0, m3 = 0.0;
  for (double v : x) {
    const double d = v - mean;
    m2 += d * d;
    m3 += d * d * d;
  }
  m2 /= n;
  m3 /= n;
  return m3 / std::pow(m2, 1.5);
}

}  // namespace testsup
