#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "spemix/matrix.hpp"

namespace spemix {

// Larger values indicate a better model under this sign convention.
inline double bic(double loglik, int free_params, int n) {
  if (n < 1) throw ValidationError("bic: sample size must be positive");
  return 2.0 * loglik - free_params * std::log(static_cast<double>(n));
}

// BIC penalized by the classification entropy of the MAP partition. The
// responsibility of the assigned component is floored so empty-probability
// assignments cannot produce -inf terms.
inline double icl(double bic_value, const MatrixXd& z) {
  double entropy = 0.0;
  for (int i = 0; i < z.rows(); ++i) {
    int best = 0;
    for (int g = 1; g < z.cols(); ++g)
      if (z(i, g) > z(i, best)) best = g;
    entropy += std::log(std::max(z(i, best), 1e-300));
  }
  return bic_value + 2.0 * entropy;
}

// Pair-counting agreement between two partitions, corrected for chance.
// Label values are arbitrary; only the induced partitions matter.
inline double adjusted_rand_index(const std::vector<int>& a,
                                  const std::vector<int>& b) {
  if (a.size() != b.size())
    throw ValidationError("adjusted_rand_index: partition length mismatch");
  if (a.empty()) throw ValidationError("adjusted_rand_index: empty partitions");
  std::map<int, int> ida, idb;
  for (int v : a) ida.emplace(v, static_cast<int>(ida.size()));
  for (int v : b) idb.emplace(v, static_cast<int>(idb.size()));
  const int ka = static_cast<int>(ida.size());
  const int kb = static_cast<int>(idb.size());
  MatrixXd table = MatrixXd::Zero(ka, kb);
  for (std::size_t i = 0; i < a.size(); ++i)
    table(ida[a[i]], idb[b[i]]) += 1.0;

  auto choose2 = [](double m) { return 0.5 * m * (m - 1.0); };
  double cells = 0.0;
  for (int i = 0; i < ka; ++i)
    for (int j = 0; j < kb; ++j) cells += choose2(table(i, j));
  double rows = 0.0, cols = 0.0;
  for (int i = 0; i < ka; ++i) rows += choose2(table.row(i).sum());
  for (int j = 0; j < kb; ++j) cols += choose2(table.col(j).sum());
  const double pairs = choose2(static_cast<double>(a.size()));
  // cleared of the inner division so that every term is an exact integer (or
  // exact half-integer product) and the only rounding is the final quotient
  const double num = pairs * cells - rows * cols;
  const double den = pairs * (0.5 * (rows + cols)) - rows * cols;
  if (den == 0.0) return 1.0;  // both partitions trivial and identical
  return num / den;
}

// Quantile with linear interpolation at h = (n-1)q, the convention most
// statistical software uses by default.
inline double quantile_type7(std::vector<double> x, double q) {
  if (x.empty()) throw ValidationError("quantile_type7: empty sample");
  if (!(q >= 0.0) || !(q <= 1.0))
    throw ValidationError("quantile_type7: q must lie in [0, 1]");
  std::sort(x.begin(), x.end());
  const double h = (static_cast<double>(x.size()) - 1.0) * q;
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= x.size()) return x.back();
  return x[lo] + (h - lo) * (x[lo + 1] - x[lo]);
}

}  // namespace spemix
