#pragma once

#include <cmath>
#include <functional>

#include "spemix/matrix.hpp"

namespace spemix {

inline constexpr double kOrthTol = 1e-10;

inline void check_stiefel(const MatrixXd& q, const char* where) {
  if (q.rows() != q.cols())
    throw ValidationError(std::string(where) + ": point must be square");
  MatrixXd gram = q.transpose() * q;
  gram.diagonal().array() -= 1.0;
  if (gram.cwiseAbs().maxCoeff() > kOrthTol)
    throw ValidationError(std::string(where) + ": point is not orthogonal");
}

// Riemannian ascent direction: the Euclidean gradient g projected as
// q * skew(q' g), skew(A) = (A - A')/2.
inline MatrixXd project_tangent(const MatrixXd& q, const MatrixXd& g) {
  if (g.rows() != q.rows() || g.cols() != q.cols())
    throw ValidationError("project_tangent: shape mismatch");
  MatrixXd qtg = q.transpose() * g;
  return q * (0.5 * (qtg - qtg.transpose()));
}

// QR retraction with the R diagonal signs folded into Q, which makes the
// map single-valued and hence runs reproducible.
inline MatrixXd qr_retraction(const MatrixXd& q, const MatrixXd& step) {
  if (step.rows() != q.rows() || step.cols() != q.cols())
    throw ValidationError("qr_retraction: shape mismatch");
  if (step.cwiseAbs().maxCoeff() == 0.0) return q;
  Eigen::HouseholderQR<MatrixXd> qr(q + step);
  MatrixXd out = qr.householderQ();
  MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < out.cols(); ++j)
    if (r(j, j) < 0.0) out.col(j) = -out.col(j);
  return out;
}

struct LineSearchConfig {
  double initial_step = 1.0;
  double backtracking = 0.5;
  double sufficient_increase = 1e-4;
  int max_backtracks = 20;
  int max_iterations = 50;
  double gradient_tol = 1e-6;
  // test hook: sees every accepted iterate and its objective value
  std::function<void(const MatrixXd&, double)> observer;

  void validate() const {
    if (!(initial_step > 0.0) || !(backtracking > 0.0) ||
        backtracking >= 1.0 || !(sufficient_increase > 0.0) ||
        max_backtracks < 1 || max_iterations < 1 || !(gradient_tol > 0.0))
      throw ValidationError("LineSearchConfig: invalid configuration");
  }
};

struct StiefelResult {
  MatrixXd q;
  double value = 0.0;
  int iterations = 0;
  double gradient_norm = 0.0;
};

// Ascent on the orthogonal group: Barzilai-Borwein trial step with Armijo
// backtracking through the QR retraction. The objective never decreases;
// <grad, D> = ||D||^2 for the projected direction, which gives the ascent
// form of the sufficient-increase test.
inline StiefelResult maximize(
    const std::function<double(const MatrixXd&)>& value,
    const std::function<MatrixXd(const MatrixXd&)>& gradient,
    const MatrixXd& q0, const LineSearchConfig& config = {}) {
  config.validate();
  check_stiefel(q0, "maximize");

  StiefelResult result;
  result.q = q0;
  result.value = value(q0);
  if (!std::isfinite(result.value))
    throw NumericalError("stiefel maximize: objective not finite at start");

  MatrixXd prev_q, prev_dir;
  bool have_prev = false;

  for (int iter = 0; iter < config.max_iterations; ++iter) {
    MatrixXd dir = project_tangent(result.q, gradient(result.q));
    const double dir_norm_sq = dir.squaredNorm();
    result.gradient_norm = std::sqrt(dir_norm_sq);
    if (result.gradient_norm <= config.gradient_tol) break;

    double step = config.initial_step;
    if (have_prev) {
      MatrixXd s = result.q - prev_q;
      MatrixXd y = dir - prev_dir;
      const double sy = (s.array() * y.array()).sum();
      const double ss = s.squaredNorm();
      if (std::isfinite(sy) && std::fabs(sy) > 1e-14 * ss && ss > 0.0) {
        step = std::fabs(ss / sy);
        step = std::min(std::max(step, 1e-8), 1e8);
      }
    }

    prev_q = result.q;
    prev_dir = dir;

    bool accepted = false;
    for (int bt = 0; bt < config.max_backtracks; ++bt) {
      MatrixXd candidate = qr_retraction(result.q, step * dir);
      const double candidate_value = value(candidate);
      if (std::isfinite(candidate_value) &&
          candidate_value >=
              result.value + config.sufficient_increase * step * dir_norm_sq) {
        result.q = candidate;
        result.value = candidate_value;
        accepted = true;
        break;
      }
      step *= config.backtracking;
    }
    have_prev = accepted;
    result.iterations = iter + 1;
    if (!accepted) break;  // no usable step at this scale
    if (config.observer) config.observer(result.q, result.value);
  }
  return result;
}

}  // namespace spemix
