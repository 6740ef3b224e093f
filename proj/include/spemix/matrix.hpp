#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <sstream>
#include <string>

#include "spemix/error.hpp"

namespace spemix {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline constexpr double kSymmetryTol = 1e-10;
inline constexpr double kEigFloorRel = 1e-10;

struct SymEig {
  VectorXd values;   // descending
  MatrixXd vectors;  // columns match values
};

inline void check_symmetric(const MatrixXd& s, const char* where) {
  if (s.rows() != s.cols())
    throw ValidationError(std::string(where) + ": matrix must be square");
  const double scale = std::max(1.0, s.cwiseAbs().maxCoeff());
  if ((s - s.transpose()).cwiseAbs().maxCoeff() > kSymmetryTol * scale)
    throw ValidationError(std::string(where) + ": matrix not symmetric");
}

// Eigen-decomposition of a symmetric matrix, pairs sorted descending.
inline SymEig sym_eig(const MatrixXd& s) {
  check_symmetric(s, "sym_eig");
  Eigen::SelfAdjointEigenSolver<MatrixXd> solver(s);
  if (solver.info() != Eigen::Success)
    throw NumericalError("sym_eig: eigendecomposition failed");
  const int p = static_cast<int>(s.rows());
  SymEig out;
  out.values = VectorXd(p);
  out.vectors = MatrixXd(p, p);
  for (int j = 0; j < p; ++j) {  // solver returns ascending order
    out.values[j] = solver.eigenvalues()[p - 1 - j];
    out.vectors.col(j) = solver.eigenvectors().col(p - 1 - j);
  }
  return out;
}

// Clamps eigenvalues below kEigFloorRel * largest; returns how many moved.
// Degenerate clusters appear mid-EM, so this warns instead of aborting.
inline int floor_eigenvalues(SymEig& eig, const char* where) {
  const double largest = eig.values[0];
  if (!(largest > 0.0))
    throw NumericalError(std::string(where) + ": matrix not positive definite");
  const double floor_value = kEigFloorRel * largest;
  int floored = 0;
  for (int j = 0; j < eig.values.size(); ++j) {
    if (eig.values[j] < floor_value) {
      eig.values[j] = floor_value;
      ++floored;
    }
  }
  if (floored > 0) {
    std::ostringstream msg;
    msg << where << ": floored " << floored << " eigenvalue(s) at relative "
        << kEigFloorRel;
    warn(msg.str());
  }
  return floored;
}

// Everything the estimation loop needs from one scale matrix, computed from
// a single (floored) eigendecomposition per component per iteration.
class SpdCache {
 public:
  explicit SpdCache(const MatrixXd& sigma) {
    check_symmetric(sigma, "SpdCache");
    eig_ = sym_eig(sigma);
    floor_eigenvalues(eig_, "SpdCache");
    const VectorXd& v = eig_.values;
    log_det_ = v.array().log().sum();
    inverse_ = assemble(v.array().inverse());
    inv_sqrt_ = assemble(v.array().rsqrt());
    sqrt_ = assemble(v.array().sqrt());
  }

  const SymEig& eig() const { return eig_; }
  double log_det() const { return log_det_; }
  const MatrixXd& inverse() const { return inverse_; }
  const MatrixXd& inv_sqrt() const { return inv_sqrt_; }
  const MatrixXd& sqrt() const { return sqrt_; }

 private:
  MatrixXd assemble(const Eigen::ArrayXd& transformed) const {
    return eig_.vectors * transformed.matrix().asDiagonal() *
           eig_.vectors.transpose();
  }

  SymEig eig_;
  double log_det_ = 0.0;
  MatrixXd inverse_;
  MatrixXd inv_sqrt_;
  MatrixXd sqrt_;
};

// Symmetric inverse square root: M with M * S * M = I.
inline MatrixXd inv_sqrt(const MatrixXd& s) {
  check_symmetric(s, "inv_sqrt");
  SymEig eig = sym_eig(s);
  if (!(eig.values[0] > 0.0) ||
      eig.values[eig.values.size() - 1] < 1e-12 * eig.values[0])
    throw NumericalError("inv_sqrt: matrix is near-singular");
  return eig.vectors * eig.values.array().rsqrt().matrix().asDiagonal() *
         eig.vectors.transpose();
}

inline double log_det(const MatrixXd& s) {
  check_symmetric(s, "log_det");
  SymEig eig = sym_eig(s);
  if (!(eig.values[0] > 0.0) ||
      eig.values[eig.values.size() - 1] < 1e-12 * eig.values[0])
    throw NumericalError("log_det: matrix is near-singular");
  return eig.values.array().log().sum();
}

inline double mahalanobis(const VectorXd& x, const VectorXd& mu,
                          const MatrixXd& s) {
  if (x.size() != mu.size() || s.rows() != x.size())
    throw ValidationError("mahalanobis: dimension mismatch");
  check_symmetric(s, "mahalanobis");
  VectorXd diff = x - mu;
  VectorXd solved = s.ldlt().solve(diff);
  double d = diff.dot(solved);
  return d < 0.0 ? 0.0 : d;
}

// Squared Mahalanobis distances for every row of a data matrix against a
// precomputed inverse; the hot path of the E-step.
inline VectorXd mahalanobis_rows(const MatrixXd& data, const VectorXd& mu,
                                 const MatrixXd& sigma_inv) {
  MatrixXd centered = data.rowwise() - mu.transpose();
  return ((centered * sigma_inv).array() * centered.array())
      .rowwise()
      .sum()
      .matrix();
}

}  // namespace spemix
