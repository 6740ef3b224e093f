#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "spemix/model_spec.hpp"
#include "spemix/scale.hpp"
#include "spemix/special.hpp"

namespace spemix {

// One mixture component. The skew direction is kept in the eta
// parameterization (eta = Sigma^{-1/2} psi), which makes the skew argument
// eta'(x - mu) independent of the scale matrix; psi is derived on demand.
struct ComponentParams {
  VectorXd mu;
  ScaleDecomposition scale;
  double beta = 1.0;
  VectorXd eta;

  int dim() const { return static_cast<int>(mu.size()); }

  double log_det_sigma() const { return dim() * std::log(scale.lambda); }

  MatrixXd sigma() const { return scale.compose(); }

  MatrixXd sigma_inv() const {
    return (1.0 / scale.lambda) * scale.gamma *
           scale.delta.cwiseInverse().asDiagonal() * scale.gamma.transpose();
  }

  MatrixXd sigma_sqrt() const {
    return std::sqrt(scale.lambda) * scale.gamma *
           scale.delta.cwiseSqrt().asDiagonal() * scale.gamma.transpose();
  }

  MatrixXd sigma_inv_sqrt() const {
    return (1.0 / std::sqrt(scale.lambda)) * scale.gamma *
           scale.delta.cwiseSqrt().cwiseInverse().asDiagonal() *
           scale.gamma.transpose();
  }

  VectorXd psi() const { return sigma_sqrt() * eta; }

  void validate() const {
    scale.validate();
    if (mu.size() != scale.dim() || eta.size() != mu.size())
      throw ValidationError("ComponentParams: dimension mismatch");
    if (!(beta > 0.0) || beta > 20.0)
      throw ValidationError("ComponentParams: beta must lie in (0, 20]");
    if (!mu.allFinite() || !eta.allFinite())
      throw ValidationError("ComponentParams: non-finite parameters");
  }

  // squared Mahalanobis distance of every row, through the decomposition
  VectorXd mahalanobis(const MatrixXd& data) const {
    MatrixXd u = (data.rowwise() - mu.transpose()) * scale.gamma;
    return (u.array().square().rowwise() / scale.delta.transpose().array())
               .rowwise()
               .sum()
               .matrix() /
           scale.lambda;
  }

  VectorXd skew_argument(const MatrixXd& data) const {
    return (data.rowwise() - mu.transpose()) * eta;
  }

  VectorXd log_density(const MatrixXd& data) const {
    VectorXd d = mahalanobis(data);
    VectorXd s = skew_argument(data);
    const double base =
        log_mpe_normalizer(dim(), beta) - 0.5 * log_det_sigma() + kLn2;
    VectorXd out = (base - 0.5 * d.array().pow(beta)).matrix();
    for (int i = 0; i < data.rows(); ++i) out[i] += log_cdf_normal(s[i]);
    return out;
  }
};

struct MixtureModel {
  ModelSpec spec;
  VectorXd pi;
  std::vector<ComponentParams> components;

  int groups() const { return static_cast<int>(components.size()); }
  int dim() const { return components.empty() ? 0 : components[0].dim(); }

  void validate() const {
    if (components.empty())
      throw ValidationError("MixtureModel: no components");
    if (pi.size() != groups())
      throw ValidationError("MixtureModel: pi size mismatch");
    if ((pi.array() <= 0.0).any())
      throw ValidationError("MixtureModel: mixing proportions must be positive");
    if (std::fabs(pi.sum() - 1.0) > 1e-8)
      throw ValidationError("MixtureModel: mixing proportions must sum to 1");
    for (const auto& c : components) {
      c.validate();
      if (c.dim() != dim())
        throw ValidationError("MixtureModel: component dimension mismatch");
    }
    if (spec.beta_constraint == BetaConstraint::Equal)
      for (const auto& c : components)
        if (c.beta != components[0].beta)
          throw ValidationError("MixtureModel: equal-beta constraint violated");
    auto close = [](double a, double b) {
      return std::fabs(a - b) <= 1e-8 * std::max({1.0, std::fabs(a), std::fabs(b)});
    };
    for (int g = 0; g < groups(); ++g) {
      const auto& dec = components[g].scale;
      if (lambda_tying(spec.structure) == Tying::Shared &&
          !close(dec.lambda, components[0].scale.lambda))
        throw ValidationError("MixtureModel: shared-volume constraint violated");
      if (delta_tying(spec.structure) == Tying::Identity &&
          (dec.delta.array() - 1.0).abs().maxCoeff() > 1e-8)
        throw ValidationError("MixtureModel: spherical-shape constraint violated");
      if (delta_tying(spec.structure) == Tying::Shared &&
          (dec.delta - components[0].scale.delta).cwiseAbs().maxCoeff() > 1e-8)
        throw ValidationError("MixtureModel: shared-shape constraint violated");
      if (gamma_tying(spec.structure) == Tying::Identity &&
          (dec.gamma - MatrixXd::Identity(dim(), dim())).cwiseAbs().maxCoeff() >
              1e-8)
        throw ValidationError("MixtureModel: axis-aligned constraint violated");
      if (gamma_tying(spec.structure) == Tying::Shared &&
          (dec.gamma - components[0].scale.gamma).cwiseAbs().maxCoeff() > 1e-8)
        throw ValidationError("MixtureModel: shared-orientation constraint violated");
    }
  }

  // N x G matrix of log pi_g + log f_g(x_i)
  MatrixXd log_weighted_densities(const MatrixXd& data) const {
    MatrixXd l(data.rows(), groups());
    for (int g = 0; g < groups(); ++g)
      l.col(g) =
          components[g].log_density(data).array() + std::log(pi[g]);
    return l;
  }
};

struct Responsibilities {
  MatrixXd z;             // N x G, rows sum to 1
  Eigen::VectorXi frozen;  // -1 for unlabeled rows, else the fixed group

  void validate() const {
    const int n = static_cast<int>(z.rows());
    if (frozen.size() != n)
      throw ValidationError("Responsibilities: mask size mismatch");
    for (int i = 0; i < n; ++i) {
      if ((z.row(i).array() < 0.0).any())
        throw ValidationError("Responsibilities: negative entry");
      if (std::fabs(z.row(i).sum() - 1.0) > 1e-12)
        throw ValidationError("Responsibilities: row must sum to 1");
      if (frozen[i] >= 0 && z(i, frozen[i]) != 1.0)
        throw ValidationError("Responsibilities: labeled row not one-hot");
    }
  }
};

struct EStepResult {
  Responsibilities resp;
  double loglik = -std::numeric_limits<double>::infinity();
};

// E-step and observed log-likelihood in one pass. Unlabeled rows get
// softmax responsibilities computed with max subtraction and contribute
// log-sum-exp terms; labeled rows stay one-hot and contribute the joint
// term log(pi_g f_g) of their fixed group.
inline EStepResult e_step_full(const MatrixXd& data, const MixtureModel& model,
                               const std::vector<int>& labels = {}) {
  const int n = static_cast<int>(data.rows());
  const int G = model.groups();
  if (!labels.empty() && static_cast<int>(labels.size()) != n)
    throw ValidationError("e_step: label vector length mismatch");
  MatrixXd l = model.log_weighted_densities(data);

  EStepResult out;
  out.resp.z.resize(n, G);
  out.resp.frozen = Eigen::VectorXi::Constant(n, -1);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int g = 0; g < G; ++g)
      if (std::isnan(l(i, g)) || l(i, g) == std::numeric_limits<double>::infinity())
        throw NumericalError("e_step: non-finite density at row " +
                             std::to_string(i + 1));
    const int lab = labels.empty() ? -1 : labels[i];
    if (lab >= G)
      throw DataError("e_step: label exceeds component count at row " +
                      std::to_string(i + 1));
    if (lab >= 0) {
      out.resp.frozen[i] = lab;
      out.resp.z.row(i).setZero();
      out.resp.z(i, lab) = 1.0;
      total += l(i, lab);
      continue;
    }
    double top = l.row(i).maxCoeff();
    if (top == -std::numeric_limits<double>::infinity()) {
      warn("e_step: all components underflowed at row " + std::to_string(i + 1) +
           "; using uniform responsibilities");
      out.resp.z.row(i).setConstant(1.0 / G);
      total += top;
      continue;
    }
    VectorXd shifted = (l.row(i).array() - top).exp();
    double denom = shifted.sum();
    out.resp.z.row(i) = shifted.transpose() / denom;
    total += top + std::log(denom);
  }
  out.loglik = total;
  return out;
}

inline Responsibilities e_step(const MatrixXd& data, const MixtureModel& model,
                               const std::vector<int>& labels = {}) {
  return e_step_full(data, model, labels).resp;
}

inline double observed_loglik(const MatrixXd& data, const MixtureModel& model,
                              const std::vector<int>& labels = {}) {
  return e_step_full(data, model, labels).loglik;
}

struct Prediction {
  int label = 0;
  VectorXd responsibilities;
};

// MAP assignment; ties resolve to the lowest group index.
inline Prediction predict(const MixtureModel& model, const VectorXd& x) {
  MatrixXd row = x.transpose();
  MatrixXd l = model.log_weighted_densities(row);
  const int G = model.groups();
  Prediction pred;
  for (int g = 0; g < G; ++g)
    if (std::isnan(l(0, g)) || l(0, g) == std::numeric_limits<double>::infinity())
      throw NumericalError("predict: non-finite density");
  double top = l.row(0).maxCoeff();
  if (top == -std::numeric_limits<double>::infinity()) {
    warn("predict: all components underflowed; using uniform responsibilities");
    pred.responsibilities = VectorXd::Constant(G, 1.0 / G);
    return pred;
  }
  VectorXd shifted = (l.row(0).array() - top).exp();
  pred.responsibilities = shifted / shifted.sum();
  for (int g = 1; g < G; ++g)
    if (pred.responsibilities[g] > pred.responsibilities[pred.label])
      pred.label = g;
  return pred;
}

// Hard assignment of every row by responsibility argmax, lowest index wins.
inline std::vector<int> map_labels(const MatrixXd& z) {
  std::vector<int> labels(z.rows(), 0);
  for (int i = 0; i < z.rows(); ++i)
    for (int g = 1; g < z.cols(); ++g)
      if (z(i, g) > z(i, labels[i])) labels[i] = g;
  return labels;
}

}  // namespace spemix
