#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "spemix/matrix.hpp"
#include "spemix/model_spec.hpp"
#include "spemix/stiefel.hpp"

namespace spemix {

inline constexpr double kDeltaProductTol = 1e-8;
inline constexpr double kLambdaFloor = 1e-10;

struct ScaleDecomposition {
  double lambda = 1.0;
  MatrixXd gamma;  // orthogonal orientation
  VectorXd delta;  // positive shape entries, product 1

  static ScaleDecomposition identity(int p) {
    return {1.0, MatrixXd::Identity(p, p), VectorXd::Ones(p)};
  }

  int dim() const { return static_cast<int>(delta.size()); }

  MatrixXd compose() const {
    return lambda * gamma * delta.asDiagonal() * gamma.transpose();
  }

  void validate() const {
    if (!(lambda > 0.0)) throw ValidationError("ScaleDecomposition: lambda <= 0");
    if (gamma.rows() != dim() || gamma.cols() != dim())
      throw ValidationError("ScaleDecomposition: gamma shape mismatch");
    check_stiefel(gamma, "ScaleDecomposition");
    double log_prod = 0.0;
    for (int j = 0; j < dim(); ++j) {
      if (!(delta[j] > 0.0))
        throw ValidationError("ScaleDecomposition: delta entries must be positive");
      log_prod += std::log(delta[j]);
    }
    if (std::fabs(log_prod) > kDeltaProductTol)
      throw ValidationError("ScaleDecomposition: delta product differs from 1");
  }
};

// Split an SPD matrix into volume, shape, and orientation with the unit
// determinant convention on the shape part; eigenvalues descending.
inline ScaleDecomposition decompose(const MatrixXd& sigma) {
  SymEig eig = sym_eig(sigma);
  floor_eigenvalues(eig, "decompose");
  const int p = static_cast<int>(eig.values.size());
  const double log_lambda = eig.values.array().log().mean();
  ScaleDecomposition dec;
  dec.lambda = std::exp(log_lambda);
  dec.gamma = eig.vectors;
  dec.delta = (eig.values.array().log() - log_lambda).exp();
  // kill rounding drift so the unit-product invariant is exact-ish
  dec.delta /= std::pow(dec.delta.prod(), 1.0 / p);
  return dec;
}

// Per-component sufficient statistics for the beta < 1 surrogate route:
// S_g = sum_i z_ig w_ig y_i y_i' with tangent-bound weights w.
struct WeightedScatter {
  VectorXd n;                // soft counts (responsibilities only)
  std::vector<MatrixXd> s;   // weighted scatter per component
};

// View of everything the scale M-step needs; owned by the engine.
struct ScaleStepInputs {
  const MatrixXd& data;                  // N x p
  const MatrixXd& z;                     // N x G responsibilities
  const std::vector<VectorXd>& mu;       // per component
  const std::vector<double>& beta;       // per component

  int n_rows() const { return static_cast<int>(data.rows()); }
  int dim() const { return static_cast<int>(data.cols()); }
  int groups() const { return static_cast<int>(z.cols()); }
};

namespace scale_detail {

inline std::vector<MatrixXd> centered_groups(const ScaleStepInputs& in) {
  std::vector<MatrixXd> y(in.groups());
  for (int g = 0; g < in.groups(); ++g)
    y[g] = in.data.rowwise() - in.mu[g].transpose();
  return y;
}

// d_i = y_i' Gamma Delta^{-1} Gamma' y_i for every row.
inline VectorXd shape_distances(const MatrixXd& y, const ScaleDecomposition& dec) {
  MatrixXd rotated = y * dec.gamma;
  return (rotated.array().square().rowwise() /
          dec.delta.transpose().array())
      .rowwise()
      .sum()
      .matrix();
}

}  // namespace scale_detail

// The scale block of the expected complete-data objective:
// Q = -1/2 sum_g [ n_g (p log lambda_g + log|Delta_g|) +
//                  sum_i z_ig (d_ig / lambda_g)^{beta_g} ].
// The log|Delta_g| term vanishes on the unit-determinant constraint set but
// is kept so the coordinate updates can be scored before renormalization.
inline double q_scale(const ScaleStepInputs& in,
                      const std::vector<ScaleDecomposition>& decs) {
  const int p = in.dim();
  double total = 0.0;
  for (int g = 0; g < in.groups(); ++g) {
    const ScaleDecomposition& dec = decs[g];
    MatrixXd y = in.data.rowwise() - in.mu[g].transpose();
    VectorXd d = scale_detail::shape_distances(y, dec);
    const double n_g = in.z.col(g).sum();
    double log_delta = dec.delta.array().log().sum();
    double energy =
        (in.z.col(g).array() * (d.array() / dec.lambda).pow(in.beta[g])).sum();
    total += -0.5 * (n_g * (p * std::log(dec.lambda) + log_delta) + energy);
  }
  return total;
}

// Exact stationary volume update with Gamma and Delta held fixed.
// a[g] = sum_i z_ig d_ig^{beta_g}. Shared volumes with unequal shapes have
// no closed form; the stationary equation sum_g beta_g a_g lambda^{-beta_g}
// = N p is solved by bisection on log lambda (the left side is strictly
// decreasing).
inline VectorXd update_lambda(const VectorXd& n, const VectorXd& a,
                              const std::vector<double>& beta, int p,
                              bool shared) {
  const int G = static_cast<int>(n.size());
  if (a.size() != G || static_cast<int>(beta.size()) != G)
    throw ValidationError("update_lambda: size mismatch");
  VectorXd lambda(G);
  if (!shared) {
    for (int g = 0; g < G; ++g) {
      if (!(a[g] > 0.0) || !(n[g] > 0.0)) {
        lambda[g] = kLambdaFloor;
        continue;
      }
      lambda[g] = std::pow(beta[g] * a[g] / (n[g] * p), 1.0 / beta[g]);
      lambda[g] = std::max(lambda[g], kLambdaFloor);
    }
    return lambda;
  }

  const double total_n = n.sum();
  if (!(total_n > 0.0) || a.maxCoeff() <= 0.0) {
    lambda.setConstant(kLambdaFloor);
    return lambda;
  }
  bool equal_beta = true;
  for (int g = 1; g < G; ++g)
    if (beta[g] != beta[0]) equal_beta = false;
  if (equal_beta) {
    double value = std::pow(beta[0] * a.sum() / (total_n * p), 1.0 / beta[0]);
    lambda.setConstant(std::max(value, kLambdaFloor));
    return lambda;
  }

  const double target = total_n * p;
  auto lhs = [&](double log_lambda) {
    double s = 0.0;
    for (int g = 0; g < G; ++g)
      s += beta[g] * a[g] * std::exp(-beta[g] * log_lambda);
    return s;
  };
  double lo = 0.0, hi = 0.0;
  while (lhs(lo) < target && lo > -700.0) lo -= 1.0;
  while (lhs(hi) > target && hi < 700.0) hi += 1.0;
  for (int iter = 0; iter < 200; ++iter) {
    double mid = 0.5 * (lo + hi);
    if (lhs(mid) > target)
      lo = mid;
    else
      hi = mid;
  }
  lambda.setConstant(std::max(std::exp(0.5 * (lo + hi)), kLambdaFloor));
  return lambda;
}

namespace scale_detail {

// Weights of the tangent-line bound on the concave map delta -> delta^beta,
// evaluated at the current parameters; delta floored so beta < 1 cannot
// produce infinite weights at coincident points.
inline WeightedScatter weighted_scatter(const ScaleStepInputs& in,
                                        const std::vector<ScaleDecomposition>& decs,
                                        const std::vector<MatrixXd>& y) {
  const int G = in.groups();
  WeightedScatter stats;
  stats.n = in.z.colwise().sum();
  stats.s.resize(G);
  for (int g = 0; g < G; ++g) {
    VectorXd d = shape_distances(y[g], decs[g]);
    VectorXd zw = (in.z.col(g).array() * in.beta[g] *
                   (d.array() / decs[g].lambda).max(1e-12).pow(in.beta[g] - 1.0))
                      .matrix();
    stats.s[g] = y[g].transpose() * zw.asDiagonal() * y[g];
  }
  return stats;
}

inline VectorXd diag_of(const MatrixXd& m) { return m.diagonal(); }

// Normalize a positive vector to unit product, returning the removed
// geometric mean.
inline double unitize(VectorXd& v) {
  double log_mean = v.array().log().mean();
  v = (v.array().log() - log_mean).exp();
  return std::exp(log_mean);
}

// Gaussian-type constrained updates from a weighted scatter, one branch per
// structure; this is the classical eigen-decomposed family M-step.
inline std::vector<ScaleDecomposition> surrogate_update(
    Structure structure, const WeightedScatter& stats,
    const std::vector<ScaleDecomposition>& current) {
  const int G = static_cast<int>(stats.s.size());
  const int p = static_cast<int>(stats.s[0].rows());
  const double total_n = stats.n.sum();
  std::vector<ScaleDecomposition> out(G, ScaleDecomposition::identity(p));

  switch (structure) {
    case Structure::EII: {
      double tr = 0.0;
      for (int g = 0; g < G; ++g) tr += stats.s[g].trace();
      double lambda = std::max(tr / (total_n * p), kLambdaFloor);
      for (int g = 0; g < G; ++g) out[g].lambda = lambda;
      break;
    }
    case Structure::VII: {
      for (int g = 0; g < G; ++g)
        out[g].lambda =
            std::max(stats.s[g].trace() / (stats.n[g] * p), kLambdaFloor);
      break;
    }
    case Structure::EEI: {
      VectorXd w = VectorXd::Zero(p);
      for (int g = 0; g < G; ++g) w += diag_of(stats.s[g]);
      w = w.cwiseMax(1e-300);
      double mean = unitize(w);
      for (int g = 0; g < G; ++g) {
        out[g].delta = w;
        out[g].lambda = std::max(mean / total_n, kLambdaFloor);
      }
      break;
    }
    case Structure::VVI: {
      for (int g = 0; g < G; ++g) {
        VectorXd w = diag_of(stats.s[g]).cwiseMax(1e-300);
        double mean = unitize(w);
        out[g].delta = w;
        out[g].lambda = std::max(mean / stats.n[g], kLambdaFloor);
      }
      break;
    }
    case Structure::EEE: {
      MatrixXd pooled = MatrixXd::Zero(p, p);
      for (int g = 0; g < G; ++g) pooled += stats.s[g];
      ScaleDecomposition dec = decompose(pooled / total_n);
      for (int g = 0; g < G; ++g) out[g] = dec;
      break;
    }
    case Structure::VVV: {
      for (int g = 0; g < G; ++g)
        out[g] = decompose(stats.s[g] / stats.n[g]);
      break;
    }
    case Structure::EEV: {
      // per-group orientations, pooled descending eigenvalues
      VectorXd pooled = VectorXd::Zero(p);
      std::vector<MatrixXd> vectors(G);
      for (int g = 0; g < G; ++g) {
        SymEig eig = sym_eig(stats.s[g]);
        floor_eigenvalues(eig, "EEV update");
        pooled += eig.values;
        vectors[g] = eig.vectors;
      }
      double mean = unitize(pooled);
      for (int g = 0; g < G; ++g) {
        out[g].gamma = vectors[g];
        out[g].delta = pooled;
        out[g].lambda = std::max(mean / total_n, kLambdaFloor);
      }
      break;
    }
    case Structure::VVE: {
      // one ascent pass: shared orientation against current shapes and
      // volumes, then per-group shape/volume given the orientation
      auto value = [&](const MatrixXd& q) {
        double v = 0.0;
        for (int g = 0; g < G; ++g) {
          MatrixXd rotated = q.transpose() * stats.s[g] * q;
          v -= 0.5 / current[g].lambda *
               (rotated.diagonal().array() / current[g].delta.array()).sum();
        }
        return v;
      };
      auto gradient = [&](const MatrixXd& q) -> MatrixXd {
        MatrixXd grad = MatrixXd::Zero(p, p);
        for (int g = 0; g < G; ++g)
          grad -= (1.0 / current[g].lambda) * stats.s[g] * q *
                  current[g].delta.cwiseInverse().asDiagonal();
        return grad;
      };
      LineSearchConfig config;
      config.max_iterations = 15;
      config.gradient_tol = 1e-7;
      MatrixXd shared = maximize(value, gradient, current[0].gamma, config).q;
      for (int g = 0; g < G; ++g) {
        VectorXd w =
            (shared.transpose() * stats.s[g] * shared).diagonal().cwiseMax(1e-300);
        double mean = unitize(w);
        out[g].gamma = shared;
        out[g].delta = w;
        out[g].lambda = std::max(mean / stats.n[g], kLambdaFloor);
      }
      break;
    }
  }
  return out;
}

// Direct block-coordinate ascent on the exact objective, valid for any
// beta: orientation by Stiefel line search, shape coordinate-wise, volume
// by its exact stationary point.
inline std::vector<ScaleDecomposition> direct_update(
    Structure structure, const ScaleStepInputs& in,
    const std::vector<ScaleDecomposition>& current,
    const std::vector<MatrixXd>& y) {
  const int G = in.groups();
  const int p = in.dim();
  std::vector<ScaleDecomposition> decs = current;
  VectorXd n = in.z.colwise().sum();

  const Tying gamma_mode = gamma_tying(structure);
  const Tying delta_mode = delta_tying(structure);
  const bool shared_lambda = lambda_tying(structure) == Tying::Shared;

  // --- orientation ---
  if (gamma_mode != Tying::Identity) {
    auto group_value = [&](int g, const MatrixXd& q) {
      MatrixXd rotated = y[g] * q;
      VectorXd d = (rotated.array().square().rowwise() /
                    decs[g].delta.transpose().array())
                       .rowwise()
                       .sum();
      return -0.5 * (in.z.col(g).array() *
                     (d.array() / decs[g].lambda).pow(in.beta[g]))
                        .sum();
    };
    auto group_gradient = [&](int g, const MatrixXd& q) -> MatrixXd {
      MatrixXd rotated = y[g] * q;
      VectorXd d = (rotated.array().square().rowwise() /
                    decs[g].delta.transpose().array())
                       .rowwise()
                       .sum();
      VectorXd coeff =
          (in.z.col(g).array() * (in.beta[g] / decs[g].lambda) *
           (d.array() / decs[g].lambda).max(1e-300).pow(in.beta[g] - 1.0))
              .matrix();
      MatrixXd weighted = y[g].transpose() * coeff.asDiagonal() * y[g];
      return -weighted * q * decs[g].delta.cwiseInverse().asDiagonal();
    };
    LineSearchConfig config;
    config.max_iterations = 10;
    config.gradient_tol = 1e-7;

    if (gamma_mode == Tying::PerGroup) {
      for (int g = 0; g < G; ++g) {
        auto value = [&](const MatrixXd& q) { return group_value(g, q); };
        auto gradient = [&](const MatrixXd& q) { return group_gradient(g, q); };
        decs[g].gamma = maximize(value, gradient, decs[g].gamma, config).q;
      }
    } else {
      auto value = [&](const MatrixXd& q) {
        double v = 0.0;
        for (int g = 0; g < G; ++g) v += group_value(g, q);
        return v;
      };
      auto gradient = [&](const MatrixXd& q) {
        MatrixXd grad = MatrixXd::Zero(p, p);
        for (int g = 0; g < G; ++g) grad += group_gradient(g, q);
        return grad.eval();
      };
      MatrixXd shared = maximize(value, gradient, decs[0].gamma, config).q;
      for (int g = 0; g < G; ++g) decs[g].gamma = shared;
    }
  }

  // --- shape, one MM coordinate step per sweep with the log-det term
  // explicit ---
  // For tail weights at or above 1 the power map is convex and the
  // coordinate objective is minorized through a two-point Jensen split of
  // d_i at the current shape entry; below 1 it is concave and the tangent
  // at the current distances bounds it directly. Either bound reduces the
  // coordinate problem to
  //   n log t + conc / t + sum_k A_k beta_k t^{-beta_k}  stationary in t,
  // closed form for a single power term, monotone scalar root otherwise.
  if (delta_mode != Tying::Identity) {
    std::vector<MatrixXd> rotated_sq(G);
    std::vector<VectorXd> dist(G);
    for (int g = 0; g < G; ++g) {
      MatrixXd rotated = y[g] * decs[g].gamma;
      rotated_sq[g] = rotated.array().square();
      dist[g] = (rotated_sq[g].array().rowwise() /
                 decs[g].delta.transpose().array())
                    .rowwise()
                    .sum();
    }

    // Coefficient of the t-dependent bound term for one group and
    // coordinate: of t^{-beta} from the Jensen split when beta >= 1, of 1/t
    // from the tangent when beta < 1. Rows with zero weight or zero
    // coordinate share are masked out so overflow cannot reach the sum as
    // 0 * inf.
    auto mm_coefficient = [&](int g, int j, double t0) {
      const auto zg = in.z.col(g).array();
      const auto q = rotated_sq[g].col(j).array();
      Eigen::ArrayXd d0 = dist[g].array().max(0.0);
      if (in.beta[g] >= 1.0)
        return (zg * q == 0.0)
            .select(0.0, zg * (q / (t0 * d0.max(1e-300))) *
                             ((t0 / decs[g].lambda) * d0).pow(in.beta[g]))
            .sum();
      return (zg * q == 0.0)
          .select(0.0, zg * q * (in.beta[g] / decs[g].lambda) *
                           (d0.max(1e-12) / decs[g].lambda)
                               .pow(in.beta[g] - 1.0))
          .sum();
    };

    if (delta_mode == Tying::PerGroup) {
      for (int g = 0; g < G; ++g) {
        for (int j = 0; j < p; ++j) {
          const double t0 = decs[g].delta[j];
          const double coeff = mm_coefficient(g, j, t0);
          if (!std::isfinite(coeff) || !(coeff > 0.0) || !(n[g] > 0.0))
            continue;
          const double t_new =
              in.beta[g] >= 1.0
                  ? std::pow(in.beta[g] * coeff / n[g], 1.0 / in.beta[g])
                  : coeff / n[g];
          if (t_new != t0 && std::isfinite(t_new) && t_new > 0.0) {
            dist[g] += rotated_sq[g].col(j) * (1.0 / t_new - 1.0 / t0);
            decs[g].delta[j] = t_new;
          }
        }
      }
    } else {
      const double n_total = n.sum();
      for (int j = 0; j < p; ++j) {
        const double t0 = decs[0].delta[j];
        double conc = 0.0;
        std::vector<std::pair<double, double>> powers;  // (A_g, beta_g)
        bool usable = n_total > 0.0;
        for (int g = 0; g < G && usable; ++g) {
          double coeff = mm_coefficient(g, j, t0);
          if (!std::isfinite(coeff)) usable = false;
          else if (in.beta[g] >= 1.0 && coeff > 0.0)
            powers.emplace_back(coeff, in.beta[g]);
          else if (in.beta[g] < 1.0)
            conc += coeff;
        }
        if (!usable || conc + static_cast<double>(powers.size()) <= 0.0)
          continue;
        double t_new;
        if (powers.empty()) {
          t_new = conc / n_total;
        } else if (conc == 0.0 && powers.size() == 1) {
          t_new = std::pow(powers[0].second * powers[0].first / n_total,
                           1.0 / powers[0].second);
        } else {
          auto lhs = [&](double u) {
            double s = conc * std::exp(-u);
            for (const auto& [amp, b] : powers) s += amp * b * std::exp(-b * u);
            return s;
          };
          double lo = std::log(t0), hi = lo;
          while (lhs(lo) < n_total && lo > -700.0) lo -= 1.0;
          while (lhs(hi) > n_total && hi < 700.0) hi += 1.0;
          for (int iter = 0; iter < 120; ++iter) {
            double mid = 0.5 * (lo + hi);
            if (lhs(mid) > n_total)
              lo = mid;
            else
              hi = mid;
          }
          t_new = std::exp(0.5 * (lo + hi));
        }
        if (t_new != t0 && std::isfinite(t_new) && t_new > 0.0) {
          for (int g = 0; g < G; ++g) {
            dist[g] += rotated_sq[g].col(j) * (1.0 / t_new - 1.0 / t0);
            decs[g].delta[j] = t_new;
          }
        }
      }
    }
    // restore the unit-product convention by folding the geometric mean
    // into the volume, which leaves the composed matrix unchanged
    for (int g = 0; g < G; ++g) {
      double mean = unitize(decs[g].delta);
      decs[g].lambda *= mean;
    }
  }

  // --- volume, exact stationary point ---
  VectorXd a(G);
  for (int g = 0; g < G; ++g) {
    VectorXd d = shape_distances(y[g], decs[g]);
    a[g] = (in.z.col(g).array() * d.array().pow(in.beta[g])).sum();
  }
  VectorXd lambda = update_lambda(n, a, in.beta, p, shared_lambda);
  for (int g = 0; g < G; ++g) decs[g].lambda = lambda[g];
  return decs;
}

}  // namespace scale_detail

// Builds the surrogate sufficient statistics for the beta < 1 route;
// exposed for the engine and for direct testing of the bound.
inline WeightedScatter weighted_scatter(const ScaleStepInputs& in,
                                        const std::vector<ScaleDecomposition>& decs) {
  std::vector<MatrixXd> y = scale_detail::centered_groups(in);
  return scale_detail::weighted_scatter(in, decs, y);
}

// One monotone pass over the scale parameters. Shared-parameter structures
// pick one route for all components (the surrogate route only if every
// component is heavy-tailed); fully per-group structures route each
// component by its own shape. A final compare guards against rounding.
inline std::vector<ScaleDecomposition> update_scale(
    Structure structure, const ScaleStepInputs& in,
    const std::vector<ScaleDecomposition>& current) {
  const int G = in.groups();
  if (static_cast<int>(in.mu.size()) != G ||
      static_cast<int>(in.beta.size()) != G)
    throw ValidationError("update_scale: group count mismatch");
  for (int g = 0; g < G; ++g) {
    if (in.z.col(g).sum() <= 1e-8)
      throw DegenerateComponentError("update_scale: component " +
                                     std::to_string(g + 1) +
                                     " has vanishing weight");
  }

  // At beta = 1 the tangent bound on delta^beta is an identity, so the
  // closed-form branch is exact there; only beta > 1 needs the direct route.
  std::vector<MatrixXd> y = scale_detail::centered_groups(in);
  bool all_heavy = true;
  for (double b : in.beta) all_heavy = all_heavy && b <= 1.0;

  const bool per_group_routing = lambda_tying(structure) == Tying::PerGroup &&
                                 delta_tying(structure) != Tying::Shared &&
                                 gamma_tying(structure) != Tying::Shared;

  std::vector<ScaleDecomposition> proposal;
  if (all_heavy) {
    WeightedScatter stats = scale_detail::weighted_scatter(in, current, y);
    proposal = scale_detail::surrogate_update(structure, stats, current);
  } else if (per_group_routing) {
    // independent components: surrogate for heavy tails, direct otherwise
    proposal = current;
    WeightedScatter stats = scale_detail::weighted_scatter(in, current, y);
    std::vector<ScaleDecomposition> surrogate =
        scale_detail::surrogate_update(structure, stats, current);
    std::vector<ScaleDecomposition> direct =
        scale_detail::direct_update(structure, in, current, y);
    for (int g = 0; g < G; ++g)
      proposal[g] = in.beta[g] <= 1.0 ? surrogate[g] : direct[g];
  } else {
    proposal = scale_detail::direct_update(structure, in, current, y);
  }

  if (q_scale(in, proposal) < q_scale(in, current)) {
    warn("update_scale: rounding produced a non-increasing step; keeping "
         "previous scale parameters");
    return current;
  }
  return proposal;
}

}  // namespace spemix
