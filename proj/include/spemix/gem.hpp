#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "spemix/init.hpp"
#include "spemix/metrics.hpp"
#include "spemix/mixture.hpp"
#include "spemix/scale.hpp"

namespace spemix {

inline constexpr double kBetaMin = 0.05;
inline constexpr double kBetaMax = 20.0;
inline constexpr double kMuDeltaFloor = 1e-12;

inline VectorXd update_pi(const Responsibilities& resp) {
  return resp.z.colwise().mean();
}

// The part of the expected complete-data objective that depends on mu for
// one component: sum_i z_i [ -1/2 d_i^beta + log Phi(eta'(x_i - mu)) ].
inline double q_mu_objective(const MatrixXd& data, const VectorXd& z,
                             const ComponentParams& c, const VectorXd& mu) {
  ComponentParams shifted = c;
  shifted.mu = mu;
  VectorXd d = shifted.mahalanobis(data);
  VectorXd s = shifted.skew_argument(data);
  // the power term vectorizes; rows of zero weight are masked after the
  // fact so an overflowing power cannot contribute 0 * inf
  const auto zq = z.array();
  double power = (zq == 0.0).select(0.0, zq * d.array().pow(c.beta)).sum();
  double skew = 0.0;
  for (int i = 0; i < data.rows(); ++i)
    if (z[i] != 0.0) skew += z[i] * log_cdf_normal(s[i]);
  return -0.5 * power + skew;
}

struct MuDerivatives {
  VectorXd grad;
  MatrixXd hess;
};

// Gradient and Hessian of the location objective share every intermediate
// (centered rows, precision products, distances, skew ratios), so both are
// produced in a single pass.
inline MuDerivatives mu_derivatives(const MatrixXd& data, const VectorXd& z,
                                    const ComponentParams& c,
                                    const VectorXd& mu) {
  ComponentParams shifted = c;
  shifted.mu = mu;
  MatrixXd sigma_inv = shifted.sigma_inv();
  MatrixXd y = data.rowwise() - mu.transpose();
  MatrixXd v = y * sigma_inv;  // rows are Sigma^{-1}(x - mu)
  Eigen::ArrayXd d = shifted.mahalanobis(data).array().max(kMuDeltaFloor);
  VectorXd s = shifted.skew_argument(data);
  Eigen::ArrayXd m(data.rows());
  for (int i = 0; i < data.rows(); ++i) m[i] = phi_over_Phi(s[i]);

  const auto zq = z.array();
  Eigen::ArrayXd w =
      (zq == 0.0).select(0.0, zq * c.beta * d.pow(c.beta - 1.0));
  Eigen::ArrayXd w2 = (zq == 0.0).select(
      0.0, zq * (2.0 * c.beta * (c.beta - 1.0)) * d.pow(c.beta - 2.0));
  double skew_coeff = (zq * (s.array() * m + m * m)).sum();

  MuDerivatives out;
  out.grad = v.transpose() * w.matrix() - (zq * m).sum() * c.eta;
  out.hess = -w.sum() * sigma_inv;
  out.hess.noalias() -= v.transpose() * w2.matrix().asDiagonal() * v;
  out.hess.noalias() -= skew_coeff * (c.eta * c.eta.transpose());
  return out;
}

inline VectorXd grad_q_mu(const MatrixXd& data, const VectorXd& z,
                          const ComponentParams& c, const VectorXd& mu) {
  return mu_derivatives(data, z, c, mu).grad;
}

inline MatrixXd hess_q_mu(const MatrixXd& data, const VectorXd& z,
                          const ComponentParams& c, const VectorXd& mu) {
  return mu_derivatives(data, z, c, mu).hess;
}

// One safeguarded Newton step on the location. Falls back to gradient
// ascent when the Hessian is not negative definite, and halves the step
// until the objective does not decrease; the old location is kept when no
// acceptable step exists.
inline VectorXd update_mu(const MatrixXd& data, const VectorXd& z,
                          const ComponentParams& c) {
  MuDerivatives der = mu_derivatives(data, z, c, c.mu);
  const VectorXd& grad = der.grad;
  if (!grad.allFinite())
    throw NumericalError("update_mu: non-finite gradient");
  if (grad.norm() == 0.0) return c.mu;

  const MatrixXd& h = der.hess;
  VectorXd direction;
  bool newton = h.allFinite();
  if (newton) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(h);
    if (es.info() == Eigen::Success && es.eigenvalues().maxCoeff() < 0.0)
      direction = -es.eigenvectors() *
                  (es.eigenvectors().transpose() * grad).cwiseQuotient(
                      es.eigenvalues());
    else
      newton = false;
  }
  if (!newton) direction = grad;

  const double q0 = q_mu_objective(data, z, c, c.mu);
  double step = 1.0;
  for (int halving = 0; halving < 30; ++halving) {
    VectorXd candidate = c.mu + step * direction;
    double q = q_mu_objective(data, z, c, candidate);
    if (std::isfinite(q) && q >= q0) return candidate;
    step *= 0.5;
  }
  return c.mu;
}

// Skew part of the objective as a function of eta alone.
inline double q_skew(const MatrixXd& data, const VectorXd& z,
                     const VectorXd& mu, const VectorXd& eta) {
  MatrixXd y = data.rowwise() - mu.transpose();
  VectorXd s = y * eta;
  double q = 0.0;
  for (int i = 0; i < data.rows(); ++i)
    if (z[i] != 0.0) q += z[i] * log_cdf_normal(s[i]);
  return q;
}

// Quadratic minorizer of q_skew anchored at eta0; tangent there and below
// everywhere because (log Phi)'' lies in (-1, 0).
inline double eta_surrogate(const MatrixXd& data, const VectorXd& z,
                            const VectorXd& mu, const VectorXd& eta0,
                            const VectorXd& eta) {
  MatrixXd y = data.rowwise() - mu.transpose();
  VectorXd s0 = y * eta0;
  VectorXd s = y * eta;
  double q = 0.0;
  for (int i = 0; i < data.rows(); ++i) {
    if (z[i] == 0.0) continue;
    const double gap = s[i] - s0[i];
    q += z[i] * (log_cdf_normal(s0[i]) + phi_over_Phi(s0[i]) * gap -
                 0.5 * gap * gap);
  }
  return q;
}

// Closed-form maximizer of the minorizer: eta0 + A^{-1} b with
// A = sum z (x-mu)(x-mu)' and b = sum z (phi/Phi)(s0) (x-mu).
inline VectorXd update_eta(const MatrixXd& data, const VectorXd& z,
                           const VectorXd& mu, const VectorXd& eta0) {
  const int p = static_cast<int>(mu.size());
  MatrixXd y = data.rowwise() - mu.transpose();
  VectorXd s0 = y * eta0;
  VectorXd weights(data.rows());
  for (int i = 0; i < data.rows(); ++i)
    weights[i] = z[i] * phi_over_Phi(s0[i]);
  MatrixXd a = y.transpose() * z.asDiagonal() * y;
  VectorXd b = y.transpose() * weights;

  Eigen::LLT<MatrixXd> llt(a);
  if (llt.info() != Eigen::Success) {
    warn("update_eta: singular moment matrix; adding ridge");
    a += (1e-8 * a.trace() / p) * MatrixXd::Identity(p, p);
    llt.compute(a);
    if (llt.info() != Eigen::Success)
      throw NumericalError("update_eta: moment matrix not positive definite");
  }
  return eta0 + llt.solve(b);
}

namespace gem_detail {

// Tail-weight objective over a pooled set of (count, distances) blocks:
// Q(beta) = n [-lgamma(1 + p/(2 beta)) - (1 + p/(2 beta)) log 2]
//           - 1/2 sum z d^beta, summed over the blocks sharing beta.
struct BetaBlock {
  double n = 0.0;
  std::vector<double> z;
  std::vector<double> d;
};

inline double q_beta(const std::vector<BetaBlock>& blocks, int p, double beta) {
  double q = 0.0;
  for (const auto& block : blocks) {
    q += block.n * (-std::lgamma(1.0 + p / (2.0 * beta)) -
                    (1.0 + p / (2.0 * beta)) * kLn2);
    double energy = 0.0;
    for (std::size_t i = 0; i < block.d.size(); ++i)
      energy += block.z[i] * std::pow(block.d[i], beta);
    q -= 0.5 * energy;
  }
  return q;
}

inline double dq_beta(const std::vector<BetaBlock>& blocks, int p, double beta) {
  double dq = 0.0;
  const double shape = 1.0 + p / (2.0 * beta);
  const double factor = p / (2.0 * beta * beta);
  for (const auto& block : blocks) {
    dq += block.n * factor * (digamma(shape) + kLn2);
    for (std::size_t i = 0; i < block.d.size(); ++i) {
      const double d = std::max(block.d[i], 1e-300);
      dq -= 0.5 * block.z[i] * std::pow(d, beta) * std::log(d);
    }
  }
  return dq;
}

// The search below evaluates the objective and its derivative a few hundred
// times per call, so the per-block logs are taken once and each evaluation
// reduces to a vectorized exp. d^beta is computed as exp(beta log d); the
// unfloored log is kept for the objective (a zero distance contributes
// nothing, matching pow) and the floored log for the derivative.
struct BetaCache {
  double n = 0.0;
  Eigen::ArrayXd z;
  Eigen::ArrayXd log_d;
  Eigen::ArrayXd log_d_floored;
  Eigen::ArrayXd z_log_d_floored;
};

inline std::vector<BetaCache> make_beta_caches(
    const std::vector<BetaBlock>& blocks) {
  std::vector<BetaCache> caches(blocks.size());
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const BetaBlock& block = blocks[b];
    BetaCache& cache = caches[b];
    cache.n = block.n;
    const auto m = static_cast<Eigen::Index>(block.d.size());
    cache.z.resize(m);
    cache.log_d.resize(m);
    if (m > 0) {
      cache.z = Eigen::Map<const Eigen::ArrayXd>(block.z.data(), m);
      Eigen::ArrayXd d = Eigen::Map<const Eigen::ArrayXd>(block.d.data(), m);
      cache.log_d = d.log();
      cache.log_d_floored = d.max(1e-300).log();
      cache.z_log_d_floored = cache.z * cache.log_d_floored;
    } else {
      cache.log_d_floored.resize(0);
      cache.z_log_d_floored.resize(0);
    }
  }
  return caches;
}

inline double q_beta_cached(const std::vector<BetaCache>& caches, int p,
                            double beta) {
  double q = 0.0;
  for (const auto& cache : caches) {
    q += cache.n * (-std::lgamma(1.0 + p / (2.0 * beta)) -
                    (1.0 + p / (2.0 * beta)) * kLn2);
    if (cache.z.size() > 0)
      q -= 0.5 * (cache.z * (beta * cache.log_d).exp()).sum();
  }
  return q;
}

inline double dq_beta_cached(const std::vector<BetaCache>& caches, int p,
                             double beta) {
  double dq = 0.0;
  const double shape = 1.0 + p / (2.0 * beta);
  const double factor = p / (2.0 * beta * beta);
  for (const auto& cache : caches) {
    dq += cache.n * factor * (digamma(shape) + kLn2);
    if (cache.z.size() > 0)
      dq -= 0.5 *
            (cache.z_log_d_floored * (beta * cache.log_d_floored).exp()).sum();
  }
  return dq;
}

// Bracketed root find on dQ/dbeta across a log-spaced scan of [0.05, 20],
// with a golden-section fallback when the derivative never changes sign.
// The returned value never scores below the current beta.
inline double maximize_beta(const std::vector<BetaBlock>& blocks, int p,
                            double current) {
  const std::vector<BetaCache> caches = make_beta_caches(blocks);
  const int grid_size = 41;
  const double log_lo = std::log(kBetaMin), log_hi = std::log(kBetaMax);
  std::vector<double> candidates = {kBetaMin, kBetaMax,
                                    std::clamp(current, kBetaMin, kBetaMax)};
  double prev_beta = kBetaMin;
  double prev_sign = dq_beta_cached(caches, p, prev_beta);
  bool sign_change = false;
  for (int k = 1; k < grid_size; ++k) {
    double beta = std::exp(log_lo + (log_hi - log_lo) * k / (grid_size - 1));
    double deriv = dq_beta_cached(caches, p, beta);
    if ((prev_sign > 0.0 && deriv < 0.0) || (prev_sign < 0.0 && deriv > 0.0)) {
      sign_change = true;
      double lo = prev_beta, hi = beta;
      double f_lo = prev_sign;
      for (int iter = 0; iter < 80 && hi - lo > 1e-9 * hi; ++iter) {
        double mid = 0.5 * (lo + hi);
        double f_mid = dq_beta_cached(caches, p, mid);
        if ((f_lo > 0.0) == (f_mid > 0.0)) {
          lo = mid;
          f_lo = f_mid;
        } else {
          hi = mid;
        }
      }
      candidates.push_back(0.5 * (lo + hi));
    }
    prev_beta = beta;
    prev_sign = deriv;
  }
  if (!sign_change) {
    double lo = log_lo, hi = log_hi;
    const double ratio = 0.61803398874989485;
    double x1 = hi - ratio * (hi - lo), x2 = lo + ratio * (hi - lo);
    double f1 = q_beta_cached(caches, p, std::exp(x1));
    double f2 = q_beta_cached(caches, p, std::exp(x2));
    for (int iter = 0; iter < 60; ++iter) {
      if (f1 < f2) {
        lo = x1; x1 = x2; f1 = f2;
        x2 = lo + ratio * (hi - lo); f2 = q_beta_cached(caches, p, std::exp(x2));
      } else {
        hi = x2; x2 = x1; f2 = f1;
        x1 = hi - ratio * (hi - lo); f1 = q_beta_cached(caches, p, std::exp(x1));
      }
    }
    candidates.push_back(std::exp(0.5 * (lo + hi)));
  }
  double best = candidates[0];
  double best_q = q_beta_cached(caches, p, best);
  for (double candidate : candidates) {
    double q = q_beta_cached(caches, p, candidate);
    if (q > best_q) {
      best_q = q;
      best = candidate;
    }
  }
  return best;
}

}  // namespace gem_detail

// Tail-weight update: independent per component under a varying
// constraint, one pooled problem under the equal constraint.
inline std::vector<double> update_beta(const MatrixXd& data,
                                       const Responsibilities& resp,
                                       const MixtureModel& model) {
  const int G = model.groups();
  const int p = model.dim();
  std::vector<gem_detail::BetaBlock> blocks(G);
  for (int g = 0; g < G; ++g) {
    VectorXd d = model.components[g].mahalanobis(data);
    blocks[g].n = resp.z.col(g).sum();
    for (int i = 0; i < data.rows(); ++i) {
      if (resp.z(i, g) == 0.0) continue;
      blocks[g].z.push_back(resp.z(i, g));
      blocks[g].d.push_back(d[i]);
    }
  }
  std::vector<double> betas(G);
  if (model.spec.beta_constraint == BetaConstraint::Equal) {
    double shared =
        gem_detail::maximize_beta(blocks, p, model.components[0].beta);
    for (int g = 0; g < G; ++g) betas[g] = shared;
  } else {
    for (int g = 0; g < G; ++g)
      betas[g] = gem_detail::maximize_beta({blocks[g]}, p,
                                           model.components[g].beta);
  }
  return betas;
}

struct ConvergenceMonitor {
  std::vector<double> trace;
  double epsilon = 0.005;
  double ratio = std::numeric_limits<double>::quiet_NaN();
  double asymptote = std::numeric_limits<double>::quiet_NaN();

  void push(double loglik) { trace.push_back(loglik); }
};

// Aitken acceleration on the last three log-likelihoods: converged when
// the projected asymptote sits within epsilon above the newest value.
inline bool aitken_converged(ConvergenceMonitor& monitor) {
  const std::size_t k = monitor.trace.size();
  if (k < 3) return false;
  const double l0 = monitor.trace[k - 3];
  const double l1 = monitor.trace[k - 2];
  const double l2 = monitor.trace[k - 1];
  const double denom = l1 - l0;
  const double diff = l2 - l1;
  if (denom == 0.0) return std::fabs(diff) < monitor.epsilon;
  const double a = diff / denom;
  monitor.ratio = a;
  if (!(a < 1.0)) return false;
  monitor.asymptote = l1 + diff / (1.0 - a);
  const double gap = monitor.asymptote - l2;
  return gap >= 0.0 && gap < monitor.epsilon;
}

struct FitOptions {
  int max_iterations = 1000;
  double epsilon = 0.005;
  std::uint64_t seed = 0;
  int kmeans_max_iter = 100;
  bool fix_skew = false;  // hold eta at zero (symmetric submodel)
};

struct FitResult {
  MixtureModel model;
  Responsibilities resp;
  std::vector<int> hard_labels;
  double loglik = -std::numeric_limits<double>::infinity();
  int free_params = 0;
  double bic_value = -std::numeric_limits<double>::infinity();
  double icl_value = -std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool converged = false;
  bool failed = false;
  std::string failure_reason;
  std::vector<double> trace;
  std::uint64_t seed = 0;
  std::string init_method = "kmeans";
  bool standardized = false;
};

namespace gem_detail {

inline void m_step_sweep(const MatrixXd& data, MixtureModel& model,
                         const Responsibilities& resp, bool fix_skew) {
  const int G = model.groups();
  model.pi = update_pi(resp);
  for (int g = 0; g < G; ++g)
    model.components[g].mu = update_mu(data, resp.z.col(g), model.components[g]);
  if (!fix_skew)
    for (int g = 0; g < G; ++g)
      model.components[g].eta = update_eta(data, resp.z.col(g),
                                           model.components[g].mu,
                                           model.components[g].eta);
  std::vector<double> betas = update_beta(data, resp, model);
  for (int g = 0; g < G; ++g) model.components[g].beta = betas[g];

  std::vector<VectorXd> mus(G);
  std::vector<ScaleDecomposition> current(G, ScaleDecomposition::identity(model.dim()));
  for (int g = 0; g < G; ++g) {
    mus[g] = model.components[g].mu;
    current[g] = model.components[g].scale;
  }
  ScaleStepInputs inputs{data, resp.z, mus, betas};
  auto updated = update_scale(model.spec.structure, inputs, current);
  for (int g = 0; g < G; ++g) model.components[g].scale = updated[g];
}

}  // namespace gem_detail

// GEM iterations from explicit starting parameters.
inline FitResult fit_from(const MatrixXd& data, MixtureModel model,
                          const FitOptions& options = {},
                          const std::vector<int>& labels = {}) {
  const int n = static_cast<int>(data.rows());
  const int p = static_cast<int>(data.cols());
  model.validate();
  if (model.dim() != p) throw ValidationError("fit: model dimension mismatch");

  FitResult result;
  result.model = std::move(model);
  result.seed = options.seed;
  result.free_params =
      free_param_count(result.model.spec, p, result.model.groups());

  ConvergenceMonitor monitor;
  monitor.epsilon = options.epsilon;
  try {
    EStepResult e = e_step_full(data, result.model, labels);
    monitor.push(e.loglik);
    result.resp = std::move(e.resp);
    result.loglik = e.loglik;
    for (int iter = 1; iter <= options.max_iterations; ++iter) {
      for (int g = 0; g < result.model.groups(); ++g)
        if (result.resp.z.col(g).sum() < p + 1)
          throw DegenerateComponentError(
              "fit: component " + std::to_string(g + 1) +
              " holds fewer than p + 1 observations");
      gem_detail::m_step_sweep(data, result.model, result.resp,
                               options.fix_skew);
      e = e_step_full(data, result.model, labels);
      monitor.push(e.loglik);
      result.resp = std::move(e.resp);
      result.loglik = e.loglik;
      result.iterations = iter;
      if (aitken_converged(monitor)) {
        result.converged = true;
        break;
      }
    }
  } catch (const NumericalError& err) {
    result.failed = true;
    result.failure_reason = err.what();
  }
  result.trace = monitor.trace;
  if (result.resp.z.size() > 0) result.hard_labels = map_labels(result.resp.z);
  if (!result.failed) {
    result.bic_value = bic(result.loglik, result.free_params, n);
    result.icl_value = icl(result.bic_value, result.resp.z);
  }
  return result;
}

// Full pipeline: seeded k-means (label-aware when partial labels are
// given), moment starts, then GEM.
inline FitResult fit(const MatrixXd& data, const ModelSpec& spec, int G,
                     const FitOptions& options = {},
                     const std::vector<int>& labels = {}) {
  const int n = static_cast<int>(data.rows());
  if (n < 1 || data.cols() < 1) throw DataError("fit: empty data");
  if (!data.allFinite()) throw DataError("fit: data contains non-finite values");
  if (G < 1) throw ValidationError("fit: component count must be positive");

  Rng rng(options.seed);
  std::vector<int> assignment;
  std::string init_method;
  if (labels.empty()) {
    assignment = kmeans(data, G, rng, options.kmeans_max_iter);
    init_method = "kmeans";
  } else {
    assignment = complete_labels(data, G, labels, rng, options.kmeans_max_iter);
    init_method = "kmeans+labels";
  }
  MixtureModel model = init_params(data, assignment, spec, G);
  FitResult result = fit_from(data, std::move(model), options, labels);
  result.init_method = init_method;
  return result;
}

}  // namespace spemix
