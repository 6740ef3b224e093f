#pragma once

#include <cmath>
#include <vector>

#include "spemix/mixture.hpp"
#include "spemix/rng.hpp"

namespace spemix {

namespace init_detail {

// Lloyd iterations from the given centers. Clusters that empty out are
// reseeded to the point farthest from its own center. Assignment ties go
// to the lowest cluster index.
inline std::vector<int> lloyd(const MatrixXd& data, MatrixXd centers,
                              int max_iter, std::vector<double>* wcss_trace) {
  const int n = static_cast<int>(data.rows());
  const int G = static_cast<int>(centers.rows());
  std::vector<int> labels(n, 0);
  for (int iter = 0; iter < max_iter; ++iter) {
    bool changed = false;
    for (int i = 0; i < n; ++i) {
      int best = 0;
      double best_d = (data.row(i) - centers.row(0)).squaredNorm();
      for (int g = 1; g < G; ++g) {
        double d = (data.row(i) - centers.row(g)).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = g;
        }
      }
      if (labels[i] != best) {
        labels[i] = best;
        changed = true;
      }
    }
    std::vector<int> counts(G, 0);
    for (int lab : labels) ++counts[lab];
    for (int g = 0; g < G; ++g) {
      if (counts[g] > 0) continue;
      int farthest = -1;
      double far_d = -1.0;
      for (int i = 0; i < n; ++i) {
        if (counts[labels[i]] <= 1) continue;  // never empty a donor cluster
        double d = (data.row(i) - centers.row(labels[i])).squaredNorm();
        if (d > far_d) {
          far_d = d;
          farthest = i;
        }
      }
      if (farthest < 0) break;
      --counts[labels[farthest]];
      labels[farthest] = g;
      ++counts[g];
      changed = true;
    }
    centers.setZero();
    for (int i = 0; i < n; ++i) centers.row(labels[i]) += data.row(i);
    for (int g = 0; g < G; ++g)
      if (counts[g] > 0) centers.row(g) /= counts[g];
    if (wcss_trace) {
      double wcss = 0.0;
      for (int i = 0; i < n; ++i)
        wcss += (data.row(i) - centers.row(labels[i])).squaredNorm();
      wcss_trace->push_back(wcss);
    }
    if (!changed) break;
  }
  return labels;
}

}  // namespace init_detail

// Hard partition from one seeded random start.
inline std::vector<int> kmeans(const MatrixXd& data, int G, Rng& rng,
                               int max_iter = 100,
                               std::vector<double>* wcss_trace = nullptr) {
  const int n = static_cast<int>(data.rows());
  if (G < 1) throw ValidationError("kmeans: G must be positive");
  if (n < G) throw ValidationError("kmeans: fewer observations than clusters");
  std::vector<int> seed_rows = rng.sample_indices(n, G);
  MatrixXd centers(G, data.cols());
  for (int g = 0; g < G; ++g) centers.row(g) = data.row(seed_rows[g]);
  return init_detail::lloyd(data, centers, max_iter, wcss_trace);
}

// Completes a partially labeled vector: labeled rows keep their group, the
// unlabeled rows are clustered with centers seeded from the labeled group
// means (groups with no labels get random unlabeled rows as seeds).
inline std::vector<int> complete_labels(const MatrixXd& data, int G,
                                        const std::vector<int>& labels,
                                        Rng& rng, int max_iter = 100) {
  const int n = static_cast<int>(data.rows());
  if (static_cast<int>(labels.size()) != n)
    throw ValidationError("complete_labels: label vector length mismatch");
  std::vector<int> unlabeled;
  std::vector<int> counts(G, 0);
  MatrixXd sums = MatrixXd::Zero(G, data.cols());
  for (int i = 0; i < n; ++i) {
    const int lab = labels[i];
    if (lab < -1 || lab >= G)
      throw DataError("complete_labels: label out of range at row " +
                      std::to_string(i + 1));
    if (lab < 0) {
      unlabeled.push_back(i);
    } else {
      ++counts[lab];
      sums.row(lab) += data.row(i);
    }
  }
  if (unlabeled.empty()) return labels;

  MatrixXd centers(G, data.cols());
  const int m = static_cast<int>(unlabeled.size());
  for (int g = 0; g < G; ++g) {
    if (counts[g] > 0)
      centers.row(g) = sums.row(g) / counts[g];
    else
      centers.row(g) = data.row(unlabeled[rng.below(m)]);
  }
  MatrixXd subset(m, data.cols());
  for (int j = 0; j < m; ++j) subset.row(j) = data.row(unlabeled[j]);
  std::vector<int> sub_labels =
      init_detail::lloyd(subset, centers, max_iter, nullptr);
  std::vector<int> full = labels;
  for (int j = 0; j < m; ++j) full[unlabeled[j]] = sub_labels[j];
  return full;
}

namespace init_detail {

inline double geometric_mean(VectorXd& v) {
  v = v.cwiseMax(1e-300);
  double log_mean = v.array().log().mean();
  v = (v.array().log() - log_mean).exp();
  return std::exp(log_mean);
}

// Group sample covariances projected onto the structure's constraint set
// by the pooled closed forms of the Gaussian case.
inline std::vector<ScaleDecomposition> project_structure(
    Structure st, const std::vector<MatrixXd>& cov, const VectorXd& n) {
  const int G = static_cast<int>(cov.size());
  const int p = static_cast<int>(cov[0].rows());
  const double total = n.sum();
  std::vector<ScaleDecomposition> decs(G, ScaleDecomposition::identity(p));
  MatrixXd pooled = MatrixXd::Zero(p, p);
  for (int g = 0; g < G; ++g) pooled += n[g] * cov[g];
  pooled /= total;

  switch (st) {
    case Structure::EII: {
      double lambda = std::max(pooled.trace() / p, kLambdaFloor);
      for (auto& dec : decs) dec.lambda = lambda;
      break;
    }
    case Structure::VII:
      for (int g = 0; g < G; ++g)
        decs[g].lambda = std::max(cov[g].trace() / p, kLambdaFloor);
      break;
    case Structure::EEI: {
      VectorXd d = pooled.diagonal();
      double mean = geometric_mean(d);
      for (auto& dec : decs) {
        dec.delta = d;
        dec.lambda = std::max(mean, kLambdaFloor);
      }
      break;
    }
    case Structure::VVI:
      for (int g = 0; g < G; ++g) {
        VectorXd d = cov[g].diagonal();
        double mean = geometric_mean(d);
        decs[g].delta = d;
        decs[g].lambda = std::max(mean, kLambdaFloor);
      }
      break;
    case Structure::EEE: {
      ScaleDecomposition dec = decompose(pooled);
      for (int g = 0; g < G; ++g) decs[g] = dec;
      break;
    }
    case Structure::VVV:
      for (int g = 0; g < G; ++g) decs[g] = decompose(cov[g]);
      break;
    case Structure::EEV: {
      VectorXd shape = VectorXd::Zero(p);
      std::vector<MatrixXd> axes(G);
      for (int g = 0; g < G; ++g) {
        SymEig eig = sym_eig(cov[g]);
        floor_eigenvalues(eig, "init_params");
        shape += n[g] * eig.values / total;
        axes[g] = eig.vectors;
      }
      double mean = geometric_mean(shape);
      for (int g = 0; g < G; ++g) {
        decs[g].gamma = axes[g];
        decs[g].delta = shape;
        decs[g].lambda = std::max(mean, kLambdaFloor);
      }
      break;
    }
    case Structure::VVE: {
      SymEig eig = sym_eig(pooled);
      floor_eigenvalues(eig, "init_params");
      for (int g = 0; g < G; ++g) {
        VectorXd d = (eig.vectors.transpose() * cov[g] * eig.vectors).diagonal();
        double mean = geometric_mean(d);
        decs[g].gamma = eig.vectors;
        decs[g].delta = d;
        decs[g].lambda = std::max(mean, kLambdaFloor);
      }
      break;
    }
  }
  return decs;
}

}  // namespace init_detail

// Moment-based starting parameters from a hard partition: group means and
// structure-projected group covariances, tail weight 0.5, no skew.
inline MixtureModel init_params(const MatrixXd& data,
                                const std::vector<int>& labels,
                                const ModelSpec& spec, int G) {
  const int n = static_cast<int>(data.rows());
  const int p = static_cast<int>(data.cols());
  if (static_cast<int>(labels.size()) != n)
    throw ValidationError("init_params: label vector length mismatch");

  VectorXd counts = VectorXd::Zero(G);
  std::vector<VectorXd> means(G, VectorXd::Zero(p));
  for (int i = 0; i < n; ++i) {
    const int g = labels[i];
    if (g < 0 || g >= G)
      throw ValidationError("init_params: label out of range at row " +
                            std::to_string(i + 1));
    counts[g] += 1.0;
    means[g] += data.row(i).transpose();
  }
  for (int g = 0; g < G; ++g) {
    if (counts[g] == 0.0)
      throw ValidationError("init_params: group " + std::to_string(g + 1) +
                            " is empty");
    means[g] /= counts[g];
  }

  VectorXd overall_mean = data.colwise().mean();
  double overall_var =
      (data.rowwise() - overall_mean.transpose()).squaredNorm() /
      std::max(1, n - 1) / p;
  if (overall_var <= 0.0) overall_var = 1.0;

  std::vector<MatrixXd> cov(G);
  for (int g = 0; g < G; ++g) {
    if (counts[g] < 2.0) {
      cov[g] = 1e-4 * overall_var * MatrixXd::Identity(p, p);
      continue;
    }
    MatrixXd acc = MatrixXd::Zero(p, p);
    for (int i = 0; i < n; ++i) {
      if (labels[i] != g) continue;
      VectorXd y = data.row(i).transpose() - means[g];
      acc += y * y.transpose();
    }
    acc /= counts[g];
    if (acc.trace() <= 0.0)
      acc = 1e-4 * overall_var * MatrixXd::Identity(p, p);
    cov[g] = acc;
  }

  MixtureModel model;
  model.spec = spec;
  model.pi = counts / n;
  auto decs = init_detail::project_structure(spec.structure, cov, counts);
  for (int g = 0; g < G; ++g) {
    ComponentParams c;
    c.mu = means[g];
    c.scale = decs[g];
    c.beta = 0.5;
    c.eta = VectorXd::Zero(p);
    model.components.push_back(std::move(c));
  }
  model.validate();
  return model;
}

}  // namespace spemix
