#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "spemix/distribution.hpp"
#include "spemix/gem.hpp"
#include "../common/support.hpp"

namespace {

using spemix::ComponentParams;
using spemix::MatrixXd;
using spemix::MixtureModel;
using spemix::ModelSpec;
using spemix::Responsibilities;
using spemix::Structure;
using spemix::VectorXd;

ComponentParams random_component(int p, spemix::Rng& rng, double beta,
                                 double skew_scale) {
  ComponentParams c;
  c.mu = testsup::random_gaussian_vector(p, rng);
  c.scale = spemix::decompose(testsup::random_spd(p, rng));
  c.beta = beta;
  c.eta = skew_scale * testsup::random_gaussian_vector(p, rng);
  return c;
}

MixtureModel random_model(const ModelSpec& spec, int G, int p,
                          spemix::Rng& rng, double beta, double skew_scale) {
  MixtureModel model;
  model.spec = spec;
  model.pi = VectorXd::Zero(G);
  for (int g = 0; g < G; ++g) {
    model.pi[g] = 0.5 + rng.uniform();
    model.components.push_back(random_component(p, rng, beta, skew_scale));
  }
  model.pi /= model.pi.sum();
  return model;
}

// Density through the generic matrix route, independent of the
// decomposition-based evaluation inside the mixture.
double reference_log_density(const VectorXd& x, const ComponentParams& c) {
  spemix::SpeParams params;
  params.mu = c.mu;
  params.sigma = c.sigma();
  params.beta = c.beta;
  params.psi = c.psi();
  return spemix::log_density_mspe(x, params);
}

VectorXd soft_column(int n, spemix::Rng& rng) {
  VectorXd z(n);
  for (int i = 0; i < n; ++i) z[i] = rng.uniform() + 0.05;
  return z;
}

TEST(ObservedLoglik, SingleComponentIsDensitySum) {
  spemix::Rng rng(601);
  MixtureModel model = random_model({Structure::VVV,
                                     spemix::BetaConstraint::Varying},
                                    1, 3, rng, 0.85, 0.6);
  MatrixXd data = testsup::random_gaussian_matrix(25, 3, rng) * 1.5;
  double expected = model.components[0].log_density(data).sum();
  EXPECT_NEAR(spemix::observed_loglik(data, model), expected, 1e-12);
  double reference = 0.0;
  for (int i = 0; i < data.rows(); ++i)
    reference += reference_log_density(data.row(i), model.components[0]);
  EXPECT_NEAR(spemix::observed_loglik(data, model), reference, 1e-9);
}

TEST(ObservedLoglik, DuplicatingDataDoublesIt) {
  spemix::Rng rng(602);
  MixtureModel model = random_model({Structure::VVV,
                                     spemix::BetaConstraint::Varying},
                                    2, 2, rng, 1.2, 0.4);
  MatrixXd data = testsup::random_gaussian_matrix(30, 2, rng);
  MatrixXd doubled(60, 2);
  doubled << data, data;
  double single = spemix::observed_loglik(data, model);
  double twice = spemix::observed_loglik(doubled, model);
  EXPECT_NEAR(twice, 2.0 * single, 1e-10 * std::fabs(single));
}

TEST(ObservedLoglik, MatchesScalarOracle) {
  spemix::Rng rng(603);
  MixtureModel model = random_model({Structure::VVV,
                                     spemix::BetaConstraint::Varying},
                                    2, 2, rng, 0.9, 0.5);
  MatrixXd data = testsup::random_gaussian_matrix(10, 2, rng);
  double oracle = 0.0;
  for (int i = 0; i < 10; ++i) {
    double mix = 0.0;
    for (int g = 0; g < 2; ++g)
      mix += model.pi[g] *
             std::exp(reference_log_density(data.row(i), model.components[g]));
    oracle += std::log(mix);
  }
  EXPECT_NEAR(spemix::observed_loglik(data, model), oracle, 1e-10);
}

TEST(ObservedLoglik, SemiSupervisedUsesJointTermsForLabeledRows) {
  spemix::Rng rng(604);
  MixtureModel model = random_model({Structure::VVV,
                                     spemix::BetaConstraint::Varying},
                                    2, 2, rng, 1.0, 0.3);
  MatrixXd data = testsup::random_gaussian_matrix(12, 2, rng);
  std::vector<int> labels(12, -1);
  labels[0] = 1;
  labels[5] = 0;
  labels[7] = 1;
  MatrixXd l = model.log_weighted_densities(data);
  double oracle = 0.0;
  for (int i = 0; i < 12; ++i) {
    if (labels[i] >= 0) {
      oracle += l(i, labels[i]);
    } else {
      double top = l.row(i).maxCoeff();
      oracle += top + std::log((l.row(i).array() - top).exp().sum());
    }
  }
  EXPECT_NEAR(spemix::observed_loglik(data, model, labels), oracle, 1e-12);
}

TEST(EStep, SingleComponentGivesOnes) {
  spemix::Rng rng(611);
  MixtureModel model = random_model({Structure::EII,
                                     spemix::BetaConstraint::Equal},
                                    1, 2, rng, 1.0, 0.0);
  MatrixXd data = testsup::random_gaussian_matrix(15, 2, rng);
  Responsibilities resp = spemix::e_step(data, model);
  resp.validate();
  EXPECT_LT((resp.z.col(0).array() - 1.0).abs().maxCoeff(), 1e-15);
}

TEST(EStep, IdenticalComponentsShareEvenly) {
  spemix::Rng rng(612);
  ComponentParams c = random_component(2, rng, 0.8, 0.5);
  MixtureModel model;
  model.spec = {Structure::VVV, spemix::BetaConstraint::Equal};
  model.pi = VectorXd::Constant(3, 1.0 / 3.0);
  model.components = {c, c, c};
  MatrixXd data = testsup::random_gaussian_matrix(20, 2, rng);
  Responsibilities resp = spemix::e_step(data, model);
  EXPECT_LT((resp.z.array() - 1.0 / 3.0).abs().maxCoeff(), 1e-14);
}

TEST(EStep, WellSeparatedComponentsAreConfident) {
  MixtureModel model;
  model.spec = {Structure::VVV, spemix::BetaConstraint::Varying};
  model.pi = VectorXd::Constant(2, 0.5);
  for (int g = 0; g < 2; ++g) {
    ComponentParams c;
    c.mu = VectorXd::Zero(2);
    c.mu[0] = g == 0 ? 0.0 : 10.0;  // ten scale units apart
    c.scale = spemix::ScaleDecomposition::identity(2);
    c.beta = 1.0;
    c.eta = VectorXd::Zero(2);
    model.components.push_back(c);
  }
  spemix::Rng rng(613);
  MatrixXd data(40, 2);
  for (int i = 0; i < 40; ++i) {
    data(i, 0) = (i < 20 ? 0.0 : 10.0) + 0.8 * rng.normal();
    data(i, 1) = 0.8 * rng.normal();
  }
  Responsibilities resp = spemix::e_step(data, model);
  double min_confidence = 1.0;
  for (int i = 0; i < 40; ++i)
    min_confidence = std::min(min_confidence, resp.z.row(i).maxCoeff());
  EXPECT_GT(min_confidence, 0.99);
}

TEST(EStep, LabeledRowsStayFrozen) {
  spemix::Rng rng(614);
  MixtureModel model = random_model({Structure::VVV,
                                     spemix::BetaConstraint::Varying},
                                    2, 2, rng, 1.0, 0.2);
  MatrixXd data = testsup::random_gaussian_matrix(10, 2, rng);
  std::vector<int> labels(10, -1);
  labels[2] = 1;
  labels[3] = 0;
  Responsibilities resp = spemix::e_step(data, model, labels);
  resp.validate();
  EXPECT_EQ(resp.frozen[2], 1);
  EXPECT_DOUBLE_EQ(resp.z(2, 1), 1.0);
  EXPECT_DOUBLE_EQ(resp.z(2, 0), 0.0);
  EXPECT_DOUBLE_EQ(resp.z(3, 0), 1.0);
  EXPECT_EQ(resp.frozen[0], -1);
}

TEST(EStep, UnderflowFallsBackToUniformWithWarning) {
  MixtureModel model;
  model.spec = {Structure::VVV, spemix::BetaConstraint::Equal};
  model.pi = VectorXd::Constant(2, 0.5);
  for (int g = 0; g < 2; ++g) {
    ComponentParams c;
    c.mu = VectorXd::Zero(2);
    c.mu[0] = g;
    c.scale = spemix::ScaleDecomposition::identity(2);
    c.beta = 20.0;
    c.eta = VectorXd::Zero(2);
    model.components.push_back(c);
  }
  MatrixXd data(1, 2);
  data << 1e10, 0.0;
  std::vector<std::string> messages;
  auto previous = spemix::warning_handler();
  spemix::warning_handler() = [&](const std::string& msg) {
    messages.push_back(msg);
  };
  Responsibilities resp = spemix::e_step(data, model);
  spemix::warning_handler() = previous;
  EXPECT_DOUBLE_EQ(resp.z(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(resp.z(0, 1), 0.5);
  ASSERT_EQ(messages.size(), 1u);
  EXPECT_NE(messages[0].find("underflow"), std::string::npos);
}

TEST(UpdatePi, MatchesColumnMeans) {
  MatrixXd z = MatrixXd::Zero(100, 2);
  for (int i = 0; i < 100; ++i) z(i, i < 30 ? 0 : 1) = 1.0;
  Responsibilities resp;
  resp.z = z;
  resp.frozen = Eigen::VectorXi::Constant(100, -1);
  VectorXd pi = spemix::update_pi(resp);
  EXPECT_DOUBLE_EQ(pi[0], 0.3);
  EXPECT_DOUBLE_EQ(pi[1], 0.7);

  spemix::Rng rng(621);
  MatrixXd soft(40, 3);
  for (int i = 0; i < 40; ++i) {
    VectorXd row(3);
    for (int g = 0; g < 3; ++g) row[g] = rng.uniform() + 0.01;
    soft.row(i) = row / row.sum();
  }
  resp.z = soft;
  resp.frozen = Eigen::VectorXi::Constant(40, -1);
  pi = spemix::update_pi(resp);
  for (int g = 0; g < 3; ++g)
    EXPECT_NEAR(pi[g], soft.col(g).mean(), 1e-14);
}

TEST(UpdateMu, GaussianStationaryPointDoesNotMove) {
  spemix::Rng rng(631);
  MatrixXd data = testsup::random_gaussian_matrix(30, 3, rng);
  VectorXd z = soft_column(30, rng);
  ComponentParams c;
  c.scale = spemix::decompose(testsup::random_spd(3, rng));
  c.beta = 1.0;
  c.eta = VectorXd::Zero(3);
  c.mu = (data.transpose() * z) / z.sum();
  VectorXd updated = spemix::update_mu(data, z, c);
  EXPECT_LT((updated - c.mu).norm(), 1e-10);
}

TEST(UpdateMu, GradientMatchesFiniteDifferences) {
  int seed = 640;
  for (int trial = 0; trial < 20; ++trial) {
    spemix::Rng rng(seed + trial);
    const int p = trial % 2 == 0 ? 2 : 3;
    const double beta = trial % 2 == 0 ? 0.8 : 1.4;
    MatrixXd data = testsup::random_gaussian_matrix(25, p, rng) * 1.3;
    VectorXd z = soft_column(25, rng);
    ComponentParams c = random_component(p, rng, beta, 0.7);
    VectorXd at = c.mu + 0.2 * testsup::random_gaussian_vector(p, rng);
    auto f = [&](const VectorXd& mu) {
      return spemix::q_mu_objective(data, z, c, mu);
    };
    VectorXd analytic = spemix::grad_q_mu(data, z, c, at);
    VectorXd numeric = testsup::fd_gradient(f, at, 1e-6);
    EXPECT_LT((analytic - numeric).norm() / numeric.norm(), 1e-6)
        << "trial " << trial;
  }
}

TEST(UpdateMu, HessianMatchesDifferencedGradient) {
  int seed = 660;
  for (int trial = 0; trial < 10; ++trial) {
    spemix::Rng rng(seed + trial);
    const int p = trial % 2 == 0 ? 2 : 3;
    const double beta = trial % 2 == 0 ? 0.8 : 1.6;
    MatrixXd data = testsup::random_gaussian_matrix(25, p, rng) * 1.3;
    VectorXd z = soft_column(25, rng);
    ComponentParams c = random_component(p, rng, beta, 0.7);
    VectorXd at = c.mu + 0.2 * testsup::random_gaussian_vector(p, rng);
    auto grad = [&](const VectorXd& mu) {
      return spemix::grad_q_mu(data, z, c, mu);
    };
    MatrixXd analytic = spemix::hess_q_mu(data, z, c, at);
    MatrixXd numeric = testsup::fd_jacobian(grad, at, 1e-6);
    EXPECT_LT((analytic - numeric).norm() / numeric.norm(), 1e-4)
        << "trial " << trial;
  }
}

TEST(UpdateMu, NewtonStepNeverLowersObjective) {
  for (int trial = 0; trial < 10; ++trial) {
    spemix::Rng rng(680 + trial);
    const int p = 2 + trial % 2;
    MatrixXd data = testsup::random_gaussian_matrix(30, p, rng);
    VectorXd z = soft_column(30, rng);
    ComponentParams c = random_component(p, rng, 0.6 + 0.2 * (trial % 5), 0.8);
    double before = spemix::q_mu_objective(data, z, c, c.mu);
    VectorXd updated = spemix::update_mu(data, z, c);
    double after = spemix::q_mu_objective(data, z, c, updated);
    EXPECT_GE(after, before - 1e-12 * std::fabs(before));
  }
}

TEST(UpdateEta, CenteredSymmetricStartStaysZero) {
  spemix::Rng rng(691);
  MatrixXd data = testsup::random_gaussian_matrix(40, 3, rng);
  VectorXd z = soft_column(40, rng);
  VectorXd mu = (data.transpose() * z) / z.sum();
  VectorXd eta = spemix::update_eta(data, z, mu, VectorXd::Zero(3));
  EXPECT_LT(eta.norm(), 1e-12);
}

TEST(UpdateEta, MinorizerIsTangentAndDominated) {
  spemix::Rng rng(692);
  MatrixXd data = testsup::random_gaussian_matrix(30, 2, rng);
  VectorXd z = soft_column(30, rng);
  VectorXd mu = 0.2 * testsup::random_gaussian_vector(2, rng);
  VectorXd eta0 = testsup::random_gaussian_vector(2, rng);
  double at_anchor = spemix::eta_surrogate(data, z, mu, eta0, eta0);
  double q_anchor = spemix::q_skew(data, z, mu, eta0);
  EXPECT_NEAR(at_anchor, q_anchor, 1e-12 * std::max(1.0, std::fabs(q_anchor)));
  for (int trial = 0; trial < 100; ++trial) {
    VectorXd eta = 2.0 * testsup::random_gaussian_vector(2, rng);
    double bound = spemix::eta_surrogate(data, z, mu, eta0, eta);
    double exact = spemix::q_skew(data, z, mu, eta);
    EXPECT_LE(bound, exact + 1e-10 * std::max(1.0, std::fabs(exact)));
  }
}

TEST(UpdateEta, RaisesSkewObjective) {
  for (int trial = 0; trial < 10; ++trial) {
    spemix::Rng rng(700 + trial);
    MatrixXd data = testsup::random_gaussian_matrix(30, 3, rng);
    VectorXd z = soft_column(30, rng);
    VectorXd mu = 0.3 * testsup::random_gaussian_vector(3, rng);
    VectorXd eta0 = testsup::random_gaussian_vector(3, rng);
    VectorXd eta1 = spemix::update_eta(data, z, mu, eta0);
    double before = spemix::q_skew(data, z, mu, eta0);
    double after = spemix::q_skew(data, z, mu, eta1);
    EXPECT_GE(after, before - 1e-12 * std::fabs(before));
  }
}

TEST(UpdateBeta, MatchesDenseGridOracle) {
  for (auto constraint : {spemix::BetaConstraint::Equal,
                          spemix::BetaConstraint::Varying}) {
    spemix::Rng rng(711);
    MixtureModel model = random_model({Structure::VVV, constraint}, 2, 2, rng,
                                      1.0, 0.3);
    if (constraint == spemix::BetaConstraint::Varying)
      model.components[1].beta = 1.0;
    MatrixXd data = testsup::random_gaussian_matrix(50, 2, rng) * 1.4;
    Responsibilities resp = spemix::e_step(data, model);
    std::vector<double> betas = spemix::update_beta(data, resp, model);

    // dense scan of the same objective, one component at a time
    for (int g = 0; g < 2; ++g) {
      std::vector<spemix::gem_detail::BetaBlock> blocks;
      for (int h = 0; h < 2; ++h) {
        if (constraint == spemix::BetaConstraint::Varying && h != g) continue;
        spemix::gem_detail::BetaBlock block;
        VectorXd d = model.components[h].mahalanobis(data);
        block.n = resp.z.col(h).sum();
        for (int i = 0; i < data.rows(); ++i) {
          block.z.push_back(resp.z(i, h));
          block.d.push_back(d[i]);
        }
        blocks.push_back(block);
      }
      double best_beta = 0.05, best_q = -1e300;
      for (double beta = 0.05; beta <= 20.0; beta += 1e-3) {
        double q = spemix::gem_detail::q_beta(blocks, 2, beta);
        if (q > best_q) {
          best_q = q;
          best_beta = beta;
        }
      }
      EXPECT_LT(std::fabs(betas[g] - best_beta), 2e-3)
          << (constraint == spemix::BetaConstraint::Equal ? "equal" : "varying");
    }
  }
}

TEST(UpdateBeta, MonotoneObjectiveSaturatesAtCap) {
  MixtureModel model;
  model.spec = {Structure::EII, spemix::BetaConstraint::Equal};
  model.pi = VectorXd::Ones(1);
  ComponentParams c;
  c.mu = VectorXd::Zero(2);
  c.scale = spemix::ScaleDecomposition::identity(2);
  c.beta = 1.0;
  c.eta = VectorXd::Zero(2);
  model.components = {c};
  spemix::Rng rng(721);
  MatrixXd data(30, 2);
  for (int i = 0; i < 30; ++i) {
    VectorXd row = testsup::random_gaussian_vector(2, rng);
    data.row(i) = 0.4 * row.transpose() / std::max(1.0, row.norm());
  }
  Responsibilities resp = spemix::e_step(data, model);
  std::vector<double> betas = spemix::update_beta(data, resp, model);
  EXPECT_DOUBLE_EQ(betas[0], 20.0);
}

TEST(UpdateBeta, RecoversGaussianTailOnLargeSample) {
  spemix::Rng rng(722);
  MatrixXd data(5000, 2);
  for (int i = 0; i < 5000; ++i) {
    data(i, 0) = rng.normal();
    data(i, 1) = rng.normal();
  }
  MixtureModel model;
  model.spec = {Structure::VVV, spemix::BetaConstraint::Varying};
  model.pi = VectorXd::Ones(1);
  ComponentParams c;
  c.mu = VectorXd::Zero(2);
  c.scale = spemix::ScaleDecomposition::identity(2);
  c.beta = 0.5;
  c.eta = VectorXd::Zero(2);
  model.components = {c};
  Responsibilities resp = spemix::e_step(data, model);
  std::vector<double> betas = spemix::update_beta(data, resp, model);
  EXPECT_GT(betas[0], 0.9);
  EXPECT_LT(betas[0], 1.1);
}

TEST(Aitken, FlatTraceConverges) {
  spemix::ConvergenceMonitor monitor;
  monitor.trace = {100.0, 100.0, 100.0};
  EXPECT_TRUE(spemix::aitken_converged(monitor));
}

TEST(Aitken, GeometricTraceConvergesAtTheComputedStep) {
  spemix::ConvergenceMonitor monitor;
  // l_k = -10 * 0.5^k has ratio 1/2 and asymptote 0; the projected gap
  // 10 * 0.5^k first drops below 0.005 at k = 11
  for (int k = 0; k <= 10; ++k) {
    monitor.push(-10.0 * std::pow(0.5, k));
    EXPECT_FALSE(spemix::aitken_converged(monitor)) << "k=" << k;
  }
  monitor.push(-10.0 * std::pow(0.5, 11));
  EXPECT_TRUE(spemix::aitken_converged(monitor));
  EXPECT_NEAR(monitor.ratio, 0.5, 1e-12);
  EXPECT_NEAR(monitor.asymptote, 0.0, 1e-12);
}

TEST(Aitken, GrowingGapsNeverConverge) {
  spemix::ConvergenceMonitor monitor;
  monitor.trace = {0.0, 1.0, 3.0};  // ratio 2 >= 1
  EXPECT_FALSE(spemix::aitken_converged(monitor));
  monitor.trace = {0.0, 1.0, 2.0};  // ratio exactly 1
  EXPECT_FALSE(spemix::aitken_converged(monitor));
}

TEST(Aitken, ZeroDenominatorUsesSuccessiveDifference) {
  spemix::ConvergenceMonitor monitor;
  monitor.trace = {100.0, 100.0, 100.001};
  EXPECT_TRUE(spemix::aitken_converged(monitor));
  monitor.trace = {100.0, 100.0, 100.1};
  EXPECT_FALSE(spemix::aitken_converged(monitor));
}

TEST(Aitken, NeedsThreeEntries) {
  spemix::ConvergenceMonitor monitor;
  monitor.trace = {1.0, 2.0};
  EXPECT_FALSE(spemix::aitken_converged(monitor));
}

MatrixXd two_blob_data(int n, double separation, spemix::Rng& rng) {
  MatrixXd data(n, 2);
  for (int i = 0; i < n; ++i) {
    data(i, 0) = (i % 2 == 0 ? 0.0 : separation) + rng.normal();
    data(i, 1) = rng.normal();
  }
  return data;
}

TEST(Fit, SeparatedGaussiansRecoveredAndDeterministic) {
  spemix::Rng rng(731);
  MatrixXd data = two_blob_data(300, 8.0, rng);
  std::vector<int> truth(300);
  for (int i = 0; i < 300; ++i) truth[i] = i % 2;

  spemix::FitOptions options;
  options.seed = 7;
  ModelSpec spec{Structure::VVV, spemix::BetaConstraint::Varying};
  spemix::FitResult first = spemix::fit(data, spec, 2, options);
  ASSERT_FALSE(first.failed) << first.failure_reason;
  EXPECT_TRUE(first.converged);
  EXPECT_GT(spemix::adjusted_rand_index(first.hard_labels, truth), 0.95);

  spemix::FitResult second = spemix::fit(data, spec, 2, options);
  EXPECT_EQ(first.loglik, second.loglik);
  EXPECT_EQ(first.iterations, second.iterations);
  EXPECT_EQ(first.trace, second.trace);
  for (int g = 0; g < 2; ++g) {
    EXPECT_EQ(first.model.components[g].mu, second.model.components[g].mu);
    EXPECT_EQ(first.model.components[g].beta, second.model.components[g].beta);
    EXPECT_EQ(first.model.components[g].eta, second.model.components[g].eta);
  }
}

TEST(Fit, TraceNonDecreasingAcrossSpecsAndSizes) {
  const std::vector<ModelSpec> specs = {
      {Structure::EII, spemix::BetaConstraint::Equal},
      {Structure::VVI, spemix::BetaConstraint::Varying},
      {Structure::EEE, spemix::BetaConstraint::Varying},
      {Structure::EEV, spemix::BetaConstraint::Equal},
      {Structure::VVE, spemix::BetaConstraint::Varying},
      {Structure::VVV, spemix::BetaConstraint::Varying}};
  int seed = 741;
  for (const ModelSpec& spec : specs) {
    for (int G = 1; G <= 2; ++G) {
      spemix::Rng rng(seed++);
      MatrixXd data = testsup::random_gaussian_matrix(90, 3, rng) * 1.2;
      spemix::FitOptions options;
      options.seed = seed;
      options.max_iterations = 60;
      spemix::FitResult result = spemix::fit(data, spec, G, options);
      ASSERT_GE(result.trace.size(), 2u) << spemix::model_spec_name(spec);
      for (std::size_t k = 1; k < result.trace.size(); ++k)
        EXPECT_GE(result.trace[k], result.trace[k - 1] - 1e-8)
            << spemix::model_spec_name(spec) << " G=" << G << " step " << k;
    }
  }
}

TEST(Fit, FullyLabeledMatchesManualPipeline) {
  spemix::Rng rng(751);
  MatrixXd data = two_blob_data(60, 6.0, rng);
  std::vector<int> labels(60);
  for (int i = 0; i < 60; ++i) labels[i] = i % 2;
  ModelSpec spec{Structure::VVV, spemix::BetaConstraint::Varying};
  spemix::FitOptions options;
  options.seed = 3;
  spemix::FitResult result = spemix::fit(data, spec, 2, options, labels);
  ASSERT_FALSE(result.failed) << result.failure_reason;

  // same updates, driven by hand from the same starting point
  MixtureModel model = spemix::init_params(data, labels, spec, 2);
  spemix::ConvergenceMonitor monitor;
  spemix::EStepResult e = spemix::e_step_full(data, model, labels);
  monitor.push(e.loglik);
  for (int iter = 1; iter <= options.max_iterations; ++iter) {
    spemix::gem_detail::m_step_sweep(data, model, e.resp, false);
    e = spemix::e_step_full(data, model, labels);
    monitor.push(e.loglik);
    if (spemix::aitken_converged(monitor)) break;
  }
  EXPECT_EQ(result.loglik, e.loglik);
  for (int g = 0; g < 2; ++g) {
    EXPECT_EQ(result.model.components[g].mu, model.components[g].mu);
    EXPECT_EQ(result.model.components[g].beta, model.components[g].beta);
  }
  // every row stayed frozen at its label
  for (int i = 0; i < 60; ++i)
    EXPECT_DOUBLE_EQ(result.resp.z(i, labels[i]), 1.0);
}

TEST(Fit, WarmStartingSkewedFromSymmetricNeverLosesLikelihood) {
  spemix::Rng rng(761);
  spemix::SpeParams truth;
  truth.mu = VectorXd::Zero(2);
  truth.sigma = MatrixXd::Identity(2, 2);
  truth.beta = 1.0;
  truth.psi = VectorXd::Zero(2);
  truth.psi << 3.0, -1.0;
  MatrixXd data = spemix::sample_mspe_rejection(250, truth, 41);

  ModelSpec spec{Structure::VVV, spemix::BetaConstraint::Varying};
  spemix::FitOptions symmetric;
  symmetric.seed = 5;
  symmetric.fix_skew = true;
  spemix::FitResult base = spemix::fit(data, spec, 1, symmetric);
  ASSERT_FALSE(base.failed);
  ASSERT_TRUE(base.converged);
  EXPECT_LT(base.model.components[0].eta.norm(), 1e-15);

  spemix::FitOptions skewed;
  skewed.seed = 5;
  spemix::FitResult refined = spemix::fit_from(data, base.model, skewed);
  ASSERT_FALSE(refined.failed);
  EXPECT_NEAR(refined.trace.front(), base.loglik, 1e-9);
  EXPECT_GE(refined.loglik, base.loglik - 1e-8);
  for (std::size_t k = 1; k < refined.trace.size(); ++k)
    EXPECT_GE(refined.trace[k], refined.trace[k - 1] - 1e-8);
}

TEST(Fit, DegenerateComponentFlagsFailureInsteadOfThrowing) {
  MatrixXd data(8, 3);
  data << 0.0, 0.1, 0.0,
          0.1, 0.0, 0.1,
          0.2, 0.1, 0.0,
          0.1, 0.2, 0.1,
          0.0, 0.0, 0.2,
          0.2, 0.2, 0.1,
          50.0, 50.0, 50.0,
          50.1, 50.0, 50.1;
  ModelSpec spec{Structure::VVV, spemix::BetaConstraint::Varying};
  spemix::FitOptions options;
  options.seed = 11;
  spemix::FitResult result = spemix::fit(data, spec, 2, options);
  EXPECT_TRUE(result.failed);
  EXPECT_FALSE(result.converged);
  EXPECT_NE(result.failure_reason.find("fewer than"), std::string::npos);
}

TEST(Fit, ReportedCriteriaAreRecomputable) {
  spemix::Rng rng(771);
  MatrixXd data = two_blob_data(120, 7.0, rng);
  ModelSpec spec{Structure::EEE, spemix::BetaConstraint::Equal};
  spemix::FitOptions options;
  options.seed = 2;
  spemix::FitResult result = spemix::fit(data, spec, 2, options);
  ASSERT_FALSE(result.failed);
  EXPECT_EQ(result.free_params, spemix::free_param_count(spec, 2, 2));
  EXPECT_DOUBLE_EQ(result.bic_value,
                   spemix::bic(result.loglik, result.free_params, 120));
  EXPECT_DOUBLE_EQ(result.icl_value,
                   spemix::icl(result.bic_value, result.resp.z));
  EXPECT_LE(result.icl_value, result.bic_value + 1e-12);
}

TEST(Fit, RecoversSingleSkewedComponentAtLargeN) {
  spemix::SpeParams truth;
  truth.mu = VectorXd::Zero(2);
  truth.mu << 1.0, -2.0;
  truth.sigma = MatrixXd::Zero(2, 2);
  truth.sigma << 2.0, 0.5, 0.5, 1.0;
  truth.beta = 0.85;
  truth.psi = VectorXd::Zero(2);
  truth.psi << -3.0, 2.0;
  const int n = 5000;
  MatrixXd data = spemix::sample_mspe_rejection(n, truth, 29);

  ModelSpec spec{Structure::VVV, spemix::BetaConstraint::Varying};
  spemix::FitOptions options;
  options.seed = 1;
  options.max_iterations = 2000;
  spemix::FitResult result = spemix::fit(data, spec, 1, options);
  ASSERT_FALSE(result.failed) << result.failure_reason;
  ASSERT_TRUE(result.converged);

  const ComponentParams& c = result.model.components[0];
  for (int j = 0; j < 2; ++j) {
    double sd = std::sqrt(
        (data.col(j).array() - data.col(j).mean()).square().sum() / (n - 1));
    EXPECT_NEAR(c.mu[j], truth.mu[j], 3.0 * sd / std::sqrt(double(n)))
        << "coordinate " << j;
  }
  EXPECT_NEAR(c.beta, truth.beta, 0.15);
  MatrixXd sigma_hat = c.sigma();
  EXPECT_LT((sigma_hat - truth.sigma).norm() / truth.sigma.norm(), 0.2);
  VectorXd psi_hat = c.psi();
  EXPECT_LT((psi_hat - truth.psi).norm() / truth.psi.norm(), 0.35);
}

TEST(Predict, SeparatedModelAndTieBreak) {
  MixtureModel model;
  model.spec = {Structure::EII, spemix::BetaConstraint::Equal};
  model.pi = VectorXd::Constant(2, 0.5);
  for (int g = 0; g < 2; ++g) {
    ComponentParams c;
    c.mu = VectorXd::Zero(2);
    c.mu[0] = g == 0 ? -4.0 : 4.0;
    c.scale = spemix::ScaleDecomposition::identity(2);
    c.beta = 1.0;
    c.eta = VectorXd::Zero(2);
    model.components.push_back(c);
  }
  VectorXd at_first = model.components[0].mu;
  spemix::Prediction pred = spemix::predict(model, at_first);
  EXPECT_EQ(pred.label, 0);
  EXPECT_NEAR(pred.responsibilities.sum(), 1.0, 1e-12);
  EXPECT_GT(pred.responsibilities[0], 0.99);

  VectorXd equidistant = VectorXd::Zero(2);
  equidistant[1] = 1.3;
  spemix::Prediction tie = spemix::predict(model, equidistant);
  EXPECT_EQ(tie.label, 0);
  EXPECT_DOUBLE_EQ(tie.responsibilities[0], 0.5);
}

}  // namespace
