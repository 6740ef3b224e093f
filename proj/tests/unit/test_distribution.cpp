#include "spemix/distribution.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "spemix/special.hpp"
#include "../common/support.hpp"

using Eigen::MatrixXd;
using Eigen::VectorXd;
using spemix::Rng;
using spemix::SpeParams;

namespace {

VectorXd vec3(double a, double b, double c) {
  VectorXd v(3);
  v << a, b, c;
  return v;
}

SpeParams frozen_case_a() {
  SpeParams params;
  params.mu = vec3(0.5, 0.0, 1.0);
  params.sigma = MatrixXd(3, 3);
  params.sigma << 2.0, 0.5, 0.3, 0.5, 1.5, 0.2, 0.3, 0.2, 1.0;
  params.beta = 0.85;
  params.psi = vec3(1.0, -2.0, 0.5);
  return params;
}

TEST(MpeDensity, GaussianAndLaplaceNormalizers) {
  VectorXd zero2 = VectorXd::Zero(2);
  EXPECT_NEAR(spemix::log_density_mpe(zero2, zero2, MatrixXd::Identity(2, 2), 1.0),
              -std::log(2.0 * spemix::kPi), 1e-13);
  VectorXd zero1 = VectorXd::Zero(1);
  EXPECT_NEAR(spemix::log_density_mpe(zero1, zero1, MatrixXd::Identity(1, 1), 0.5),
              std::log(0.25), 1e-13);
}

TEST(MpeDensity, FrozenHighPrecisionValue) {
  SpeParams params = frozen_case_a();
  VectorXd x = vec3(0.7, -1.2, 2.0);
  double lp = spemix::log_density_mpe(x, params.mu, params.sigma, params.beta);
  EXPECT_NEAR(lp, -4.672322109083016038216, 1e-12);
}

TEST(MpeDensity, EllipticalContours) {
  Rng rng(21);
  MatrixXd sigma = testsup::random_spd(3, rng);
  VectorXd mu = testsup::random_gaussian_vector(3, rng);
  spemix::SpdCache cache(sigma);
  // two points with the same Mahalanobis distance have the same density
  VectorXd dir1 = cache.sqrt() * vec3(1.0, 0.0, 0.0);
  VectorXd dir2 = cache.sqrt() * vec3(0.0, -1.0, 0.0);
  double r = 1.37;
  double l1 = spemix::log_density_mpe(mu + r * dir1, mu, sigma, 0.8);
  double l2 = spemix::log_density_mpe(mu + r * dir2, mu, sigma, 0.8);
  EXPECT_NEAR(l1, l2, 1e-10);
}

TEST(MspeDensity, ZeroSkewReducesToMpeExactly) {
  SpeParams params = frozen_case_a();
  params.psi = VectorXd::Zero(3);
  VectorXd x = vec3(0.7, -1.2, 2.0);
  double skewed = spemix::log_density_mspe(x, params);
  double plain = spemix::log_density_mpe(x, params.mu, params.sigma, params.beta);
  EXPECT_DOUBLE_EQ(skewed, plain);
}

TEST(MspeDensity, FrozenHighPrecisionValue) {
  SpeParams params = frozen_case_a();
  VectorXd x = vec3(0.7, -1.2, 2.0);
  EXPECT_NEAR(spemix::log_density_mspe(x, params), -3.980866054961013078957,
              1e-12);
}

TEST(MspeDensity, ReflectionWithFlippedSkewIsExactlyInvariant) {
  SpeParams params = frozen_case_a();
  Rng rng(22);
  for (int trial = 0; trial < 50; ++trial) {
    VectorXd x = params.mu + 2.0 * testsup::random_gaussian_vector(3, rng);
    SpeParams flipped = params;
    flipped.psi = -params.psi;
    VectorXd reflected = 2.0 * params.mu - x;
    EXPECT_NEAR(spemix::log_density_mspe(x, params),
                spemix::log_density_mspe(reflected, flipped), 1e-13);
  }
}

TEST(MspeDensity, ReflectionProductIdentity) {
  // log f(x; psi) + log f(2mu-x; psi)
  //   = 2 log g(x) + 2 log 2 + log Phi(s) + log Phi(-s)
  SpeParams params = frozen_case_a();
  spemix::SpdCache cache(params.sigma);
  Rng rng(23);
  for (int trial = 0; trial < 50; ++trial) {
    VectorXd x = params.mu + 2.0 * testsup::random_gaussian_vector(3, rng);
    VectorXd reflected = 2.0 * params.mu - x;
    double lhs = spemix::log_density_mspe(x, params) +
                 spemix::log_density_mspe(reflected, params);
    double g = spemix::log_density_mpe(x, params.mu, params.sigma, params.beta);
    double s = params.psi.dot(cache.inv_sqrt() * (x - params.mu));
    double rhs = 2.0 * g + 2.0 * spemix::kLn2 + spemix::log_cdf_normal(s) +
                 spemix::log_cdf_normal(-s);
    EXPECT_NEAR(lhs, rhs, 1e-10);
  }
}

TEST(MspeDensity, SkewNormalReductionAtBetaOne) {
  // at beta = 1 the density is 2 phi_p(x; mu, sigma) Phi(psi' sigma^{-1/2} (x-mu));
  // reference computed with Eigen's own solver machinery, not the library's
  Rng rng(24);
  int p = 3;
  MatrixXd sigma = testsup::random_spd(p, rng);
  VectorXd mu = testsup::random_gaussian_vector(p, rng);
  VectorXd psi = 2.0 * testsup::random_gaussian_vector(p, rng);
  SpeParams params{mu, sigma, 1.0, psi};

  Eigen::LLT<MatrixXd> llt(sigma);
  double log_det = 2.0 * MatrixXd(llt.matrixL()).diagonal().array().log().sum();
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(sigma);
  MatrixXd inv_sqrt_ref = es.operatorInverseSqrt();

  for (int trial = 0; trial < 1000; ++trial) {
    VectorXd x = mu + 3.0 * testsup::random_gaussian_vector(p, rng);
    VectorXd diff = x - mu;
    double delta = diff.dot(llt.solve(diff));
    double s = psi.dot(inv_sqrt_ref * diff);
    double reference = std::log(2.0) - 0.5 * p * spemix::kLogTwoPi -
                       0.5 * log_det - 0.5 * delta + spemix::log_cdf_normal(s);
    double actual = spemix::log_density_mspe(x, params);
    ASSERT_NEAR(actual, reference, 1e-12 * std::max(1.0, std::fabs(reference)));
  }
}

TEST(MspeDensity, QuadratureNormalizationTwoDim) {
  // tensor-grid integration of the density for three (beta, psi) settings
  struct Case {
    double beta;
    double psi1, psi2;
  };
  std::vector<Case> cases = {{0.7, 2.0, -1.0}, {1.0, 3.0, 5.0}, {2.0, 1.0, 0.0}};
  MatrixXd sigma(2, 2);
  sigma << 1.3, 0.4, 0.4, 0.9;
  VectorXd mu(2);
  mu << 0.4, -0.7;
  for (const Case& c : cases) {
    VectorXd psi(2);
    psi << c.psi1, c.psi2;
    SpeParams params{mu, sigma, c.beta, psi};
    spemix::SpdCache cache(params.sigma);
    const double h = 0.04;
    const double lim = 18.0;
    double total = 0.0;
    // midpoint rule, inlined density to keep a million evaluations cheap
    const double log_norm = spemix::log_mpe_normalizer(2, c.beta) -
                            0.5 * cache.log_det() + spemix::kLn2;
    for (double x1 = -lim + h / 2; x1 < lim; x1 += h) {
      for (double x2 = -lim + h / 2; x2 < lim; x2 += h) {
        VectorXd x(2);
        x << mu[0] + x1, mu[1] + x2;
        VectorXd diff = x - mu;
        double delta = diff.dot(cache.inverse() * diff);
        double s = psi.dot(cache.inv_sqrt() * diff);
        total += std::exp(log_norm - 0.5 * std::pow(delta, c.beta) +
                          spemix::log_cdf_normal(s));
      }
    }
    total *= h * h;
    EXPECT_NEAR(total, 1.0, 1e-3) << "beta=" << c.beta;
  }
}

TEST(MpeSampler, GaussianCaseMomentsAndDeterminism) {
  Rng seeder(25);
  int p = 3;
  MatrixXd sigma = testsup::random_spd(p, seeder);
  VectorXd mu = vec3(1.0, -2.0, 0.5);
  const int n = 50000;
  MatrixXd sample = spemix::sample_mpe(n, mu, sigma, 1.0, 777);

  VectorXd mean = sample.colwise().mean();
  MatrixXd centered = sample.rowwise() - mean.transpose();
  MatrixXd cov = centered.transpose() * centered / (n - 1);
  EXPECT_LT((cov - sigma).norm() / sigma.norm(), 0.05);
  for (int j = 0; j < p; ++j) {
    double se = std::sqrt(sigma(j, j) / n);
    EXPECT_NEAR(mean[j], mu[j], 5.0 * se);
  }
  MatrixXd again = spemix::sample_mpe(n, mu, sigma, 1.0, 777);
  EXPECT_EQ((sample - again).cwiseAbs().maxCoeff(), 0.0);
}

TEST(MpeSampler, MahalanobisPowerIsGammaDistributed) {
  Rng seeder(26);
  for (double beta : {0.6, 1.0, 2.0}) {
    int p = 3;
    MatrixXd sigma = testsup::random_spd(p, seeder);
    VectorXd mu = vec3(0.3, 0.0, -1.0);
    const int n = 20000;
    MatrixXd sample = spemix::sample_mpe(n, mu, sigma, beta, 4242);
    spemix::SpdCache cache(sigma);
    VectorXd deltas = spemix::mahalanobis_rows(sample, mu, cache.inverse());
    std::vector<double> powered(n);
    for (int i = 0; i < n; ++i) powered[i] = std::pow(deltas[i], beta);
    double shape = 0.5 * p / beta;
    double d = testsup::ks_statistic_one_sample(powered, [&](double v) {
      return spemix::gamma_cdf_lower(shape, v / 2.0);
    });
    EXPECT_LT(d, testsup::ks_crit_one_sample_01(n)) << "beta=" << beta;
  }
}

TEST(RejectionSampler, AcceptanceRateIsOneHalf) {
  SpeParams params = frozen_case_a();
  std::uint64_t proposals = 0;
  const int n = 50000;
  MatrixXd sample = spemix::sample_mspe_rejection(n, params, 99, &proposals);
  EXPECT_GE(proposals, static_cast<std::uint64_t>(n));
  double rate = static_cast<double>(n) / static_cast<double>(proposals);
  EXPECT_NEAR(rate, 0.5, 0.01);
  EXPECT_EQ(sample.rows(), n);
}

TEST(RejectionSampler, ZeroSkewMatchesMpeSampler) {
  SpeParams params = frozen_case_a();
  params.psi = VectorXd::Zero(3);
  const int n = 20000;
  MatrixXd skewed = spemix::sample_mspe_rejection(n, params, 31);
  MatrixXd plain = spemix::sample_mpe(n, params.mu, params.sigma, params.beta, 32);
  for (int j = 0; j < 3; ++j) {
    std::vector<double> a(n), b(n);
    for (int i = 0; i < n; ++i) {
      a[i] = skewed(i, j);
      b[i] = plain(i, j);
    }
    double d = testsup::ks_statistic_two_sample(a, b);
    EXPECT_LT(d, testsup::ks_crit_two_sample_01(n, n)) << "coordinate " << j;
  }
}

TEST(RejectionSampler, OneDimensionalDensityOverlay) {
  SpeParams params;
  params.mu = VectorXd::Constant(1, 0.3);
  params.sigma = MatrixXd::Constant(1, 1, 1.5);
  params.beta = 0.8;
  params.psi = VectorXd::Constant(1, 2.0);
  const int n = 20000;
  MatrixXd sample = spemix::sample_mspe_rejection(n, params, 55);

  // numeric CDF of the target on a fine grid
  const double lo = -40.0, hi = 40.0, h = 0.002;
  const int cells = static_cast<int>((hi - lo) / h);
  std::vector<double> grid_x(cells + 1), grid_cdf(cells + 1, 0.0);
  std::vector<double> pdf(cells + 1);
  for (int k = 0; k <= cells; ++k) {
    grid_x[k] = lo + k * h;
    VectorXd x = VectorXd::Constant(1, grid_x[k]);
    pdf[k] = std::exp(spemix::log_density_mspe(x, params));
  }
  for (int k = 1; k <= cells; ++k)
    grid_cdf[k] = grid_cdf[k - 1] + 0.5 * h * (pdf[k - 1] + pdf[k]);
  double total = grid_cdf[cells];
  ASSERT_NEAR(total, 1.0, 1e-4);

  std::vector<double> xs(n);
  for (int i = 0; i < n; ++i) xs[i] = sample(i, 0);
  double d = testsup::ks_statistic_one_sample(xs, [&](double v) {
    if (v <= lo) return 0.0;
    if (v >= hi) return 1.0;
    int k = static_cast<int>((v - lo) / h);
    double frac = (v - grid_x[k]) / h;
    return (grid_cdf[k] + frac * (grid_cdf[k + 1] - grid_cdf[k])) / total;
  });
  EXPECT_LT(d, testsup::ks_crit_one_sample_01(n));
}

TEST(MhSampler, DeterministicAndSymmetricWhenUnskewed) {
  SpeParams params = frozen_case_a();
  params.psi = VectorXd::Zero(3);
  const int n = 20000;
  MatrixXd a = spemix::sample_mspe_mh(n, params, 404);
  MatrixXd b = spemix::sample_mspe_mh(n, params, 404);
  EXPECT_EQ((a - b).cwiseAbs().maxCoeff(), 0.0);

  for (int j = 0; j < 3; ++j) {
    std::vector<double> col(n);
    for (int i = 0; i < n; ++i) col[i] = a(i, j) - params.mu[j];
    double skew = testsup::sample_skewness(col);
    double se = std::sqrt(6.0 / n);
    // MH draws are mildly dependent, allow a generous multiple
    EXPECT_LT(std::fabs(skew), 8.0 * se) << "coordinate " << j;
  }
}

TEST(MhSampler, AgreesWithRejectionSamplerPerCoordinate) {
  SpeParams params = frozen_case_a();
  const int n = 20000;
  MatrixXd mh = spemix::sample_mspe_mh(n, params, 515);
  MatrixXd rej = spemix::sample_mspe_rejection(n, params, 616);
  for (int j = 0; j < 3; ++j) {
    std::vector<double> a(n), b(n);
    for (int i = 0; i < n; ++i) {
      a[i] = mh(i, j);
      b[i] = rej(i, j);
    }
    double d = testsup::ks_statistic_two_sample(a, b);
    EXPECT_LT(d, testsup::ks_crit_two_sample_01(n, n)) << "coordinate " << j;
  }
}

TEST(SpeParams, ValidationCatchesBadInputs) {
  SpeParams params = frozen_case_a();
  params.beta = 0.0;
  EXPECT_THROW(params.validate(), spemix::ValidationError);
  params.beta = 25.0;
  EXPECT_THROW(params.validate(), spemix::ValidationError);
  params = frozen_case_a();
  params.psi = VectorXd::Zero(2);
  EXPECT_THROW(params.validate(), spemix::ValidationError);
  params = frozen_case_a();
  params.sigma(0, 1) = 0.9;  // break symmetry
  EXPECT_THROW(params.validate(), spemix::ValidationError);
}

}  // namespace
