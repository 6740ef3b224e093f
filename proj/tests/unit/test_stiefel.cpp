#include "spemix/stiefel.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "../common/support.hpp"

using Eigen::MatrixXd;
using spemix::Rng;

namespace {

TEST(ProjectTangent, VanishesWhenQtGIsSymmetric) {
  Rng rng(1);
  MatrixXd q = testsup::random_orthogonal(4, rng);
  // g = q gives q'g = I, symmetric, so the skew projection is zero
  MatrixXd d = spemix::project_tangent(q, q);
  EXPECT_LT(d.cwiseAbs().maxCoeff(), 1e-14);
}

TEST(ProjectTangent, OutputIsTangent) {
  Rng rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    MatrixXd q = testsup::random_orthogonal(4, rng);
    MatrixXd g = testsup::random_gaussian_matrix(4, 4, rng);
    MatrixXd d = spemix::project_tangent(q, g);
    MatrixXd qtd = q.transpose() * d;
    EXPECT_LT((qtd + qtd.transpose()).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(ProjectTangent, DirectionalDerivativeMatchesFiniteDifference) {
  Rng rng(3);
  const int p = 4;
  MatrixXd a = testsup::random_gaussian_matrix(p, p, rng);
  MatrixXd b = testsup::random_spd(p, rng);
  MatrixXd c = testsup::random_spd(p, rng);
  auto value = [&](const MatrixXd& q) {
    return (a.transpose() * q).trace() + (q.transpose() * b * q * c).trace();
  };
  auto gradient = [&](const MatrixXd& q) -> MatrixXd {
    return a + 2.0 * b * q * c;
  };

  for (int trial = 0; trial < 10; ++trial) {
    MatrixXd q = testsup::random_orthogonal(p, rng);
    MatrixXd d = spemix::project_tangent(q, gradient(q));
    double analytic = d.squaredNorm();  // <grad, proj(grad)> = ||proj||^2
    const double t = 1e-6;
    double fd = (value(spemix::qr_retraction(q, t * d)) -
                 value(spemix::qr_retraction(q, -t * d))) /
                (2.0 * t);
    ASSERT_GT(analytic, 1e-8);
    EXPECT_NEAR(fd / analytic, 1.0, 1e-5);
  }
}

TEST(QrRetraction, ZeroStepReturnsExactInput) {
  Rng rng(4);
  MatrixXd q = testsup::random_orthogonal(5, rng);
  MatrixXd out = spemix::qr_retraction(q, MatrixXd::Zero(5, 5));
  EXPECT_EQ((out - q).cwiseAbs().maxCoeff(), 0.0);
}

TEST(QrRetraction, OutputOrthogonal) {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    MatrixXd q = testsup::random_orthogonal(4, rng);
    MatrixXd step = testsup::random_gaussian_matrix(4, 4, rng);
    MatrixXd out = spemix::qr_retraction(q, step);
    MatrixXd gram = out.transpose() * out;
    EXPECT_LT((gram - MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(QrRetraction, FirstOrderAgreement) {
  Rng rng(6);
  MatrixXd q = testsup::random_orthogonal(4, rng);
  MatrixXd g = testsup::random_gaussian_matrix(4, 4, rng);
  MatrixXd xi = spemix::project_tangent(q, g);
  double err_2 = (spemix::qr_retraction(q, 1e-2 * xi) - (q + 1e-2 * xi)).norm();
  double err_3 = (spemix::qr_retraction(q, 1e-3 * xi) - (q + 1e-3 * xi)).norm();
  // second-order remainder: shrinking t by 10 shrinks the error by ~100
  EXPECT_LT(err_3, err_2 / 50.0);
  EXPECT_LT(err_2, 1e-2);
}

TEST(Maximize, LinearObjectiveReachesPolarFactor) {
  Rng rng(7);
  const int p = 4;
  MatrixXd a = testsup::random_gaussian_matrix(p, p, rng);
  Eigen::JacobiSVD<MatrixXd> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
  MatrixXd polar = svd.matrixU() * svd.matrixV().transpose();
  double best = svd.singularValues().sum();

  spemix::LineSearchConfig config;
  config.max_iterations = 1000;
  config.gradient_tol = 1e-10;
  auto value = [&](const MatrixXd& q) { return (a.transpose() * q).trace(); };
  auto gradient = [&](const MatrixXd&) { return a; };
  spemix::StiefelResult result =
      spemix::maximize(value, gradient, testsup::random_orthogonal(p, rng), config);

  EXPECT_NEAR(result.value / best, 1.0, 1e-6);
  EXPECT_LT((result.q - polar).cwiseAbs().maxCoeff(), 1e-4);
  spemix::check_stiefel(result.q, "test");
}

TEST(Maximize, AlreadyOptimalReturnsImmediately) {
  Rng rng(8);
  const int p = 3;
  MatrixXd a = testsup::random_gaussian_matrix(p, p, rng);
  Eigen::JacobiSVD<MatrixXd> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
  MatrixXd polar = svd.matrixU() * svd.matrixV().transpose();
  auto value = [&](const MatrixXd& q) { return (a.transpose() * q).trace(); };
  auto gradient = [&](const MatrixXd&) { return a; };
  spemix::LineSearchConfig config;
  config.gradient_tol = 1e-6;
  spemix::StiefelResult result = spemix::maximize(value, gradient, polar, config);
  EXPECT_LE(result.iterations, 1);
  EXPECT_LT((result.q - polar).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Maximize, MonotoneIteratesAllOrthogonal) {
  Rng rng(9);
  for (int trial = 0; trial < 5; ++trial) {
    const int p = 4;
    MatrixXd a = testsup::random_gaussian_matrix(p, p, rng);
    MatrixXd b = testsup::random_spd(p, rng);
    MatrixXd c = testsup::random_spd(p, rng);
    auto value = [&](const MatrixXd& q) {
      return (a.transpose() * q).trace() + (q.transpose() * b * q * c).trace();
    };
    auto gradient = [&](const MatrixXd& q) -> MatrixXd {
      return a + 2.0 * b * q * c;
    };

    std::vector<double> trace;
    spemix::LineSearchConfig config;
    config.max_iterations = 200;
    config.observer = [&](const MatrixXd& q, double v) {
      spemix::check_stiefel(q, "observer");
      trace.push_back(v);
    };
    MatrixXd q0 = testsup::random_orthogonal(p, rng);
    spemix::StiefelResult result = spemix::maximize(value, gradient, q0, config);

    ASSERT_GE(trace.size(), 1u);
    EXPECT_GE(trace.front(), value(q0) - 1e-12);
    for (std::size_t k = 1; k < trace.size(); ++k)
      EXPECT_GE(trace[k], trace[k - 1] - 1e-12);
    EXPECT_GE(result.value, value(q0));
  }
}

TEST(Maximize, RejectsBadConfigAndNonOrthogonalStart) {
  auto value = [](const MatrixXd&) { return 0.0; };
  auto gradient = [](const MatrixXd& q) { return MatrixXd::Zero(q.rows(), q.cols()).eval(); };
  spemix::LineSearchConfig bad;
  bad.backtracking = 1.5;
  EXPECT_THROW(spemix::maximize(value, gradient, MatrixXd::Identity(3, 3), bad),
               spemix::ValidationError);
  MatrixXd skewed = MatrixXd::Identity(3, 3);
  skewed(0, 1) = 0.2;
  EXPECT_THROW(spemix::maximize(value, gradient, skewed, {}),
               spemix::ValidationError);
}

}  // namespace
