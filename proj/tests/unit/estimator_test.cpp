#include <gtest/gtest.h>

#include <random>

#include "test_support.hpp"

using namespace panelardl;
using testing_support::plain_design;

namespace {

FitOptions no_absorb() {
  FitOptions o;
  o.absorbed_effects = false;
  return o;
}

}  // namespace

TEST(FitOls, ColumnEqualToResponse) {
  Eigen::VectorXd y(6);
  y << 0.3, -1.2, 2.0, 0.7, 1.1, -0.4;
  const FitResult fit = fit_ols(plain_design(y, y), VcovKind::Classical, no_absorb());
  EXPECT_NEAR(fit.coefficients(0), 1.0, 1e-14);
  EXPECT_NEAR(fit.ssr, 0.0, 1e-25);
}

TEST(FitOls, HandSolvedBivariate) {
  Eigen::MatrixXd X(5, 2);
  X << 1, 1, 1, 2, 1, 3, 1, 4, 1, 5;
  Eigen::VectorXd y(5);
  y << 2, 4, 5, 4, 5;
  // slope = Sxy/Sxx = 6/10, intercept = ybar - slope*xbar = 4 - 1.8
  const FitResult fit = fit_ols(plain_design(X, y), VcovKind::Classical, no_absorb());
  EXPECT_NEAR(fit.coefficients(0), 2.2, 1e-13);
  EXPECT_NEAR(fit.coefficients(1), 0.6, 1e-13);
  // residuals (-0.8, 0.6, 1.0, -0.6, -0.2): SSR 2.4, s^2 = 0.8, var(slope) = s^2/Sxx
  EXPECT_NEAR(fit.ssr, 2.4, 1e-12);
  EXPECT_EQ(fit.dof, 3u);
  EXPECT_NEAR(fit.se("b1"), std::sqrt(0.8 / 10.0), 1e-12);
}

TEST(FitOls, ResidualOrthogonalityAndSsr) {
  std::mt19937_64 rng(1);
  const DesignMatrix dm = absorb_two_way(testing_support::random_design(rng, 10, 12, 4));
  const FitResult fit = fit_ols(dm);
  const Eigen::VectorXd xe = dm.regressors.transpose() * fit.residuals;
  EXPECT_LE(xe.cwiseAbs().maxCoeff() / (dm.regressors.norm() * fit.residuals.norm()), 1e-10);
  EXPECT_NEAR(fit.ssr, fit.residuals.squaredNorm(), 1e-14 * fit.ssr);
}

TEST(FitOls, DofCountsAbsorbedEffects) {
  std::mt19937_64 rng(2);
  const DesignMatrix dm = absorb_two_way(testing_support::random_design(rng, 8, 10, 2));
  const FitResult fit = fit_ols(dm);
  EXPECT_EQ(fit.dof, fit.nobs - 2 - fit.n_firms - fit.n_quarters + 1);
}

TEST(FitOls, VcovSymmetricPsd) {
  std::mt19937_64 rng(3);
  const DesignMatrix dm = absorb_two_way(testing_support::random_design(rng, 10, 12, 4));
  for (VcovKind k : {VcovKind::Classical, VcovKind::HeteroRobust, VcovKind::ClusterByFirm}) {
    const FitResult fit = fit_ols(dm, k);
    EXPECT_LE((fit.vcov - fit.vcov.transpose()).cwiseAbs().maxCoeff(), 1e-15);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(fit.vcov);
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-10 * std::max(1.0, es.eigenvalues().maxCoeff()));
  }
}

TEST(FitOls, HomoskedasticRobustMatchesClassical) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> z(0.0, 1.0);
  const Eigen::Index n = 10000;
  Eigen::MatrixXd X(n, 3);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    X(i, 0) = 1.0;
    X(i, 1) = z(rng);
    X(i, 2) = z(rng) + 0.3 * X(i, 1);
    y(i) = 0.5 + X(i, 1) - 2.0 * X(i, 2) + z(rng);
  }
  const DesignMatrix dm = plain_design(X, y);
  const FitResult c = fit_ols(dm, VcovKind::Classical, no_absorb());
  const FitResult h = fit_ols(dm, VcovKind::HeteroRobust, no_absorb());
  for (const char* l : {"b0", "b1", "b2"}) {
    const double r = h.se(l) / c.se(l);
    EXPECT_GE(r, 0.8);
    EXPECT_LE(r, 1.2);
  }
}

TEST(FitOls, SingletonClustersEqualHc1) {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> z(0.0, 1.0);
  Eigen::MatrixXd X(50, 2);
  Eigen::VectorXd y(50);
  for (Eigen::Index i = 0; i < 50; ++i) {
    X(i, 0) = z(rng);
    X(i, 1) = z(rng);
    y(i) = X(i, 0) + std::abs(X(i, 1)) * z(rng);
  }
  const DesignMatrix dm = plain_design(X, y);
  const FitResult h = fit_ols(dm, VcovKind::HeteroRobust, no_absorb());
  const FitResult c = fit_ols(dm, VcovKind::ClusterByFirm, no_absorb());
  // both scale the same sandwich by n/(n-k)
  EXPECT_LE((h.vcov - c.vcov).cwiseAbs().maxCoeff(), 1e-12 * h.vcov.cwiseAbs().maxCoeff());
}

TEST(FitOls, RankDeficiencyNamesColumns) {
  Eigen::MatrixXd X(6, 3);
  X << 1, 2, 3, 2, 1, 3, 3, 5, 8, 4, 1, 5, 5, 9, 14, 6, 2, 8;
  Eigen::VectorXd y = Eigen::VectorXd::LinSpaced(6, 0.0, 1.0);
  try {
    fit_ols(plain_design(X, y), VcovKind::Classical, no_absorb());
    FAIL() << "expected an estimation error";
  } catch (const EstimationError& e) {
    EXPECT_NE(std::string(e.what()).find("b"), std::string::npos);
    EXPECT_EQ(e.kind(), ErrorKind::Numerical);
  }
}

TEST(DeltaMethod, IdentityEchoesCoefficient) {
  Eigen::VectorXd b(2);
  b << 0.3, -0.7;
  Eigen::MatrixXd V(2, 2);
  V << 0.04, 0.01, 0.01, 0.09;
  Eigen::VectorXd w = Eigen::VectorXd::Zero(2);
  w(1) = 1.0;
  const DeltaResult r = delta_method(b, V, linear_transform(w));
  EXPECT_DOUBLE_EQ(r.value, -0.7);
  EXPECT_DOUBLE_EQ(r.std_error, 0.3);
}

TEST(DeltaMethod, SumWithIsotropicVariance) {
  const double sigma = 0.25;
  const Eigen::VectorXd b = Eigen::Vector2d(1.0, 2.0);
  const Eigen::MatrixXd V = Eigen::MatrixXd::Identity(2, 2) * sigma * sigma;
  const DeltaResult r = delta_method(b, V, linear_transform(Eigen::Vector2d(1.0, 1.0)));
  EXPECT_DOUBLE_EQ(r.value, 3.0);
  EXPECT_NEAR(r.std_error, sigma * std::sqrt(2.0), 1e-15);
}

TEST(DeltaMethod, LinearEqualsExactVariance) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> z(0.0, 1.0);
  Eigen::MatrixXd A(4, 4);
  for (Eigen::Index i = 0; i < 16; ++i) A(i / 4, i % 4) = z(rng);
  const Eigen::MatrixXd V = A * A.transpose();
  const Eigen::Vector4d w(0.5, -1.0, 2.0, 0.25);
  const Eigen::Vector4d b(1, 2, 3, 4);
  const DeltaResult r = delta_method(b, V, linear_transform(w));
  EXPECT_NEAR(r.std_error * r.std_error, w.dot(V * w), 1e-12 * w.dot(V * w));
}

TEST(DeltaMethod, RatioMatchesFiniteDifferenceDelta) {
  const Eigen::Vector2d b(0.0088, 0.8386);
  Eigen::Matrix2d V = Eigen::Matrix2d::Zero();
  V(0, 0) = 0.0021 * 0.0021;
  V(1, 1) = 0.012 * 0.012;
  const CoefficientTransform g = ratio_transform({0}, {1});
  DeltaOptions opt;
  opt.check_gradient = true;
  const DeltaResult r = delta_method(b, V, g, opt);
  // numeric delta: gradient by central differences
  Eigen::Vector2d grad;
  for (int j = 0; j < 2; ++j) {
    const double h = 1e-7;
    Eigen::Vector2d up = b, dn = b;
    up(j) += h;
    dn(j) -= h;
    grad(j) = (up(0) / (1.0 - up(1)) - dn(0) / (1.0 - dn(1))) / (2.0 * h);
  }
  const double fd_se = std::sqrt(grad.dot(V * grad));
  EXPECT_NEAR(r.value, 0.0088 / (1.0 - 0.8386), 1e-15);
  EXPECT_NEAR(r.std_error / fd_se, 1.0, 1e-6);
}

TEST(DeltaMethod, SingularDenominator) {
  const Eigen::Vector2d b(0.01, 1.0);
  const Eigen::Matrix2d V = Eigen::Matrix2d::Identity();
  EXPECT_THROW(delta_method(b, V, ratio_transform({0}, {1})), SingularityError);
}

TEST(DeltaMethod, WrongGradientDetected) {
  CoefficientTransform g{[](const Eigen::VectorXd& b) { return b(0) * b(0); },
                         [](const Eigen::VectorXd& b) { return Eigen::VectorXd::Constant(1, b(0)); }};
  DeltaOptions opt;
  opt.check_gradient = true;
  EXPECT_THROW(delta_method(Eigen::VectorXd::Constant(1, 2.0), Eigen::MatrixXd::Identity(1, 1), g, opt),
               EstimationError);
}

TEST(DeltaMethod, RandomStationaryPointsGradient) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int rep = 0; rep < 100; ++rep) {
    Eigen::VectorXd b(5);
    b << 0.05 * u(rng), 0.05 * u(rng), 0.05 * u(rng), 0.45 * u(rng), 0.45 * u(rng);
    const CoefficientTransform g = ratio_transform({0, 1, 2}, {3, 4});
    EXPECT_LE(gradient_mismatch(g.gradient(b), finite_difference_gradient(g.value, b)), 1e-5);
  }
}
