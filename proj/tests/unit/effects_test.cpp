#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "test_support.hpp"

using namespace panelardl;

namespace {

const std::vector<double> kBeta = {0.0058, 0.0001, 0.0030};
const std::vector<double> kLambda = {0.8125, 0.0261};

/// Fit with lagged_y and policy:q groups and a diagonal covariance.
FitResult toy_fit(const std::vector<double>& beta, const std::vector<double>& lambda, double sd = 0.001) {
  FitResult f;
  const std::size_t k = beta.size() + lambda.size();
  f.coefficients.resize(static_cast<Eigen::Index>(k));
  std::size_t j = 0;
  for (std::size_t i = 0; i < lambda.size(); ++i, ++j) {
    f.labels.push_back("y_l" + std::to_string(i + 1));
    f.coefficients(static_cast<Eigen::Index>(j)) = lambda[i];
    f.column_groups["lagged_y"].push_back(j);
  }
  for (std::size_t i = 0; i < beta.size(); ++i, ++j) {
    f.labels.push_back("q_x_pi_post_l" + std::to_string(i));
    f.coefficients(static_cast<Eigen::Index>(j)) = beta[i];
    f.column_groups["policy:q"].push_back(j);
  }
  f.vcov = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k)) * sd * sd;
  return f;
}

/// One industry, quarters 1..4, pi known for quarters 1..3.
CapacityPanel window_panel(std::vector<double> pi, std::size_t groups = 1) {
  CapacityPanel c;
  c.t_min = 1;
  c.n_quarters = pi.size() / groups;
  c.n_groups = groups;
  c.pi = std::move(pi);
  return c;
}

ScaledPolicy window_policy() {
  ScaledPolicy q;
  q.name = "q";
  q.q = {{2, 0.8}, {3, 1.0}, {4, 1.2}};
  q.policy_on = {2, 3, 4};
  return q;
}

}  // namespace

TEST(NetShortRun, SumOfBetas) {
  const FitResult f = toy_fit(kBeta, kLambda);
  const DeltaResult r = net_short_run(f, "policy:q");
  EXPECT_NEAR(r.value, 0.0089, 1e-12);
  EXPECT_NEAR(r.std_error, 0.001 * std::sqrt(3.0), 1e-15);
}

TEST(LongRun, PrintedCoefficients) {
  EXPECT_NEAR(long_run_value(0.0088, 0.8386), 0.0545, 0.0002);
  EXPECT_NEAR(long_run_value(0.0088, 0.8386), 0.0088 / 0.1614, 1e-15);
}

TEST(LongRun, NoDynamicsEqualsShortRun) {
  const FitResult f = toy_fit({0.02, 0.01}, {0.0});
  EXPECT_NEAR(long_run(f, "policy:q").value, net_short_run(f, "policy:q").value, 1e-15);
}

TEST(LongRun, ZeroNumerator) {
  const FitResult f = toy_fit({0.02, -0.02}, {0.5});
  EXPECT_NEAR(long_run(f, "policy:q").value, 0.0, 1e-17);
}

TEST(LongRun, Nonstationary) {
  EXPECT_THROW(long_run_value(0.01, 1.0), NonstationaryError);
  const FitResult f = toy_fit({0.02}, {0.7, 0.35});
  EXPECT_THROW(long_run(f, "policy:q"), NonstationaryError);
  EXPECT_THROW(distributed_lag({0.02}, {0.7, 0.35}), NonstationaryError);
}

TEST(DistributedLag, GeometricDecay) {
  const LagDistribution ld = distributed_lag({1.0}, {0.5});
  for (std::size_t h = 0; h < 10; ++h) EXPECT_NEAR(ld.phi[h], std::pow(0.5, h), 1e-15);
  // the default tail tolerance truncates the series, so the mean lag is close but not exact
  EXPECT_NEAR(ld.mean_lag, 1.0, 1e-6);
  EXPECT_NEAR(distributed_lag({1.0}, {0.5}, 1e-14).mean_lag, 1.0, 1e-12);
  EXPECT_NEAR(mean_lag_closed_form({1.0}, {0.5}), 1.0, 1e-15);
  EXPECT_EQ(half_life(ld.phi), 1u);
}

TEST(DistributedLag, ImpulseOnly) {
  const LagDistribution ld = distributed_lag({1.0, 0.0, 0.0}, {0.0});
  EXPECT_EQ(ld.phi[0], 1.0);
  for (std::size_t h = 1; h < ld.phi.size(); ++h) EXPECT_EQ(ld.phi[h], 0.0);
  EXPECT_EQ(ld.mean_lag, 0.0);
  EXPECT_EQ(half_life(ld.phi), 0u);
}

TEST(DistributedLag, PrintedColumnMeanLagAndHalfLife) {
  const LagDistribution ld = distributed_lag(kBeta, kLambda);
  EXPECT_NEAR(ld.mean_lag, 6.0, 0.1);
  EXPECT_NEAR(mean_lag_closed_form(kBeta, kLambda), 6.0, 0.1);
  EXPECT_NEAR(distributed_lag(kBeta, kLambda, 1e-14).mean_lag, mean_lag_closed_form(kBeta, kLambda), 1e-8);
  EXPECT_EQ(half_life(ld.phi), 5u);
}

TEST(DistributedLag, HorizonFloor) {
  const LagDistribution ld = distributed_lag({1.0}, {0.0, 0.0, 0.0});
  EXPECT_GE(ld.horizon, 12u);
}

TEST(DistributedLag, WeightsSumToLongRun) {
  const LagDistribution ld = distributed_lag(kBeta, kLambda);
  double s = 0.0, r = 0.0;
  for (double v : ld.phi) s += v;
  for (double v : ld.rho) r += v;
  EXPECT_NEAR(s, 0.0089 / (1.0 - 0.8386), 1e-9);
  EXPECT_NEAR(r, 1.0, 1e-12);
}

TEST(DistributedLag, ClosedFormMatchesSeriesOnRandomStableLags) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 100; ++rep) {
    // positive lags on the simplex keep the weights positive and the process stable
    const double l1 = 0.9 * u(rng);
    const double l2 = (0.9 - l1) * u(rng);
    const std::vector<double> beta = {0.1 + u(rng), u(rng), u(rng)};
    const double series = distributed_lag(beta, {l1, l2}, 1e-14).mean_lag;
    EXPECT_NEAR(series, mean_lag_closed_form(beta, {l1, l2}), 1e-8) << l1 << ' ' << l2;
  }
}

TEST(DistributedLag, NegativeWeightsWarn) {
  const LagDistribution ld = distributed_lag({1.0, -0.3}, {0.2});
  EXPECT_FALSE(ld.warnings.empty());
}

TEST(HalfLife, RuleExamples) {
  EXPECT_EQ(half_life({0.1, 1.0, 0.2}), 1u);
  EXPECT_EQ(half_life({0.1, 1.0, 0.6, 0.2}), 2u);
  EXPECT_EQ(half_life({-0.1, -1.0, -0.6, -0.2}), 2u);
  EXPECT_EQ(half_life({1.0, 0.5, 0.5, 0.49}), 2u);
}

TEST(HalfLife, Undefined) {
  EXPECT_THROW(half_life({}), UsageError);
  EXPECT_THROW(half_life({0.0, 0.0}), SingularityError);
  EXPECT_THROW(half_life({1.0, 0.9, 0.8}), SingularityError);
}

TEST(DynamicsSummary, PrintedColumn) {
  const DynamicsSummary s = dynamics_summary(toy_fit(kBeta, kLambda), "policy:q");
  EXPECT_NEAR(s.net_sr.value, 0.0089, 1e-12);
  EXPECT_NEAR(s.long_run.value, 0.0089 / (1.0 - 0.8386), 1e-12);
  ASSERT_TRUE(s.half_life.has_value());
  EXPECT_EQ(*s.half_life, 5u);
  EXPECT_NEAR(s.mean_lag, 6.0, 0.1);
  EXPECT_GT(s.long_run.std_error, 0.0);
}

TEST(PolicyEffect, HandWindow) {
  const CapacityPanel post = window_panel({0.5, 0.6, 0.7, 0.9});
  const auto pe = industry_policy_effect(0.01, window_policy(), post, {"A"});
  EXPECT_NEAR(pe.at("A"), 0.01 * (0.40 + 0.60 + 0.84) / 3.0, 1e-15);
  EXPECT_NEAR(pe.at("A"), 0.0061333333333333, 1e-15);
}

TEST(PolicyEffect, DummyPolicyWithTrivialShare) {
  ScaledPolicy q;
  q.q = {{2, 1.0}, {3, 1.0}};
  q.policy_on = {2, 3};
  const auto pe = industry_policy_effect(0.02, q, window_panel({1.0, 1.0, 1.0}), {"A"});
  EXPECT_DOUBLE_EQ(pe.at("A"), 0.02);
}

TEST(PolicyEffect, NationalWeights) {
  // industry A: pi (0.5,0.6,0.7), industry B: pi (0.1,0.2,0.3)
  const CapacityPanel post = window_panel({0.5, 0.6, 0.7, 0.0, 0.1, 0.2, 0.3, 0.0}, 2);
  const std::vector<std::string> labels = {"A", "B"};
  const auto per = industry_policy_effect(0.01, window_policy(), post, labels);
  const double eq = national_policy_effect(0.01, window_policy(), post, labels, equal_weights(labels));
  EXPECT_NEAR(eq, 0.5 * (per.at("A") + per.at("B")), 1e-15);
  const double onlyA = national_policy_effect(0.01, window_policy(), post, labels, {{"A", 1.0}, {"B", 0.0}});
  EXPECT_NEAR(onlyA, per.at("A"), 1e-15);
  EXPECT_THROW(national_policy_effect(0.01, window_policy(), post, labels, {{"A", 0.0}}), UsageError);
}

TEST(PolicyEffect, AbsentIndustrySkippedWithWarning) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const CapacityPanel post = window_panel({0.5, 0.6, 0.7, 0.0, nan, nan, nan, nan}, 2);
  const auto r = policy_effects(0.01, window_policy(), post, {"A", "B"}, equal_weights({"A", "B"}), WeightKind::Equal);
  EXPECT_EQ(r.per_industry.count("B"), 0u);
  EXPECT_FALSE(r.warnings.empty());
  EXPECT_NEAR(r.national, r.per_industry.at("A"), 1e-15);
  EXPECT_DOUBLE_EQ(r.weights.at("A"), 1.0);
}

TEST(Weights, SizeSharesSumToOne) {
  const auto sim = testing_support::small_dgp(3, 40, 8);
  const auto w = size_weights(sim.panel);
  double s = 0.0;
  for (const auto& [k, v] : w) s += v;
  EXPECT_NEAR(s, 1.0, 1e-14);
  EXPECT_EQ(w.size(), sim.panel.group_labels.size());
}

TEST(FTest, IdenticalFitsGiveZero) {
  const FitResult f = toy_fit({0.1}, {0.5});
  FitResult u = f;
  u.ssr = 2.0;
  u.dof = 50;
  u.nobs = 60;
  const FTest t = joint_f_test(u, u, 2);
  EXPECT_EQ(t.f, 0.0);
  EXPECT_EQ(t.p_value, 1.0);
}

TEST(FTest, SingleRestrictionEqualsSquaredT) {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> z(0.0, 1.0);
  const Eigen::Index n = 200;
  Eigen::MatrixXd X(n, 3);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    X(i, 0) = 1.0;
    X(i, 1) = z(rng);
    X(i, 2) = z(rng);
    y(i) = 0.3 + 0.5 * X(i, 1) + 0.15 * X(i, 2) + z(rng);
  }
  FitOptions opt;
  opt.absorbed_effects = false;
  const FitResult u = fit_ols(testing_support::plain_design(X, y), VcovKind::Classical, opt);
  const FitResult r = fit_ols(testing_support::plain_design(X.leftCols(2), y), VcovKind::Classical, opt);
  const FTest t = joint_f_test(r, u, 1);
  const double tstat = u.coef("b2") / u.se("b2");
  EXPECT_NEAR(t.f, tstat * tstat, 1e-9 * t.f);
  EXPECT_EQ(t.dof_den, static_cast<std::size_t>(n - 3));
  EXPECT_GT(t.p_value, 0.0);
  EXPECT_LT(t.p_value, 1.0);
}

TEST(FTest, NestingViolation) {
  FitResult u, r;
  u.ssr = 2.0;
  r.ssr = 1.0;
  u.nobs = r.nobs = 30;
  u.dof = 25;
  EXPECT_THROW(joint_f_test(r, u, 1), UsageError);
  EXPECT_THROW(joint_f_test(u, u, 0), UsageError);
}

TEST(IndustryLoadings, BaseRestoredAsMinusSum) {
  FitResult f;
  f.labels = {"phi[trend][A]", "phi[trend][B]"};
  f.coefficients = Eigen::Vector2d(0.3, -0.1);
  f.column_groups["industry:trend"] = {0, 1};
  f.industry_labels = {"A", "B", "C"};
  const auto m = industry_loadings(f);
  EXPECT_DOUBLE_EQ(m.at("trend").at("A"), 0.3);
  EXPECT_DOUBLE_EQ(m.at("trend").at("C"), -0.2);
}
