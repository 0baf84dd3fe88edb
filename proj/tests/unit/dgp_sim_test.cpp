#include <gtest/gtest.h>

#include <set>

#include "test_support.hpp"

using namespace panelardl;

namespace {

double y_at(const PanelDataset& ds, std::size_t firm, int quarter) {
  for (std::size_t r = 0; r < ds.n_obs(); ++r)
    if (ds.firm[r] == firm && ds.quarter[r] == quarter) return ds.y[r];
  return std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

TEST(CounterRng, PureFunctionOfCounters) {
  const CounterRng a(5), b(5), c(6);
  EXPECT_EQ(a.normal(1, 2, 3), b.normal(1, 2, 3));
  EXPECT_NE(a.normal(1, 2, 3), c.normal(1, 2, 3));
  EXPECT_NE(a.normal(1, 2, 3), a.normal(1, 3, 2));
  double s = 0.0, s2 = 0.0;
  for (std::uint64_t i = 0; i < 20000; ++i) {
    const double z = a.normal(9, i, 0);
    s += z;
    s2 += z * z;
  }
  EXPECT_NEAR(s / 20000.0, 0.0, 0.03);
  EXPECT_NEAR(s2 / 20000.0, 1.0, 0.05);
}

TEST(Simulate, ZeroCoefficientsLeaveFirmPlusQuarterEffects) {
  DgpConfig c;
  c.n_firms = 12;
  c.n_industries = 3;
  c.n_quarters = 10;
  c.policy_start = 6;
  c.lambda = {};
  c.beta0 = {};
  c.beta1 = {};
  c.error_sd = 0.0;
  const DgpOutput out = simulate(c);
  const auto& ds = out.panel;
  ASSERT_EQ(ds.n_obs(), 120u);
  for (std::size_t i = 1; i < 12; ++i)
    for (int t = 2; t <= 10; ++t) {
      const double dd = y_at(ds, i, t) - y_at(ds, i, 1) - y_at(ds, 0, t) + y_at(ds, 0, 1);
      EXPECT_NEAR(dd, 0.0, 1e-14);
    }
}

TEST(Simulate, DeterministicForSeed) {
  const auto a = testing_support::small_dgp(31, 40, 12);
  const auto b = testing_support::small_dgp(31, 40, 12);
  const auto c = testing_support::small_dgp(32, 40, 12);
  EXPECT_EQ(a.panel.y, b.panel.y);
  EXPECT_EQ(a.policy.raw, b.policy.raw);
  EXPECT_NE(a.panel.y, c.panel.y);
}

TEST(Simulate, ProportionsMatchEstimatorRule) {
  const auto out = testing_support::small_dgp(8, 80, 12);
  const CrossSection cs(out.panel);
  const CapacityPanel post = cs.capacity(out.truth.config.gamma_post);
  for (std::size_t s = 0; s < out.panel.group_labels.size(); ++s)
    for (int t = 1; t <= 12; ++t) {
      const double pi = out.truth.pi_post[s][static_cast<std::size_t>(t - 1)];
      EXPECT_GE(pi, 0.0);
      EXPECT_LE(pi, 1.0);
      EXPECT_DOUBLE_EQ(post.pi_at(s, t), pi);
    }
}

TEST(Simulate, TruthSummaries) {
  const auto out = testing_support::small_dgp();
  EXPECT_NEAR(out.truth.net_short_run, 0.07, 1e-15);
  EXPECT_NEAR(out.truth.long_run, 0.14, 1e-14);
  EXPECT_EQ(out.policy.policy_on.size(), 12u);
  EXPECT_EQ(*out.policy.policy_on.begin(), 13);
}

TEST(Simulate, IndustriesAndControls) {
  DgpConfig c;
  c.n_firms = 30;
  c.n_industries = 3;
  c.n_quarters = 8;
  c.policy_start = 4;
  c.control_coefs = {0.1, -0.2};
  const auto out = simulate(c);
  EXPECT_EQ(out.panel.control_names, (std::vector<std::string>{"x1", "x2"}));
  EXPECT_EQ(out.panel.controls[1].size(), out.panel.n_obs());
  std::set<int> codes(out.panel.firm_industry_code.begin(), out.panel.firm_industry_code.end());
  EXPECT_EQ(codes, (std::set<int>{100, 101, 102}));
}

TEST(Simulate, UnbalancedRunsAreGapFreeAndLongEnough) {
  DgpConfig c;
  c.n_firms = 200;
  c.n_quarters = 30;
  c.policy_start = 15;
  c.unbalanced = true;
  c.min_run = 6;
  const auto out = simulate(c);
  std::vector<std::vector<int>> q(200);
  for (std::size_t r = 0; r < out.panel.n_obs(); ++r) q[out.panel.firm[r]].push_back(out.panel.quarter[r]);
  bool varied = false;
  for (const auto& v : q) {
    ASSERT_GE(v.size(), 6u);
    EXPECT_EQ(v.back() - v.front() + 1, static_cast<int>(v.size()));
    varied = varied || v.size() != 30u;
  }
  EXPECT_TRUE(varied);
}

TEST(Simulate, ExplodingDynamics) {
  DgpConfig c;
  c.n_firms = 10;
  c.n_industries = 2;
  c.n_quarters = 100;
  c.policy_start = 50;
  c.lambda = {-1.2};
  c.error_sd = 0.05;
  EXPECT_THROW(simulate(c), StabilityError);
}

TEST(Simulate, InvalidConfig) {
  DgpConfig c;
  c.lambda = {0.6, 0.5};
  EXPECT_THROW(simulate(c), UsageError);
  c = {};
  c.phi = {0.1, 0.1, -0.2};
  EXPECT_THROW(simulate(c), UsageError);
  c = {};
  c.gamma_post = 1.0;
  EXPECT_THROW(simulate(c), UsageError);
}
