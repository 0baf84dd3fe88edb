#include <gtest/gtest.h>

#include <random>

#include "test_support.hpp"

using namespace panelardl;
using testing_support::panel_from_rows;
using testing_support::Row;

namespace {

PanelDataset cross_section(const std::vector<std::pair<int, double>>& code_y, int quarter = 1) {
  std::vector<Row> rows;
  int id = 0;
  for (const auto& [code, y] : code_y) rows.push_back({"f" + std::to_string(100 + id++), code, quarter, y});
  return panel_from_rows(rows);
}

}  // namespace

TEST(Quantile, LinearInterpolation) {
  EXPECT_DOUBLE_EQ(quantile({0.0, 0.1, 0.2, 0.3}, 0.5), 0.15);
  EXPECT_DOUBLE_EQ(quantile({0.3, 0.0, 0.2, 0.1}, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(quantile({0.3, 0.0, 0.2, 0.1}, 1.0), 0.3);
  EXPECT_DOUBLE_EQ(quantile({5.0}, 0.37), 5.0);
}

TEST(EconomyQuantile, Midpoint) {
  const auto ds = cross_section({{100, 0.0}, {100, 0.1}, {101, 0.2}, {101, 0.3}});
  EXPECT_NEAR(economy_quantile(ds, 1, 0.5), 0.15, 1e-15);
}

TEST(EconomyQuantile, ConstantSample) {
  const auto ds = cross_section({{100, 0.2}, {100, 0.2}, {101, 0.2}});
  for (double g : {0.1, 0.5, 0.9}) EXPECT_DOUBLE_EQ(economy_quantile(ds, 1, g), 0.2);
}

TEST(EconomyQuantile, MassAtZero) {
  std::vector<std::pair<int, double>> cy;
  for (int i = 0; i < 21; ++i) cy.emplace_back(100, 0.0);
  for (int i = 0; i < 79; ++i) cy.emplace_back(100, 0.01 * (i + 1));
  EXPECT_DOUBLE_EQ(economy_quantile(cross_section(cy), 1, 0.10), 0.0);
}

TEST(EconomyQuantile, MissingPeriod) {
  const auto ds = cross_section({{100, 0.1}, {100, 0.2}});
  EXPECT_THROW(economy_quantile(ds, 2, 0.5), MissingPeriodError);
}

TEST(IndustryQuantile, SingleIndustryMatchesEconomy) {
  const auto ds = cross_section({{100, 0.05}, {100, 0.4}, {100, 0.2}, {100, 0.33}});
  for (double g : {0.25, 0.5, 0.8}) EXPECT_DOUBLE_EQ(industry_quantile(ds, 0, 1, g), economy_quantile(ds, 1, g));
}

TEST(IndustryQuantile, TwoPoints) {
  const auto ds = cross_section({{100, 0.1}, {100, 0.3}, {101, 0.9}});
  EXPECT_NEAR(industry_quantile(ds, 0, 1, 0.5), 0.2, 1e-15);
}

TEST(IndustryQuantile, AbsentIndustry) {
  std::vector<Row> rows = {{"a", 100, 1, 0.1}, {"a", 100, 2, 0.1}, {"b", 101, 2, 0.3}};
  const auto ds = panel_from_rows(rows);
  EXPECT_THROW(industry_quantile(ds, 1, 1, 0.5), MissingPeriodError);
}

TEST(CapacityIndicators, HalfStrictlyBelow) {
  const auto ds = cross_section({{100, 0.1}, {100, 0.2}, {100, 0.3}, {100, 0.4}});
  const auto cap = capacity_indicators(ds, 0.5);
  EXPECT_DOUBLE_EQ(cap.threshold[0], 0.25);
  EXPECT_DOUBLE_EQ(cap.pi_at(0, 1), 0.5);
}

TEST(CapacityIndicators, TieCountsAtCapacity) {
  // g = 0.2 exactly; the firm at 0.2 is not below it
  const auto ds = cross_section({{100, 0.1}, {100, 0.2}, {100, 0.3}});
  const auto cap = capacity_indicators(ds, 0.5, CapacityLevel::Firm);
  EXPECT_EQ(cap.d[0], 1);
  EXPECT_EQ(cap.d[1], 0);
  EXPECT_EQ(cap.d[2], 0);
}

TEST(CapacityIndicators, SymmetricIndustriesShareProportions) {
  std::vector<Row> rows;
  int id = 0;
  for (int t = 1; t <= 4; ++t)
    for (double y : {0.1, 0.25, 0.4, 0.55}) {
      rows.push_back({"a" + std::to_string(id), 100, t, y + 0.01 * t});
      rows.push_back({"b" + std::to_string(id++), 101, t, y + 0.01 * t});
    }
  const auto ds = panel_from_rows(rows);
  const auto cap = capacity_indicators(ds, 0.6);
  for (int t = 1; t <= 4; ++t) EXPECT_DOUBLE_EQ(cap.pi_at(0, t), cap.pi_at(1, t));
}

TEST(CapacityIndicators, MonotoneInGammaAndBounded) {
  const auto sim = testing_support::small_dgp(5, 80, 8);
  const CrossSection cs(sim.panel);
  CapacityPanel prev = cs.capacity(0.25);
  for (double g = 0.26; g <= 0.9; g += 0.01) {
    const CapacityPanel cur = cs.capacity(g);
    for (std::size_t i = 0; i < cur.pi.size(); ++i) {
      EXPECT_GE(cur.pi[i], prev.pi[i]);
      EXPECT_GE(cur.pi[i], 0.0);
      EXPECT_LE(cur.pi[i], 1.0);
    }
    prev = cur;
  }
}

TEST(CapacityIndicators, FirmLevelMeanNearGamma) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Row> rows;
  for (int i = 0; i < 90; ++i) rows.push_back({"f" + std::to_string(100 + i), 100 + i % 3, 1, u(rng)});
  const auto ds = panel_from_rows(rows);
  for (double g : {0.3, 0.6, 0.85}) {
    const auto cap = capacity_indicators(ds, g, CapacityLevel::Firm);
    std::vector<double> sum(3, 0.0), n(3, 0.0);
    for (std::size_t r = 0; r < ds.n_obs(); ++r) {
      sum[ds.group_of_row(r)] += cap.d[r];
      n[ds.group_of_row(r)] += 1.0;
    }
    for (int s = 0; s < 3; ++s) EXPECT_LE(std::abs(sum[s] / n[s] - g), 1.0 / n[s] + 1e-12);
  }
}

TEST(ScalePolicy, SelfScaled) {
  PolicySeries p{"q", {{1, 4.0}, {2, 5.0}, {3, 6.0}, {0, 9.0}}, {1, 2, 3}};
  const auto q = scale_policy(p);
  EXPECT_NEAR(q.at(1), 0.8, 1e-15);
  EXPECT_NEAR(q.at(2), 1.0, 1e-15);
  EXPECT_NEAR(q.at(3), 1.2, 1e-15);
  EXPECT_EQ(q.at(0), 0.0);
  EXPECT_NEAR((q.at(1) + q.at(2) + q.at(3)) / 3.0, 1.0, 1e-12);
}

TEST(ScalePolicy, DummyUnchanged) {
  PolicySeries p{"d", {{1, 0.0}, {2, 1.0}, {3, 1.0}}, {2, 3}};
  const auto q = scale_policy(p);
  EXPECT_EQ(q.at(1), 0.0);
  EXPECT_EQ(q.at(2), 1.0);
  EXPECT_EQ(q.at(3), 1.0);
}

TEST(ScalePolicy, TotalScaledComponentsAdd) {
  PolicySeries ty{"ty", {{1, 2.0}, {2, 0.0}}, {1, 2}};
  PolicySeries mbs{"mbs", {{1, 2.0}, {2, 4.0}}, {1, 2}};
  PolicySeries total{"total", {{1, 4.0}, {2, 4.0}}, {1, 2}};
  const auto a = scale_policy(ty, &total), b = scale_policy(mbs, &total), c = scale_policy(total);
  EXPECT_DOUBLE_EQ(a.at(1), 0.5);
  EXPECT_DOUBLE_EQ(a.at(2), 0.0);
  EXPECT_DOUBLE_EQ(b.at(1), 0.5);
  EXPECT_DOUBLE_EQ(b.at(2), 1.0);
  for (int t : {1, 2}) EXPECT_DOUBLE_EQ(a.at(t) + b.at(t), c.at(t));
}

TEST(ScalePolicy, ZeroDenominator) {
  PolicySeries p{"z", {{1, 0.0}, {2, 0.0}}, {1, 2}};
  EXPECT_THROW(scale_policy(p), ScalingError);
  PolicySeries e{"e", {{1, 1.0}}, {}};
  EXPECT_THROW(scale_policy(e), ScalingError);
}

TEST(PolicyCsv, RoundTrip) {
  std::istringstream in("quarter,value,policy_on\n1,0,0\n2,3.5,1\n3,4.5,1\n");
  const auto p = parse_policy(in, "q");
  EXPECT_EQ(p.policy_on, (std::set<int>{2, 3}));
  std::ostringstream out;
  write_policy(p, out);
  std::istringstream again(out.str());
  const auto p2 = parse_policy(again, "q");
  EXPECT_EQ(p.raw, p2.raw);
  EXPECT_EQ(p.policy_on, p2.policy_on);
}

TEST(PolicyCsv, RejectsNegativeLevels) {
  std::istringstream in("quarter,value,policy_on\n1,-1,1\n");
  EXPECT_THROW(parse_policy(in, "q"), ParseError);
}
