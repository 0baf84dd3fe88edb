#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "panelardl/error.hpp"
#include "panelardl/panel_io.hpp"
#include "panelardl/quantile.hpp"

namespace panelardl {

/// Quantile thresholds; single-threshold mode is gamma_pre == gamma_post.
struct ThresholdParams {
  double gamma_pre = 0.5;
  double gamma_post = 0.5;

  [[nodiscard]] bool single() const { return gamma_pre == gamma_post; }
  void validate() const {
    if (!(gamma_pre > 0.0 && gamma_pre < 1.0) || !(gamma_post > 0.0 && gamma_post < 1.0))
      throw UsageError("threshold quantiles must lie strictly inside (0, 1)");
  }
};

/// A policy measure Q_t with its policy-on window.
struct PolicySeries {
  std::string name;
  std::map<int, double> raw;
  std::set<int> policy_on;
};

/// A policy measure after scaling; quarters outside the window read as zero.
struct ScaledPolicy {
  std::string name;
  std::map<int, double> q;
  std::set<int> policy_on;

  [[nodiscard]] double at(int quarter) const {
    auto it = q.find(quarter);
    return it == q.end() ? 0.0 : it->second;
  }
};

enum class CapacityLevel { Firm, Industry };

/**
 * @brief Debt-capacity indicators for one quantile.
 *
 * `d` is per dataset row. At industry level it compares each firm with the
 * economy-wide quantile g_t, and `pi` is the industry share strictly below
 * it. At firm level `d` uses the industry's own quantile g_st and `pi` is
 * the within-industry mean of that indicator.
 */
struct CapacityPanel {
  double gamma = 0.5;
  CapacityLevel level = CapacityLevel::Industry;
  int t_min = 0;
  std::size_t n_quarters = 0;
  std::size_t n_groups = 0;
  std::vector<double> pi;            ///< [group * n_quarters + (t - t_min)], NaN if absent
  std::vector<std::uint8_t> d;       ///< per dataset row
  std::vector<double> threshold;     ///< economy quantile per quarter (NaN if empty)

  [[nodiscard]] double pi_at(std::size_t group, int quarter) const {
    if (quarter < t_min || quarter >= t_min + static_cast<int>(n_quarters)) return kMissing;
    return pi[group * n_quarters + static_cast<std::size_t>(quarter - t_min)];
  }
};

/**
 * @brief Cross-sectional y distributions per quarter and per (group, quarter).
 *
 * Sorting happens once; capacity indicators for any quantile then cost a
 * binary search per cell, which is what the grid search relies on.
 */
class CrossSection {
 public:
  explicit CrossSection(const PanelDataset& ds) : ds_(&ds) {
    t_min_ = ds.t_min();
    n_quarters_ = ds.n_obs() == 0 ? 0 : static_cast<std::size_t>(ds.t_max() - t_min_ + 1);
    n_groups_ = ds.n_groups();
    economy_.assign(n_quarters_, {});
    industry_.assign(n_groups_ * n_quarters_, {});
    for (std::size_t r = 0; r < ds.n_obs(); ++r) {
      const auto t = static_cast<std::size_t>(ds.quarter[r] - t_min_);
      economy_[t].push_back(ds.y[r]);
      industry_[ds.group_of_row(r) * n_quarters_ + t].push_back(ds.y[r]);
    }
    for (auto& v : economy_) std::sort(v.begin(), v.end());
    for (auto& v : industry_) std::sort(v.begin(), v.end());
  }

  [[nodiscard]] int t_min() const { return t_min_; }
  [[nodiscard]] std::size_t n_quarters() const { return n_quarters_; }
  [[nodiscard]] std::size_t n_groups() const { return n_groups_; }
  [[nodiscard]] const PanelDataset& dataset() const { return *ds_; }

  [[nodiscard]] const std::vector<double>& economy(int quarter) const {
    if (quarter < t_min_ || quarter >= t_min_ + static_cast<int>(n_quarters_) ||
        economy_[static_cast<std::size_t>(quarter - t_min_)].empty())
      throw MissingPeriodError("no observations at quarter " + std::to_string(quarter));
    return economy_[static_cast<std::size_t>(quarter - t_min_)];
  }

  [[nodiscard]] const std::vector<double>& industry(std::size_t group, int quarter) const {
    static const std::vector<double> empty;
    if (quarter < t_min_ || quarter >= t_min_ + static_cast<int>(n_quarters_) || group >= n_groups_) return empty;
    return industry_[group * n_quarters_ + static_cast<std::size_t>(quarter - t_min_)];
  }

  /// Capacity indicators at quantile gamma.
  [[nodiscard]] CapacityPanel capacity(double gamma, CapacityLevel level = CapacityLevel::Industry) const {
    CapacityPanel cp;
    cp.gamma = gamma;
    cp.level = level;
    cp.t_min = t_min_;
    cp.n_quarters = n_quarters_;
    cp.n_groups = n_groups_;
    cp.pi.assign(n_groups_ * n_quarters_, kMissing);
    cp.threshold.assign(n_quarters_, kMissing);
    std::vector<double> group_threshold(n_groups_ * n_quarters_, kMissing);
    for (std::size_t t = 0; t < n_quarters_; ++t) {
      if (economy_[t].empty()) continue;
      const double g = quantile_sorted(economy_[t], gamma);
      cp.threshold[t] = g;
      for (std::size_t s = 0; s < n_groups_; ++s) {
        const auto& cell = industry_[s * n_quarters_ + t];
        if (cell.empty()) continue;
        if (level == CapacityLevel::Industry) {
          const auto below = std::lower_bound(cell.begin(), cell.end(), g) - cell.begin();
          cp.pi[s * n_quarters_ + t] = static_cast<double>(below) / static_cast<double>(cell.size());
        } else {
          const double gs = quantile_sorted(cell, gamma);
          group_threshold[s * n_quarters_ + t] = gs;
          const auto below = std::lower_bound(cell.begin(), cell.end(), gs) - cell.begin();
          cp.pi[s * n_quarters_ + t] = static_cast<double>(below) / static_cast<double>(cell.size());
        }
      }
    }
    const PanelDataset& ds = *ds_;
    cp.d.resize(ds.n_obs());
    for (std::size_t r = 0; r < ds.n_obs(); ++r) {
      const auto t = static_cast<std::size_t>(ds.quarter[r] - t_min_);
      const double g = level == CapacityLevel::Industry ? cp.threshold[t]
                                                        : group_threshold[ds.group_of_row(r) * n_quarters_ + t];
      cp.d[r] = ds.y[r] < g ? 1 : 0;
    }
    return cp;
  }

 private:
  const PanelDataset* ds_;
  int t_min_ = 0;
  std::size_t n_quarters_ = 0;
  std::size_t n_groups_ = 0;
  std::vector<std::vector<double>> economy_;
  std::vector<std::vector<double>> industry_;
};

/// g_t(gamma): quantile of y over all firms observed at quarter t.
inline double economy_quantile(const PanelDataset& ds, int quarter, double gamma) {
  std::vector<double> v;
  for (std::size_t r = 0; r < ds.n_obs(); ++r)
    if (ds.quarter[r] == quarter) v.push_back(ds.y[r]);
  if (v.empty()) throw MissingPeriodError("no observations at quarter " + std::to_string(quarter));
  return quantile(std::move(v), gamma);
}

/// g_st(gamma): quantile of y over the firms of industry group s at quarter t.
inline double industry_quantile(const PanelDataset& ds, std::size_t group, int quarter, double gamma) {
  std::vector<double> v;
  for (std::size_t r = 0; r < ds.n_obs(); ++r)
    if (ds.quarter[r] == quarter && ds.group_of_row(r) == group) v.push_back(ds.y[r]);
  if (v.empty())
    throw MissingPeriodError("industry group " + std::to_string(group) + " has no observations at quarter " +
                             std::to_string(quarter));
  return quantile(std::move(v), gamma);
}

inline CapacityPanel capacity_indicators(const PanelDataset& ds, double gamma,
                                         CapacityLevel level = CapacityLevel::Industry) {
  return CrossSection(ds).capacity(gamma, level);
}

/**
 * @brief Scales a policy measure to unit mean over its policy-on window.
 *
 * q_t = Q_t / mean_{tau in window} D_tau inside the window and 0 outside.
 * D is the series itself unless a `denominator` (e.g. total purchases) is
 * given, in which case components scaled by the same total add up to the
 * scaled total.
 */
inline ScaledPolicy scale_policy(const PolicySeries& p, const PolicySeries* denominator = nullptr) {
  if (p.policy_on.empty()) throw ScalingError("policy '" + p.name + "' has an empty policy-on window");
  const PolicySeries& den = denominator ? *denominator : p;
  double sum = 0.0;
  for (int t : p.policy_on) {
    auto it = den.raw.find(t);
    sum += it == den.raw.end() ? 0.0 : it->second;
  }
  const double mean = sum / static_cast<double>(p.policy_on.size());
  if (!(mean > 0.0)) throw ScalingError("policy '" + p.name + "' has a zero scaling denominator");
  ScaledPolicy out;
  out.name = p.name;
  out.policy_on = p.policy_on;
  for (int t : p.policy_on) {
    auto it = p.raw.find(t);
    out.q[t] = (it == p.raw.end() ? 0.0 : it->second) / mean;
  }
  return out;
}

/// Reads a `quarter,value,policy_on` CSV.
inline PolicySeries parse_policy(std::istream& in, std::string name) {
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("policy CSV is empty (no header)");
  const auto header = detail::split_csv_line(line);
  auto find = [&](const char* col) {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (detail::trim(header[i]) == col) return i;
    throw SchemaError(std::string("missing required column '") + col + "' in policy CSV");
  };
  const std::size_t cq = find("quarter"), cv = find("value"), con = find("policy_on");
  PolicySeries p;
  p.name = std::move(name);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size()) throw ParseError("policy row " + std::to_string(line_no) + ": wrong field count");
    const auto q = parse_quarter(cells[cq]);
    const auto v = detail::parse_real(cells[cv]);
    const auto on = detail::parse_int(cells[con]);
    if (!q || !v || std::isnan(*v) || !on || (*on != 0 && *on != 1))
      throw ParseError("policy row " + std::to_string(line_no) + ": malformed values");
    if (*v < 0.0) throw ParseError("policy row " + std::to_string(line_no) + ": negative policy level");
    if (!p.raw.emplace(*q, *v).second)
      throw DuplicateError("policy '" + p.name + "' repeats quarter " + std::to_string(*q));
    if (*on == 1) p.policy_on.insert(*q);
  }
  return p;
}

inline PolicySeries load_policy(const std::string& path, std::string name) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open policy file '" + path + "'");
  return parse_policy(in, std::move(name));
}

inline void write_policy(const PolicySeries& p, std::ostream& out) {
  out << "quarter,value,policy_on\n";
  for (const auto& [t, v] : p.raw) out << t << ',' << detail::format_exact(v) << ',' << (p.policy_on.count(t) ? 1 : 0) << '\n';
}

}  // namespace panelardl
