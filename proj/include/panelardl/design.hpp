#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "panelardl/debt_capacity.hpp"
#include "panelardl/error.hpp"
#include "panelardl/panel_io.hpp"

namespace panelardl {

enum class Dynamics { PanARDL, PartialAdjustment };
enum class ThresholdMode { Single, Two };

/// An observed common series f_t interacted with industry dummies.
struct CommonFactor {
  std::string name;
  std::map<int, double> values;
};

/// f_t = t/T over the dataset's quarter range, with t counted from 1.
inline CommonFactor trend_factor(int t_min, int t_max) {
  CommonFactor f{"trend", {}};
  const double span = static_cast<double>(t_max - t_min + 1);
  for (int t = t_min; t <= t_max; ++t) f.values[t] = static_cast<double>(t - t_min + 1) / span;
  return f;
}

struct ModelSpec {
  std::size_t p = 2;
  Dynamics dynamics = Dynamics::PanARDL;
  ThresholdMode threshold_mode = ThresholdMode::Single;
  /// Names of the CommonFactor series supplied to build_design.
  std::vector<std::string> ft_proxy = {"trend"};
  /// Names of the ScaledPolicy series supplied to build_design.
  std::vector<std::string> policies;
  /// Firm-level regressors taken from the dataset's controls.
  std::vector<std::string> controls;
  /// Firms with fewer usable (lag-complete) rows are dropped.
  std::size_t min_obs_after_lags = 1;

  /// Number of lags of y.
  [[nodiscard]] std::size_t y_lags() const { return dynamics == Dynamics::PartialAdjustment ? 1 : p; }
  /// Highest lag of the distributed-lag regressors.
  [[nodiscard]] std::size_t dist_lags() const { return dynamics == Dynamics::PartialAdjustment ? 0 : p; }

  void validate() const {
    if (dynamics == Dynamics::PanARDL && p < 1) throw UsageError("PanARDL requires lag order p >= 1");
  }
};

struct AbsorptionReport {
  bool absorbed = false;
  std::size_t max_iterations = 0;    ///< worst column
  double max_residual_mean = 0.0;    ///< largest firm/quarter mean left over
  std::vector<std::string> dropped_columns;
};

/**
 * @brief Lag-aligned regression system.
 *
 * Columns are ordered lagged_y, pi_pre, policy interactions, controls,
 * industry interactions. `column_groups` maps group names to column
 * indices; per-policy groups are named "policy:<name>" and per-factor
 * industry blocks "industry:<factor>".
 */
struct DesignMatrix {
  Eigen::VectorXd response;
  Eigen::MatrixXd regressors;
  std::vector<std::string> labels;
  std::vector<std::size_t> row_firm;      ///< dataset firm index per row
  std::vector<int> row_quarter;
  std::vector<std::size_t> row_source;    ///< dataset row index per row
  std::map<std::string, std::vector<std::size_t>> column_groups;
  std::vector<std::string> firm_ids;      ///< dataset firm index -> id
  /// Industry groups present in the design; the last one is the contrast base.
  std::vector<std::string> industry_labels;
  AbsorptionReport demeaning;

  [[nodiscard]] std::size_t n_rows() const { return static_cast<std::size_t>(response.size()); }
  [[nodiscard]] std::size_t n_cols() const { return static_cast<std::size_t>(regressors.cols()); }

  [[nodiscard]] std::optional<std::size_t> column(const std::string& label) const {
    for (std::size_t j = 0; j < labels.size(); ++j)
      if (labels[j] == label) return j;
    return std::nullopt;
  }

  [[nodiscard]] std::size_t n_distinct_firms() const {
    std::vector<std::size_t> f(row_firm);
    std::sort(f.begin(), f.end());
    return static_cast<std::size_t>(std::unique(f.begin(), f.end()) - f.begin());
  }
  [[nodiscard]] std::size_t n_distinct_quarters() const {
    std::vector<int> q(row_quarter);
    std::sort(q.begin(), q.end());
    return static_cast<std::size_t>(std::unique(q.begin(), q.end()) - q.begin());
  }

  /// Row subset with the same columns; rows must be ascending.
  [[nodiscard]] DesignMatrix select_rows(const std::vector<std::size_t>& rows) const {
    DesignMatrix out;
    out.labels = labels;
    out.column_groups = column_groups;
    out.firm_ids = firm_ids;
    out.industry_labels = industry_labels;
    out.response.resize(static_cast<Eigen::Index>(rows.size()));
    out.regressors.resize(static_cast<Eigen::Index>(rows.size()), regressors.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto r = static_cast<Eigen::Index>(rows[i]);
      out.response(static_cast<Eigen::Index>(i)) = response(r);
      out.regressors.row(static_cast<Eigen::Index>(i)) = regressors.row(r);
      out.row_firm.push_back(row_firm[rows[i]]);
      out.row_quarter.push_back(row_quarter[rows[i]]);
      out.row_source.push_back(row_source[rows[i]]);
    }
    return out;
  }
};

// ---------------------------------------------------------------------------
// Two-way absorption

/**
 * @brief Removes firm and quarter effects by alternating projections.
 *
 * Each sweep subtracts firm means and then quarter means; iteration stops
 * once the firm means left after a sweep are within tolerance (quarter means
 * are then exactly zero). The fixed point is the residual of a regression on
 * full firm and quarter dummy sets.
 */
class TwoWayAbsorber {
 public:
  TwoWayAbsorber(const std::vector<std::size_t>& firm, const std::vector<int>& quarter, double tol = 1e-10,
                 std::size_t max_iter = 10000)
      : tol_(tol), max_iter_(max_iter) {
    std::map<std::size_t, std::size_t> fid;
    std::map<int, std::size_t> qid;
    for (std::size_t f : firm) fid.emplace(f, 0);
    for (int q : quarter) qid.emplace(q, 0);
    std::size_t k = 0;
    for (auto& [key, v] : fid) v = k++;
    k = 0;
    for (auto& [key, v] : qid) v = k++;
    firm_.reserve(firm.size());
    quarter_.reserve(quarter.size());
    for (std::size_t f : firm) firm_.push_back(fid[f]);
    for (int q : quarter) quarter_.push_back(qid[q]);
    firm_count_.assign(fid.size(), 0.0);
    quarter_count_.assign(qid.size(), 0.0);
    for (std::size_t f : firm_) firm_count_[f] += 1.0;
    for (std::size_t q : quarter_) quarter_count_[q] += 1.0;
  }

  [[nodiscard]] std::size_t n_firms() const { return firm_count_.size(); }
  [[nodiscard]] std::size_t n_quarters() const { return quarter_count_.size(); }

  struct Outcome {
    std::size_t iterations = 0;
    double residual = 0.0;
  };

  /// Absorbs both effect sets from x in place.
  Outcome absorb(Eigen::Ref<Eigen::VectorXd> x) const {
    const auto n = static_cast<std::size_t>(x.size());
    const double scale = std::max(1.0, x.cwiseAbs().maxCoeff());
    std::vector<double> fsum(firm_count_.size()), qsum(quarter_count_.size());
    Outcome out;
    demean(x, firm_, firm_count_, fsum);
    for (std::size_t it = 1; it <= max_iter_; ++it) {
      demean(x, quarter_, quarter_count_, qsum);
      std::fill(fsum.begin(), fsum.end(), 0.0);
      for (std::size_t i = 0; i < n; ++i) fsum[firm_[i]] += x[static_cast<Eigen::Index>(i)];
      double worst = 0.0;
      for (std::size_t f = 0; f < fsum.size(); ++f) {
        fsum[f] /= firm_count_[f];
        worst = std::max(worst, std::abs(fsum[f]));
      }
      out.iterations = it;
      out.residual = worst;
      if (worst <= tol_ * scale) return out;
      for (std::size_t i = 0; i < n; ++i) x[static_cast<Eigen::Index>(i)] -= fsum[firm_[i]];
    }
    throw AbsorptionError("two-way absorption did not converge after " + std::to_string(max_iter_) +
                          " iterations (residual mean " + std::to_string(out.residual) + ")");
  }

 private:
  static void demean(Eigen::Ref<Eigen::VectorXd> x, const std::vector<std::size_t>& id,
                     const std::vector<double>& count, std::vector<double>& sum) {
    std::fill(sum.begin(), sum.end(), 0.0);
    const auto n = static_cast<std::size_t>(x.size());
    for (std::size_t i = 0; i < n; ++i) sum[id[i]] += x[static_cast<Eigen::Index>(i)];
    for (std::size_t g = 0; g < sum.size(); ++g) sum[g] /= count[g];
    for (std::size_t i = 0; i < n; ++i) x[static_cast<Eigen::Index>(i)] -= sum[id[i]];
  }

  std::vector<std::size_t> firm_;
  std::vector<std::size_t> quarter_;
  std::vector<double> firm_count_;
  std::vector<double> quarter_count_;
  double tol_;
  std::size_t max_iter_;
};

struct AbsorbOptions {
  double tol = 1e-10;
  std::size_t max_iter = 10000;
  /// Columns whose norm shrinks below this fraction are dropped as collinear.
  double collinear_ratio = 1e-10;
};

/**
 * Absorbs firm and quarter effects from the response and every column.
 * Columns that vanish under absorption are dropped and listed in
 * `demeaning.dropped_columns`; column_groups are re-indexed accordingly.
 */
inline DesignMatrix absorb_two_way(const DesignMatrix& dm, const AbsorbOptions& opt = {}) {
  const TwoWayAbsorber absorber(dm.row_firm, dm.row_quarter, opt.tol, opt.max_iter);
  DesignMatrix out = dm;
  AbsorptionReport rep;
  auto o = absorber.absorb(out.response);
  rep.max_iterations = o.iterations;
  rep.max_residual_mean = o.residual;

  std::vector<std::size_t> keep;
  for (Eigen::Index j = 0; j < out.regressors.cols(); ++j) {
    const double before = dm.regressors.col(j).norm();
    auto col = out.regressors.col(j);
    o = absorber.absorb(col);
    rep.max_iterations = std::max(rep.max_iterations, o.iterations);
    rep.max_residual_mean = std::max(rep.max_residual_mean, o.residual);
    if (before == 0.0 || col.norm() < opt.collinear_ratio * before)
      rep.dropped_columns.push_back(dm.labels[static_cast<std::size_t>(j)]);
    else
      keep.push_back(static_cast<std::size_t>(j));
  }
  if (!rep.dropped_columns.empty()) {
    Eigen::MatrixXd kept(out.regressors.rows(), static_cast<Eigen::Index>(keep.size()));
    std::vector<std::string> labels;
    std::vector<std::size_t> remap(dm.n_cols(), static_cast<std::size_t>(-1));
    for (std::size_t k = 0; k < keep.size(); ++k) {
      kept.col(static_cast<Eigen::Index>(k)) = out.regressors.col(static_cast<Eigen::Index>(keep[k]));
      labels.push_back(dm.labels[keep[k]]);
      remap[keep[k]] = k;
    }
    out.regressors = std::move(kept);
    out.labels = std::move(labels);
    for (auto& [name, cols] : out.column_groups) {
      std::vector<std::size_t> re;
      for (std::size_t c : cols)
        if (remap[c] != static_cast<std::size_t>(-1)) re.push_back(remap[c]);
      cols = std::move(re);
    }
  }
  rep.absorbed = true;
  out.demeaning = std::move(rep);
  return out;
}

// ---------------------------------------------------------------------------
// Design construction

namespace detail {

inline std::string lag_label(const std::string& base, std::size_t lag) { return base + "_l" + std::to_string(lag); }

}  // namespace detail

/**
 * @brief Row layout shared by every threshold value.
 *
 * Which rows enter the regression depends on lag availability and on which
 * (industry, quarter) cells are populated, never on the quantile itself, so
 * the grid search builds the layout once and refills only the threshold
 * columns.
 */
class DesignLayout {
 public:
  DesignLayout(const PanelDataset& ds, const CrossSection& cs, const std::vector<ScaledPolicy>& policies,
               const std::vector<CommonFactor>& factors, const ModelSpec& spec)
      : ds_(&ds), spec_(spec) {
    spec.validate();
    for (const auto& name : spec.policies) {
      auto it = std::find_if(policies.begin(), policies.end(), [&](const ScaledPolicy& p) { return p.name == name; });
      if (it == policies.end()) throw UsageError("policy '" + name + "' was not supplied");
      policies_.push_back(*it);
    }
    for (const auto& name : spec.ft_proxy) {
      auto it = std::find_if(factors.begin(), factors.end(), [&](const CommonFactor& f) { return f.name == name; });
      if (it == factors.end()) throw UsageError("common factor '" + name + "' was not supplied");
      factors_.push_back(*it);
    }
    for (const auto& c : spec.controls) {
      auto idx = ds.control_index(c);
      if (!idx) throw SchemaError("control '" + c + "' not present in the panel");
      control_idx_.push_back(*idx);
    }

    const std::size_t ylags = spec.y_lags(), dlags = spec.dist_lags();
    const std::size_t max_row_lag = std::max(ylags, dlags);
    const auto off = ds.firm_offsets();
    std::vector<std::size_t> candidate;
    for (std::size_t f = 0; f < ds.n_firms(); ++f) {
      std::vector<std::size_t> mine;
      for (std::size_t r = off[f]; r < off[f + 1]; ++r) {
        const std::size_t pos = r - off[f];
        if (pos < max_row_lag) continue;
        const int t = ds.quarter[r];
        // consecutive quarters back to the deepest lag
        if (ds.quarter[r - max_row_lag] != t - static_cast<int>(max_row_lag)) continue;
        bool ok = !std::isnan(ds.y[r]);
        for (std::size_t j = 1; j <= ylags && ok; ++j) ok = !std::isnan(ds.y[r - j]);
        for (std::size_t c : control_idx_)
          for (std::size_t l = 0; l <= dlags && ok; ++l) ok = !std::isnan(ds.controls[c][r - l]);
        for (std::size_t l = 0; l <= dlags && ok; ++l)
          ok = !cs.industry(ds.firm_group[f], t - 1 - static_cast<int>(l)).empty();
        for (const auto& fac : factors_) ok = ok && fac.values.count(t) > 0;
        if (ok) mine.push_back(r);
      }
      if (mine.size() >= spec.min_obs_after_lags && !mine.empty()) candidate.insert(candidate.end(), mine.begin(), mine.end());
    }
    if (candidate.empty()) throw DesignError("design is empty after lag alignment");
    rows_ = std::move(candidate);

    std::vector<bool> present(ds.n_groups(), false);
    for (std::size_t r : rows_) present[ds.group_of_row(r)] = true;
    for (std::size_t g = 0; g < ds.n_groups(); ++g)
      if (present[g]) groups_.push_back(g);

    // column labels
    auto add = [this](const std::string& group, std::string label) {
      column_groups_[group].push_back(labels_.size());
      labels_.push_back(std::move(label));
    };
    for (std::size_t j = 1; j <= ylags; ++j) add("lagged_y", detail::lag_label("y", j));
    for (std::size_t l = 0; l <= dlags; ++l) add("pi_pre", detail::lag_label("pi_pre", l + 1));
    for (const auto& pol : policies_)
      for (std::size_t l = 0; l <= dlags; ++l) {
        add("policy:" + pol.name, detail::lag_label(pol.name + "_x_pi_post", l));
        column_groups_["policy_interactions"].push_back(labels_.size() - 1);
      }
    for (std::size_t c = 0; c < control_idx_.size(); ++c)
      for (std::size_t l = 0; l <= dlags; ++l) add("controls", detail::lag_label(spec.controls[c], l));
    if (groups_.size() > 1)
      for (const auto& fac : factors_)
        for (std::size_t k = 0; k + 1 < groups_.size(); ++k) {
          add("industry:" + fac.name, "phi[" + fac.name + "][" + ds.group_labels[groups_[k]] + "]");
          column_groups_["industry_interactions"].push_back(labels_.size() - 1);
        }
  }

  [[nodiscard]] const std::vector<std::size_t>& rows() const { return rows_; }
  [[nodiscard]] std::size_t n_rows() const { return rows_.size(); }
  [[nodiscard]] std::size_t n_cols() const { return labels_.size(); }
  [[nodiscard]] const ModelSpec& spec() const { return spec_; }
  [[nodiscard]] std::size_t n_pi_cols() const { return spec_.dist_lags() + 1; }
  [[nodiscard]] std::size_t n_policy_cols() const { return policies_.size() * (spec_.dist_lags() + 1); }
  [[nodiscard]] std::size_t pi_offset() const { return spec_.y_lags(); }
  [[nodiscard]] std::size_t policy_offset() const { return pi_offset() + n_pi_cols(); }

  /// Column indices that do not depend on either threshold.
  [[nodiscard]] std::vector<std::size_t> fixed_columns() const {
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < n_cols(); ++j)
      if (j < pi_offset() || j >= policy_offset() + n_policy_cols()) out.push_back(j);
    return out;
  }

  /// pi_{s,t-1-l}(gamma_pre) for l = 0..dist_lags.
  [[nodiscard]] Eigen::MatrixXd pi_columns(const CapacityPanel& pre) const {
    const std::size_t dl = spec_.dist_lags();
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows_.size()), static_cast<Eigen::Index>(dl + 1));
    for (std::size_t i = 0; i < rows_.size(); ++i) {
      const std::size_t r = rows_[i];
      const std::size_t g = ds_->group_of_row(r);
      for (std::size_t l = 0; l <= dl; ++l)
        m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(l)) =
            pre.pi_at(g, ds_->quarter[r] - 1 - static_cast<int>(l));
    }
    return m;
  }

  /// q_{t-l} x pi_{s,t-l-1}(gamma_post) for every policy and l = 0..dist_lags.
  [[nodiscard]] Eigen::MatrixXd policy_columns(const CapacityPanel& post) const {
    const std::size_t dl = spec_.dist_lags();
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows_.size()), static_cast<Eigen::Index>(n_policy_cols()));
    for (std::size_t i = 0; i < rows_.size(); ++i) {
      const std::size_t r = rows_[i];
      const std::size_t g = ds_->group_of_row(r);
      const int t = ds_->quarter[r];
      for (std::size_t k = 0; k < policies_.size(); ++k)
        for (std::size_t l = 0; l <= dl; ++l) {
          const int tl = t - static_cast<int>(l);
          m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k * (dl + 1) + l)) =
              policies_[k].at(tl) * post.pi_at(g, tl - 1);
        }
    }
    return m;
  }

  /// Full (unabsorbed) design at the given capacity panels.
  [[nodiscard]] DesignMatrix build(const CapacityPanel& pre, const CapacityPanel& post) const {
    const PanelDataset& ds = *ds_;
    const auto n = static_cast<Eigen::Index>(rows_.size());
    DesignMatrix dm;
    dm.response.resize(n);
    dm.regressors.resize(n, static_cast<Eigen::Index>(n_cols()));
    dm.labels = labels_;
    dm.column_groups = column_groups_;
    dm.firm_ids = ds.firm_ids;
    for (std::size_t g : groups_) dm.industry_labels.push_back(ds.group_labels[g]);

    const std::size_t ylags = spec_.y_lags(), dl = spec_.dist_lags();
    dm.regressors.middleCols(static_cast<Eigen::Index>(pi_offset()), static_cast<Eigen::Index>(n_pi_cols())) =
        pi_columns(pre);
    if (n_policy_cols() > 0)
      dm.regressors.middleCols(static_cast<Eigen::Index>(policy_offset()),
                               static_cast<Eigen::Index>(n_policy_cols())) = policy_columns(post);

    std::vector<std::size_t> group_pos(ds.n_groups(), static_cast<std::size_t>(-1));
    for (std::size_t k = 0; k < groups_.size(); ++k) group_pos[groups_[k]] = k;
    const std::size_t S = groups_.size();
    const std::size_t ctrl0 = policy_offset() + n_policy_cols();
    const std::size_t ind0 = ctrl0 + control_idx_.size() * (dl + 1);

    for (std::size_t i = 0; i < rows_.size(); ++i) {
      const std::size_t r = rows_[i];
      const auto ii = static_cast<Eigen::Index>(i);
      dm.response(ii) = ds.y[r];
      dm.row_firm.push_back(ds.firm[r]);
      dm.row_quarter.push_back(ds.quarter[r]);
      dm.row_source.push_back(r);
      for (std::size_t j = 1; j <= ylags; ++j) dm.regressors(ii, static_cast<Eigen::Index>(j - 1)) = ds.y[r - j];
      for (std::size_t c = 0; c < control_idx_.size(); ++c)
        for (std::size_t l = 0; l <= dl; ++l)
          dm.regressors(ii, static_cast<Eigen::Index>(ctrl0 + c * (dl + 1) + l)) = ds.controls[control_idx_[c]][r - l];
      if (S > 1) {
        const std::size_t k = group_pos[ds.group_of_row(r)];
        for (std::size_t fi = 0; fi < factors_.size(); ++fi) {
          const double ft = factors_[fi].values.at(ds.quarter[r]);
          for (std::size_t c = 0; c + 1 < S; ++c) {
            // sum-to-zero contrast: D_c - D_S
            const double code = (k == c) ? 1.0 : (k == S - 1 ? -1.0 : 0.0);
            dm.regressors(ii, static_cast<Eigen::Index>(ind0 + fi * (S - 1) + c)) = code * ft;
          }
        }
      }
    }
    return dm;
  }

 private:
  const PanelDataset* ds_;
  ModelSpec spec_;
  std::vector<ScaledPolicy> policies_;
  std::vector<CommonFactor> factors_;
  std::vector<std::size_t> control_idx_;
  std::vector<std::size_t> rows_;
  std::vector<std::size_t> groups_;
  std::vector<std::string> labels_;
  std::map<std::string, std::vector<std::size_t>> column_groups_;
};

/// Builds the unabsorbed PanARDL / partial-adjustment design.
inline DesignMatrix build_design(const PanelDataset& ds, const CapacityPanel& pre, const CapacityPanel& post,
                                 const std::vector<ScaledPolicy>& policies, const std::vector<CommonFactor>& factors,
                                 const ModelSpec& spec) {
  const CrossSection cs(ds);
  return DesignLayout(ds, cs, policies, factors, spec).build(pre, post);
}

/// Writes the design (response first) with 12 significant digits.
inline void write_design_csv(const DesignMatrix& dm, std::ostream& out) {
  out << "firm,quarter,y";
  for (const auto& l : dm.labels) out << ',' << l;
  out << '\n';
  char buf[32];
  for (std::size_t i = 0; i < dm.n_rows(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    std::snprintf(buf, sizeof buf, "%.12g", dm.response(ii));
    out << dm.firm_ids[dm.row_firm[i]] << ',' << dm.row_quarter[i] << ',' << buf;
    for (Eigen::Index j = 0; j < dm.regressors.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.12g", dm.regressors(ii, j));
      out << ',' << buf;
    }
    out << '\n';
  }
}

}  // namespace panelardl
