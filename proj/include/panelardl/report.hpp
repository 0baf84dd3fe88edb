#pragma once

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "panelardl/debt_capacity.hpp"
#include "panelardl/design.hpp"
#include "panelardl/dgp_sim.hpp"
#include "panelardl/effects.hpp"
#include "panelardl/estimator.hpp"
#include "panelardl/jackknife.hpp"
#include "panelardl/panel_io.hpp"
#include "panelardl/threshold_search.hpp"

namespace panelardl {

using json = nlohmann::ordered_json;

/// A number rounded to 12 significant digits; non-finite values become null.
inline json num(double v) {
  if (!std::isfinite(v)) return nullptr;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return std::strtod(buf, nullptr);
}

inline std::string fmt12(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline json num_array(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(num(x));
  return a;
}

// ---------------------------------------------------------------------------
// panel_io

inline json to_json(const FilterReport& r) {
  json j;
  j["firms_in"] = r.firms_in;
  j["obs_in"] = r.obs_in;
  j["stages"] = json::array();
  for (const auto& s : r.stages)
    j["stages"].push_back({{"stage", s.name},
                           {"firms_dropped", s.firms_dropped},
                           {"obs_dropped", s.obs_dropped},
                           {"firms_remaining", s.firms_remaining},
                           {"obs_remaining", s.obs_remaining}});
  j["tail_cutoffs"] = json::object();
  for (const auto& [var, lohi] : r.tail_cutoffs) j["tail_cutoffs"][var] = {num(lohi.first), num(lohi.second)};
  j["winsor_bounds"] = json::object();
  for (const auto& [var, lohi] : r.winsor_bounds) j["winsor_bounds"][var] = {num(lohi.first), num(lohi.second)};
  j["years"] = json::array();
  for (const auto& y : r.years)
    j["years"].push_back(
        {{"year", y.year}, {"firms_raw", y.firms_raw}, {"firms_pass", y.firms_pass}, {"percent_pass", num(y.percent())}});
  j["firms_out"] = r.firms_out;
  j["obs_out"] = r.obs_out;
  return j;
}

inline std::string filter_table(const FilterReport& r) {
  std::ostringstream os;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-18s %12s %12s %12s %12s\n", "stage", "firms_drop", "obs_drop", "firms_left",
                "obs_left");
  os << buf;
  std::snprintf(buf, sizeof buf, "%-18s %12s %12s %12zu %12zu\n", "input", "", "", r.firms_in, r.obs_in);
  os << buf;
  for (const auto& s : r.stages) {
    std::snprintf(buf, sizeof buf, "%-18s %12zu %12zu %12zu %12zu\n", s.name.c_str(), s.firms_dropped, s.obs_dropped,
                  s.firms_remaining, s.obs_remaining);
    os << buf;
  }
  os << "\n";
  std::snprintf(buf, sizeof buf, "%-6s %10s %10s %9s\n", "year", "firms", "passing", "pct");
  os << buf;
  for (const auto& y : r.years) {
    std::snprintf(buf, sizeof buf, "%-6d %10zu %10zu %8.1f%%\n", y.year, y.firms_raw, y.firms_pass, y.percent());
    os << buf;
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// enums and specs

inline const char* to_string(Dynamics d) { return d == Dynamics::PanARDL ? "panardl" : "partial_adjustment"; }
inline const char* to_string(ThresholdMode m) { return m == ThresholdMode::Single ? "single" : "two"; }

inline json to_json(const ModelSpec& s) {
  return {{"p", s.p},
          {"dynamics", to_string(s.dynamics)},
          {"threshold_mode", to_string(s.threshold_mode)},
          {"ft_proxy", s.ft_proxy},
          {"policies", s.policies},
          {"controls", s.controls},
          {"min_obs_after_lags", s.min_obs_after_lags}};
}

inline json to_json(const ThresholdParams& t) { return {{"gamma_pre", num(t.gamma_pre)}, {"gamma_post", num(t.gamma_post)}}; }

// ---------------------------------------------------------------------------
// estimator

inline json to_json(const FitResult& f, bool include_vcov = false) {
  json j;
  if (f.spec) j["spec"] = to_json(*f.spec);
  if (f.thresholds) j["thresholds"] = to_json(*f.thresholds);
  j["vcov_kind"] = to_string(f.vcov_kind);
  j["nobs"] = f.nobs;
  j["n_firms"] = f.n_firms;
  j["n_quarters"] = f.n_quarters;
  j["dof"] = f.dof;
  j["ssr"] = num(f.ssr);
  j["coefficients"] = json::array();
  for (std::size_t k = 0; k < f.labels.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    j["coefficients"].push_back({{"label", f.labels[k]},
                                 {"estimate", num(f.coefficients(i))},
                                 {"std_error", num(std::sqrt(std::max(0.0, f.vcov(i, i))))}});
  }
  j["dropped_columns"] = f.dropped_columns;
  if (include_vcov) {
    json v = json::array();
    for (Eigen::Index r = 0; r < f.vcov.rows(); ++r) {
      json row = json::array();
      for (Eigen::Index c = 0; c < f.vcov.cols(); ++c) row.push_back(num(f.vcov(r, c)));
      v.push_back(std::move(row));
    }
    j["vcov"] = std::move(v);
  }
  return j;
}

/// Two-sided normal p-value of a t ratio.
inline double normal_p_value(double t) { return std::erfc(std::abs(t) / std::sqrt(2.0)); }

inline std::string stars(double estimate, double se) {
  if (!(se > 0.0)) return "";
  const double p = normal_p_value(estimate / se);
  return p < 0.01 ? "***" : p < 0.05 ? "**" : p < 0.10 ? "*" : "";
}

/// Coefficient with stars, standard error in parentheses underneath.
inline std::string regression_table(const FitResult& f, const std::string& title = "") {
  std::ostringstream os;
  char buf[200];
  if (!title.empty()) os << title << "\n";
  std::size_t width = 12;
  for (const auto& l : f.labels) width = std::max(width, l.size());
  const int w = static_cast<int>(width);
  for (std::size_t k = 0; k < f.labels.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    const double se = std::sqrt(std::max(0.0, f.vcov(i, i)));
    std::snprintf(buf, sizeof buf, "%-*s %12.4f%-3s\n", w, f.labels[k].c_str(), f.coefficients(i),
                  stars(f.coefficients(i), se).c_str());
    os << buf;
    std::snprintf(buf, sizeof buf, "%-*s %5s(%.4f)\n", w, "", "", se);
    os << buf;
  }
  std::snprintf(buf, sizeof buf, "%-*s %12zu\n%-*s %12zu\n%-*s %12.6g\n", w, "observations", f.nobs, w, "firms",
                f.n_firms, w, "SSR", f.ssr);
  os << buf;
  os << "standard errors: " << to_string(f.vcov_kind) << " (*** p<0.01, ** p<0.05, * p<0.1)\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// threshold_search

inline json to_json(const GridResult& r) {
  json j;
  j["mode"] = to_string(r.mode);
  j["best"] = to_json(r.best);
  j["best_ssr"] = num(r.best_ssr);
  j["nobs"] = r.nobs;
  j["grid_points"] = r.surface.size();
  j["degenerate_points"] = r.degenerate_points;
  j["ties"] = json::array();
  for (const auto& t : r.ties) j["ties"].push_back(to_json(t));
  return j;
}

// ---------------------------------------------------------------------------
// effects

inline json to_json(const DeltaResult& d) { return {{"value", num(d.value)}, {"std_error", num(d.std_error)}}; }

inline json to_json(const DynamicsSummary& s) {
  json j;
  j["net_short_run"] = to_json(s.net_sr);
  j["long_run"] = to_json(s.long_run);
  j["mean_lag"] = num(s.mean_lag);
  j["half_life"] = s.half_life ? json(*s.half_life) : json(nullptr);
  j["horizon"] = s.horizon;
  j["phi"] = num_array(s.phi);
  j["rho"] = num_array(s.rho);
  j["warnings"] = s.warnings;
  return j;
}

inline void write_lag_profile_csv(const DynamicsSummary& s, std::ostream& out) {
  out << "h,phi,rho\n";
  for (std::size_t h = 0; h < s.phi.size(); ++h) out << h << ',' << fmt12(s.phi[h]) << ',' << fmt12(s.rho[h]) << '\n';
}

inline json to_json(const PolicyEffectReport& r) {
  json j;
  j["policy"] = r.policy;
  j["coefficient"] = num(r.coefficient);
  j["weight_kind"] = to_string(r.kind);
  j["national"] = num(r.national);
  j["per_industry"] = json::object();
  for (const auto& [k, v] : r.per_industry) j["per_industry"][k] = num(v);
  j["weights"] = json::object();
  for (const auto& [k, v] : r.weights) j["weights"][k] = num(v);
  j["warnings"] = r.warnings;
  return j;
}

/// Time average of each industry's per-quarter median y.
inline std::map<std::string, double> industry_median_leverage(const PanelDataset& ds) {
  const CrossSection cs(ds);
  std::map<std::string, double> out;
  for (std::size_t s = 0; s < ds.n_groups(); ++s) {
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t t = 0; t < cs.n_quarters(); ++t) {
      const auto& cell = cs.industry(s, cs.t_min() + static_cast<int>(t));
      if (cell.empty()) continue;
      sum += quantile_sorted(cell, 0.5);
      ++n;
    }
    if (n > 0) out[ds.group_labels[s]] = sum / static_cast<double>(n);
  }
  return out;
}

/// PE_s bars ordered from the highest to the lowest industry median leverage.
inline void write_policy_effect_csv(const PolicyEffectReport& r, const PanelDataset& ds, std::ostream& out) {
  const auto med = industry_median_leverage(ds);
  std::vector<std::pair<std::string, double>> rows(r.per_industry.begin(), r.per_industry.end());
  std::stable_sort(rows.begin(), rows.end(), [&](const auto& a, const auto& b) { return med.at(a.first) > med.at(b.first); });
  out << "industry,median_leverage,policy_effect\n";
  for (const auto& [label, pe] : rows) out << label << ',' << fmt12(med.at(label)) << ',' << fmt12(pe) << '\n';
}

inline json to_json(const FTest& t) {
  return {{"f", num(t.f)}, {"dof_num", t.dof_num}, {"dof_den", t.dof_den}, {"p_value", num(t.p_value)}};
}

// ---------------------------------------------------------------------------
// jackknife

inline json to_json(const JackknifeResult& r) {
  json j;
  j["coefficients"] = json::array();
  for (std::size_t k = 0; k < r.labels.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    j["coefficients"].push_back({{"label", r.labels[k]},
                                 {"corrected", num(r.corrected(i))},
                                 {"full", num(r.full.coefficients(i))},
                                 {"half_a", num(r.half_a.coefficients(i))},
                                 {"half_b", num(r.half_b.coefficients(i))},
                                 {"std_error", num(r.se(i))}});
  }
  j["nobs"] = {{"full", r.full.nobs}, {"half_a", r.half_a.nobs}, {"half_b", r.half_b.nobs}};
  j["warnings"] = r.warnings;
  return j;
}

inline std::string jackknife_table(const JackknifeResult& r) {
  std::ostringstream os;
  char buf[200];
  std::size_t width = 12;
  for (const auto& l : r.labels) width = std::max(width, l.size());
  const int w = static_cast<int>(width);
  std::snprintf(buf, sizeof buf, "%-*s %12s %12s %12s\n", w, "coefficient", "FE-TE", "jackknife", "std_error");
  os << buf;
  for (std::size_t k = 0; k < r.labels.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    std::snprintf(buf, sizeof buf, "%-*s %12.4f %12.4f %12.4f\n", w, r.labels[k].c_str(), r.full.coefficients(i),
                  r.corrected(i), r.se(i));
    os << buf;
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// dgp_sim

inline json to_json(const DgpConfig& c) {
  return {{"n_firms", c.n_firms},
          {"n_industries", c.n_industries},
          {"n_quarters", c.n_quarters},
          {"burn_in", c.burn_in},
          {"policy_start", c.policy_start},
          {"lambda", num_array(c.lambda)},
          {"beta0", num_array(c.beta0)},
          {"beta1", num_array(c.beta1)},
          {"control_coefs", num_array(c.control_coefs)},
          {"phi", num_array(c.phi)},
          {"gamma_pre", num(c.gamma_pre)},
          {"gamma_post", num(c.gamma_post)},
          {"leverage_center", num(c.leverage_center)},
          {"industry_spread", num(c.industry_spread)},
          {"firm_sd", num(c.firm_sd)},
          {"time_sd", num(c.time_sd)},
          {"error_sd", num(c.error_sd)},
          {"policy_level", num(c.policy_level)},
          {"unbalanced", c.unbalanced},
          {"exit_hazard", num(c.exit_hazard)},
          {"entry_fraction", num(c.entry_fraction)},
          {"min_run", c.min_run},
          {"seed", c.seed}};
}

inline json to_json(const DgpTruth& t) {
  return {{"config", to_json(t.config)},
          {"net_short_run", num(t.net_short_run)},
          {"long_run", num(t.long_run)},
          {"gamma_pre", num(t.config.gamma_pre)},
          {"gamma_post", num(t.config.gamma_post)}};
}

/// Reads a DgpConfig, taking defaults for absent keys.
inline DgpConfig dgp_config_from_json(const json& j) {
  DgpConfig c;
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key) && !j[key].is_null()) field = j[key].get<std::decay_t<decltype(field)>>();
  };
  get("n_firms", c.n_firms);
  get("n_industries", c.n_industries);
  get("n_quarters", c.n_quarters);
  get("burn_in", c.burn_in);
  get("policy_start", c.policy_start);
  get("lambda", c.lambda);
  get("beta0", c.beta0);
  get("beta1", c.beta1);
  get("control_coefs", c.control_coefs);
  get("phi", c.phi);
  get("gamma_pre", c.gamma_pre);
  get("gamma_post", c.gamma_post);
  get("leverage_center", c.leverage_center);
  get("industry_spread", c.industry_spread);
  get("firm_sd", c.firm_sd);
  get("time_sd", c.time_sd);
  get("error_sd", c.error_sd);
  get("policy_level", c.policy_level);
  get("unbalanced", c.unbalanced);
  get("exit_hazard", c.exit_hazard);
  get("entry_fraction", c.entry_fraction);
  get("min_run", c.min_run);
  get("seed", c.seed);
  return c;
}

}  // namespace panelardl
