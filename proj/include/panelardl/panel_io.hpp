#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "panelardl/error.hpp"
#include "panelardl/quantile.hpp"

namespace panelardl {

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

/// One firm-quarter record, materialized on demand from the columnar store.
struct Observation {
  std::string firm_id;
  int industry_code = 0;
  int quarter = 0;
  double y = kMissing;
  std::map<std::string, double> controls;
};

/**
 * @brief Unbalanced firm-by-quarter panel in columnar layout.
 *
 * Rows are sorted by (firm index, quarter). Firm indices follow the
 * lexicographic order of firm ids. Missing numeric cells are NaN.
 */
struct PanelDataset {
  std::vector<std::string> firm_ids;       ///< firm index -> id
  std::vector<int> firm_industry_code;     ///< firm index -> 3-digit code
  std::vector<std::size_t> firm_group;     ///< firm index -> industry group
  std::vector<std::string> group_labels;   ///< group index -> label

  std::vector<std::size_t> firm;           ///< per row
  std::vector<int> quarter;                ///< per row
  std::vector<double> y;                   ///< per row
  std::vector<std::string> control_names;
  std::vector<std::vector<double>> controls;  ///< [control][row]

  [[nodiscard]] std::size_t n_obs() const { return y.size(); }
  [[nodiscard]] std::size_t n_firms() const { return firm_ids.size(); }
  [[nodiscard]] std::size_t n_groups() const { return group_labels.size(); }

  [[nodiscard]] int t_min() const {
    return quarter.empty() ? 0 : *std::min_element(quarter.begin(), quarter.end());
  }
  [[nodiscard]] int t_max() const {
    return quarter.empty() ? 0 : *std::max_element(quarter.begin(), quarter.end());
  }

  [[nodiscard]] std::size_t group_of_row(std::size_t row) const {
    return firm_group[firm[row]];
  }

  /// Row offsets per firm: rows of firm f are [offsets[f], offsets[f+1]).
  [[nodiscard]] std::vector<std::size_t> firm_offsets() const {
    std::vector<std::size_t> off(n_firms() + 1, 0);
    for (std::size_t f : firm) ++off[f + 1];
    std::partial_sum(off.begin(), off.end(), off.begin());
    return off;
  }

  [[nodiscard]] std::optional<std::size_t> control_index(std::string_view name) const {
    for (std::size_t c = 0; c < control_names.size(); ++c)
      if (control_names[c] == name) return c;
    return std::nullopt;
  }

  /// Values of a named variable ("y" or a control) for every row.
  [[nodiscard]] const std::vector<double>& variable(std::string_view name) const {
    if (name == "y") return y;
    if (auto c = control_index(name)) return controls[*c];
    throw SchemaError("unknown variable '" + std::string(name) + "'");
  }
  std::vector<double>& variable(std::string_view name) {
    return const_cast<std::vector<double>&>(std::as_const(*this).variable(name));
  }

  [[nodiscard]] Observation observation(std::size_t row) const {
    Observation o;
    o.firm_id = firm_ids[firm[row]];
    o.industry_code = firm_industry_code[firm[row]];
    o.quarter = quarter[row];
    o.y = y[row];
    for (std::size_t c = 0; c < control_names.size(); ++c)
      o.controls.emplace(control_names[c], controls[c][row]);
    return o;
  }

  /// Row subset (ascending row indices), dropping firms left without rows.
  [[nodiscard]] PanelDataset subset(const std::vector<std::size_t>& rows) const;

  /// Observation-level equality; group assignment is ignored.
  friend bool same_observations(const PanelDataset& a, const PanelDataset& b) {
    auto eq = [](double u, double v) { return (std::isnan(u) && std::isnan(v)) || u == v; };
    if (a.n_obs() != b.n_obs() || a.control_names != b.control_names) return false;
    for (std::size_t r = 0; r < a.n_obs(); ++r) {
      if (a.firm_ids[a.firm[r]] != b.firm_ids[b.firm[r]] || a.quarter[r] != b.quarter[r] ||
          a.firm_industry_code[a.firm[r]] != b.firm_industry_code[b.firm[r]] || !eq(a.y[r], b.y[r]))
        return false;
      for (std::size_t c = 0; c < a.controls.size(); ++c)
        if (!eq(a.controls[c][r], b.controls[c][r])) return false;
    }
    return true;
  }
};

namespace detail {

/// Assigns every distinct 3-digit code its own group, ordered by code.
inline void assign_code_groups(PanelDataset& ds) {
  std::set<int> codes(ds.firm_industry_code.begin(), ds.firm_industry_code.end());
  std::map<int, std::size_t> index;
  ds.group_labels.clear();
  for (int c : codes) {
    index[c] = ds.group_labels.size();
    ds.group_labels.push_back(std::to_string(c));
  }
  ds.firm_group.resize(ds.n_firms());
  for (std::size_t f = 0; f < ds.n_firms(); ++f) ds.firm_group[f] = index[ds.firm_industry_code[f]];
}

}  // namespace detail

inline PanelDataset PanelDataset::subset(const std::vector<std::size_t>& rows) const {
  PanelDataset out;
  out.control_names = control_names;
  out.controls.assign(controls.size(), {});
  out.group_labels = group_labels;
  std::vector<std::size_t> remap(n_firms(), std::numeric_limits<std::size_t>::max());
  for (std::size_t r : rows) {
    const std::size_t f = firm[r];
    if (remap[f] == std::numeric_limits<std::size_t>::max()) {
      remap[f] = out.firm_ids.size();
      out.firm_ids.push_back(firm_ids[f]);
      out.firm_industry_code.push_back(firm_industry_code[f]);
      out.firm_group.push_back(firm_group[f]);
    }
    out.firm.push_back(remap[f]);
    out.quarter.push_back(quarter[r]);
    out.y.push_back(y[r]);
    for (std::size_t c = 0; c < controls.size(); ++c) out.controls[c].push_back(controls[c][r]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV ingestion

/// Column names of the panel CSV. Empty `controls` means "every other column".
struct PanelSchema {
  std::string firm = "firm";
  std::string industry = "industry";
  std::string quarter = "quarter";
  std::string y = "y";
  std::vector<std::string> controls;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur.push_back('"');
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cur.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(std::move(cur));
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

inline bool is_missing_token(std::string_view s) {
  return s.empty() || s == "NA" || s == "na" || s == "NaN" || s == "nan" || s == ".";
}

/// Parses a real number; std::nullopt on garbage. Missing tokens give NaN.
inline std::optional<double> parse_real(std::string_view raw) {
  const std::string_view s = trim(raw);
  if (is_missing_token(s)) return kMissing;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::optional<int> parse_int(std::string_view raw) {
  const std::string_view s = trim(raw);
  int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

}  // namespace detail

/// Maps "2007Q1"-style labels to year*4 + (quarter-1); plain integers pass through.
inline std::optional<int> parse_quarter(std::string_view raw) {
  const std::string_view s = detail::trim(raw);
  if (auto v = detail::parse_int(s)) return v;
  const auto q = s.find_first_of("Qq");
  if (q == std::string_view::npos || q + 2 != s.size()) return std::nullopt;
  const auto year = detail::parse_int(s.substr(0, q));
  const auto qn = detail::parse_int(s.substr(q + 1));
  if (!year || !qn || *qn < 1 || *qn > 4) return std::nullopt;
  return *year * 4 + (*qn - 1);
}

/// Calendar year bucket of a quarter index (inverse of the "YYYYQn" mapping).
inline int quarter_year(int quarter) {
  return quarter >= 0 ? quarter / 4 : -((-quarter + 3) / 4);
}

/// Reads a panel CSV from a stream. Rows come back sorted by (firm, quarter).
inline PanelDataset parse_panel(std::istream& in, const PanelSchema& schema = {}) {
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("panel CSV is empty (no header)");
  const auto header = detail::split_csv_line(line);
  std::unordered_map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col.emplace(std::string(detail::trim(header[i])), i);

  auto require = [&](const std::string& name) {
    auto it = col.find(name);
    if (it == col.end()) throw SchemaError("missing required column '" + name + "'");
    return it->second;
  };
  const std::size_t c_firm = require(schema.firm);
  const std::size_t c_ind = require(schema.industry);
  const std::size_t c_q = require(schema.quarter);
  const std::size_t c_y = require(schema.y);

  std::vector<std::string> control_names = schema.controls;
  if (control_names.empty()) {
    for (const auto& h : header) {
      const std::string name(detail::trim(h));
      if (name != schema.firm && name != schema.industry && name != schema.quarter && name != schema.y)
        control_names.push_back(name);
    }
  }
  std::vector<std::size_t> c_ctrl;
  for (const auto& name : control_names) c_ctrl.push_back(require(name));

  struct Raw {
    std::string firm;
    int code;
    int quarter;
    double y;
    std::vector<double> controls;
  };
  std::vector<Raw> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size())
      throw ParseError("row " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                       " fields, got " + std::to_string(cells.size()));
    Raw r;
    r.firm = std::string(detail::trim(cells[c_firm]));
    if (r.firm.empty()) throw ParseError("row " + std::to_string(line_no) + ": empty firm id");
    const auto code = detail::parse_int(cells[c_ind]);
    if (!code) throw ParseError("row " + std::to_string(line_no) + ": non-numeric industry code");
    r.code = *code;
    const auto q = parse_quarter(cells[c_q]);
    if (!q) throw ParseError("row " + std::to_string(line_no) + ": unparseable quarter '" + cells[c_q] + "'");
    r.quarter = *q;
    const auto y = detail::parse_real(cells[c_y]);
    if (!y) throw ParseError("row " + std::to_string(line_no) + ": non-numeric " + schema.y + " '" + cells[c_y] + "'");
    r.y = *y;
    for (std::size_t k = 0; k < c_ctrl.size(); ++k) {
      const auto v = detail::parse_real(cells[c_ctrl[k]]);
      if (!v)
        throw ParseError("row " + std::to_string(line_no) + ": non-numeric " + control_names[k] + " '" +
                         cells[c_ctrl[k]] + "'");
      r.controls.push_back(*v);
    }
    rows.push_back(std::move(r));
  }

  std::stable_sort(rows.begin(), rows.end(), [](const Raw& a, const Raw& b) {
    return std::tie(a.firm, a.quarter) < std::tie(b.firm, b.quarter);
  });

  PanelDataset ds;
  ds.control_names = control_names;
  ds.controls.assign(control_names.size(), {});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Raw& r = rows[i];
    if (ds.firm_ids.empty() || ds.firm_ids.back() != r.firm) {
      ds.firm_ids.push_back(r.firm);
      ds.firm_industry_code.push_back(r.code);
    } else if (ds.quarter.back() == r.quarter) {
      throw DuplicateError("duplicate observation for firm '" + r.firm + "' quarter " + std::to_string(r.quarter));
    } else if (ds.firm_industry_code.back() != r.code) {
      throw ParseError("firm '" + r.firm + "' changes industry code across quarters");
    }
    ds.firm.push_back(ds.firm_ids.size() - 1);
    ds.quarter.push_back(r.quarter);
    ds.y.push_back(r.y);
    for (std::size_t k = 0; k < r.controls.size(); ++k) ds.controls[k].push_back(r.controls[k]);
  }
  detail::assign_code_groups(ds);
  return ds;
}

inline PanelDataset load_panel(const std::string& path, const PanelSchema& schema = {}) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open panel file '" + path + "'");
  return parse_panel(in, schema);
}

namespace detail {
inline std::string format_exact(double v) {
  if (std::isnan(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
}  // namespace detail

/// Writes the panel in the same CSV layout parse_panel reads (full precision).
inline void write_panel(const PanelDataset& ds, std::ostream& out) {
  out << "firm,industry,quarter,y";
  for (const auto& c : ds.control_names) out << ',' << c;
  out << '\n';
  for (std::size_t r = 0; r < ds.n_obs(); ++r) {
    out << ds.firm_ids[ds.firm[r]] << ',' << ds.firm_industry_code[ds.firm[r]] << ',' << ds.quarter[r] << ','
        << detail::format_exact(ds.y[r]);
    for (const auto& col : ds.controls) out << ',' << detail::format_exact(col[r]);
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Sample-selection filters

struct FilterConfig {
  std::size_t min_consecutive = 5;
  double leverage_lo = 0.0;
  double leverage_hi = 1.0;
  /// Variables whose extreme tails cause the whole firm to be dropped.
  std::vector<std::string> tail_vars;
  double tail_lo = 0.0005;
  double tail_hi = 0.9995;
  /// Variables clamped to [winsor_lo, winsor_hi] percentiles after the drops.
  std::vector<std::string> winsor_vars;
  double winsor_lo = 0.01;
  double winsor_hi = 0.99;
};

struct FilterStage {
  std::string name;
  std::size_t firms_dropped = 0;
  std::size_t obs_dropped = 0;
  std::size_t firms_remaining = 0;
  std::size_t obs_remaining = 0;
};

struct YearPass {
  int year = 0;
  std::size_t firms_raw = 0;
  std::size_t firms_pass = 0;
  [[nodiscard]] double percent() const {
    return firms_raw == 0 ? 0.0 : 100.0 * static_cast<double>(firms_pass) / static_cast<double>(firms_raw);
  }
};

struct FilterReport {
  std::size_t firms_in = 0;
  std::size_t obs_in = 0;
  std::vector<FilterStage> stages;
  std::vector<YearPass> years;
  /// Pooled cutoffs used at the tail-drop and winsorization stages.
  std::map<std::string, std::pair<double, double>> tail_cutoffs;
  std::map<std::string, std::pair<double, double>> winsor_bounds;
  std::size_t firms_out = 0;
  std::size_t obs_out = 0;
};

namespace detail {

inline std::vector<double> pooled_sorted(const PanelDataset& ds, const std::string& var) {
  std::vector<double> v;
  for (double x : ds.variable(var))
    if (!std::isnan(x)) v.push_back(x);
  std::sort(v.begin(), v.end());
  return v;
}

template <typename KeepFirm>
PanelDataset keep_firms(const PanelDataset& ds, KeepFirm keep) {
  std::vector<std::size_t> rows;
  for (std::size_t r = 0; r < ds.n_obs(); ++r)
    if (keep(ds.firm[r])) rows.push_back(r);
  return ds.subset(rows);
}

}  // namespace detail

/**
 * @brief Applies the sample-selection cascade in its fixed order.
 *
 * 1. drop firms with a missing required value (y or any control);
 * 2. keep each firm's longest consecutive quarter run (earliest on ties),
 *    dropping firms whose run is shorter than min_consecutive;
 * 3. drop firms with any y outside [leverage_lo, leverage_hi];
 * 4. drop firms holding any tail_vars value strictly beyond the pooled
 *    tail percentiles (computed once on the post-stage-3 sample);
 * 5. winsorize winsor_vars at pooled percentiles of the post-stage-4 sample.
 */
inline std::pair<PanelDataset, FilterReport> apply_filters(const PanelDataset& raw, const FilterConfig& cfg = {}) {
  FilterReport rep;
  rep.firms_in = raw.n_firms();
  rep.obs_in = raw.n_obs();

  auto record = [&rep](std::string name, const PanelDataset& before, const PanelDataset& after) {
    rep.stages.push_back({std::move(name), before.n_firms() - after.n_firms(), before.n_obs() - after.n_obs(),
                          after.n_firms(), after.n_obs()});
  };

  // 1. missing values
  std::vector<bool> complete(raw.n_firms(), true);
  for (std::size_t r = 0; r < raw.n_obs(); ++r) {
    bool ok = !std::isnan(raw.y[r]);
    for (const auto& col : raw.controls) ok = ok && !std::isnan(col[r]);
    if (!ok) complete[raw.firm[r]] = false;
  }
  PanelDataset s1 = detail::keep_firms(raw, [&](std::size_t f) { return complete[f]; });
  record("missing_values", raw, s1);

  // 2. longest consecutive run
  std::vector<std::size_t> rows;
  {
    const auto off = s1.firm_offsets();
    for (std::size_t f = 0; f < s1.n_firms(); ++f) {
      std::size_t best_start = off[f], best_len = 0;
      std::size_t start = off[f];
      for (std::size_t r = off[f]; r < off[f + 1]; ++r) {
        if (r > off[f] && s1.quarter[r] != s1.quarter[r - 1] + 1) start = r;
        const std::size_t len = r - start + 1;
        if (len > best_len) {
          best_len = len;
          best_start = start;
        }
      }
      if (best_len >= cfg.min_consecutive)
        for (std::size_t r = best_start; r < best_start + best_len; ++r) rows.push_back(r);
    }
  }
  PanelDataset s2 = s1.subset(rows);
  record("consecutive_run", s1, s2);

  // 3. leverage bounds
  std::vector<bool> in_bounds(s2.n_firms(), true);
  for (std::size_t r = 0; r < s2.n_obs(); ++r)
    if (s2.y[r] < cfg.leverage_lo || s2.y[r] > cfg.leverage_hi) in_bounds[s2.firm[r]] = false;
  PanelDataset s3 = detail::keep_firms(s2, [&](std::size_t f) { return in_bounds[f]; });
  record("leverage_bounds", s2, s3);

  // 4. tail drops on pooled percentiles
  std::vector<bool> no_outlier(s3.n_firms(), true);
  for (const auto& var : cfg.tail_vars) {
    const auto sorted = detail::pooled_sorted(s3, var);
    if (sorted.empty()) continue;
    const double lo = quantile_sorted(sorted, cfg.tail_lo);
    const double hi = quantile_sorted(sorted, cfg.tail_hi);
    rep.tail_cutoffs[var] = {lo, hi};
    const auto& v = s3.variable(var);
    for (std::size_t r = 0; r < s3.n_obs(); ++r)
      if (v[r] < lo || v[r] > hi) no_outlier[s3.firm[r]] = false;
  }
  PanelDataset s4 = detail::keep_firms(s3, [&](std::size_t f) { return no_outlier[f]; });
  record("tail_outliers", s3, s4);

  // 5. winsorization
  PanelDataset s5 = s4;
  for (const auto& var : cfg.winsor_vars) {
    const auto sorted = detail::pooled_sorted(s4, var);
    if (sorted.empty()) continue;
    const double lo = quantile_sorted(sorted, cfg.winsor_lo);
    const double hi = quantile_sorted(sorted, cfg.winsor_hi);
    rep.winsor_bounds[var] = {lo, hi};
    for (double& x : s5.variable(var)) x = std::clamp(x, lo, hi);
  }
  record("winsorize", s4, s5);

  if (s5.n_obs() == 0) throw FilterError("no observations survive the filter cascade");

  // per-year pass rates
  std::map<int, std::set<std::string>> raw_years, pass_years;
  for (std::size_t r = 0; r < raw.n_obs(); ++r) raw_years[quarter_year(raw.quarter[r])].insert(raw.firm_ids[raw.firm[r]]);
  for (std::size_t r = 0; r < s5.n_obs(); ++r) pass_years[quarter_year(s5.quarter[r])].insert(s5.firm_ids[s5.firm[r]]);
  for (const auto& [year, firms] : raw_years) rep.years.push_back({year, firms.size(), pass_years[year].size()});

  rep.firms_out = s5.n_firms();
  rep.obs_out = s5.n_obs();
  return {std::move(s5), std::move(rep)};
}

// ---------------------------------------------------------------------------
// Industry grouping

/// SIC division letter for a 2-digit major group.
inline char sic_division(int two_digit) {
  if (two_digit >= 1 && two_digit <= 9) return 'A';
  if (two_digit <= 14 && two_digit >= 10) return 'B';
  if (two_digit <= 17 && two_digit >= 15) return 'C';
  if (two_digit <= 39 && two_digit >= 20) return 'D';
  if (two_digit <= 49 && two_digit >= 40) return 'E';
  if (two_digit <= 51 && two_digit >= 50) return 'F';
  if (two_digit <= 59 && two_digit >= 52) return 'G';
  if (two_digit <= 67 && two_digit >= 60) return 'H';
  if (two_digit <= 89 && two_digit >= 70) return 'I';
  if (two_digit <= 99 && two_digit >= 91) return 'J';
  return 'Z';
}

/**
 * @brief Groups firms into industries with at least `min_firms` members.
 *
 * 3-digit codes with enough firms stand alone. The rest pool into a
 * "<2-digit>x-others" residual; a residual still below the minimum is pushed
 * into its SIC division's "div-<letter>-others" group, which is kept at any
 * size. Groups are ordered by their smallest member code.
 */
inline PanelDataset group_industries(const PanelDataset& ds, std::size_t min_firms = 20) {
  std::map<int, std::size_t> firms_per_code;
  for (int code : ds.firm_industry_code) ++firms_per_code[code];

  std::map<int, std::string> label_of;   // code -> group label
  std::map<int, std::vector<int>> small_by_family;
  for (const auto& [code, n] : firms_per_code) {
    if (n >= min_firms) label_of[code] = std::to_string(code);
    else small_by_family[code / 10].push_back(code);
  }
  for (const auto& [family, codes] : small_by_family) {
    std::size_t total = 0;
    for (int c : codes) total += firms_per_code[c];
    std::string label;
    if (total >= min_firms) label = std::to_string(family) + "x-others";
    else label = std::string("div-") + sic_division(family) + "-others";
    for (int c : codes) label_of[c] = label;
  }

  std::map<std::string, int> first_code;
  for (const auto& [code, label] : label_of) {
    auto it = first_code.find(label);
    if (it == first_code.end()) first_code.emplace(label, code);
  }
  std::vector<std::pair<int, std::string>> order;
  for (const auto& [label, code] : first_code) order.emplace_back(code, label);
  std::sort(order.begin(), order.end());

  PanelDataset out = ds;
  out.group_labels.clear();
  std::map<std::string, std::size_t> index;
  for (const auto& [code, label] : order) {
    index[label] = out.group_labels.size();
    out.group_labels.push_back(label);
  }
  for (std::size_t f = 0; f < out.n_firms(); ++f) out.firm_group[f] = index[label_of[out.firm_industry_code[f]]];
  return out;
}

}  // namespace panelardl
