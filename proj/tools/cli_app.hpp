#pragma once

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "panelardl/panelardl.hpp"

namespace panelardl::cli {

namespace fs = std::filesystem;

/// Flags and config-file settings for one invocation.
struct RunConfig {
  std::string subcommand;
  std::string panel;
  std::vector<std::string> policies;   ///< "name=path" or "path"
  std::string policy_total;
  std::string weights = "equal";
  std::string macro;
  std::vector<std::string> controls;

  std::size_t p = 2;
  std::string dynamics = "panardl";
  std::string mode = "single";
  std::optional<double> gamma_pre;
  std::optional<double> gamma_post;
  std::string thresholds_file;
  std::string ft = "trend";
  std::string vcov = "cluster";
  std::size_t min_t = 1;
  std::size_t group_min_firms = 20;

  double grid_lo = 0.25;
  double grid_hi = 0.90;
  double grid_step = 0.01;

  FilterConfig filter;

  std::string out = ".";
  std::string truth;
  std::string dgp;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> n_firms;
  std::optional<std::size_t> n_quarters;
  std::optional<std::size_t> n_industries;
  unsigned threads = 0;
};

namespace detail {

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw UsageError("failed writing '" + path.string() + "'");
}

inline void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

inline json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError("'" + path + "': " + e.what());
  }
}

template <typename Fn>
std::string capture(Fn&& fn) {
  std::ostringstream os;
  fn(os);
  return os.str();
}

inline VcovKind parse_vcov(const std::string& s) {
  if (s == "classical") return VcovKind::Classical;
  if (s == "hc1" || s == "robust") return VcovKind::HeteroRobust;
  if (s == "cluster") return VcovKind::ClusterByFirm;
  throw UsageError("--vcov must be classical, hc1 or cluster");
}

}  // namespace detail

/// Everything the estimation stages share once inputs are loaded.
struct Inputs {
  PanelDataset panel;
  std::vector<PolicySeries> raw_policies;
  std::vector<ScaledPolicy> policies;
  std::vector<CommonFactor> factors;
  ModelSpec spec;
  VcovKind vcov = VcovKind::ClusterByFirm;
  unsigned threads = 1;
};

inline Inputs load_inputs(const RunConfig& rc) {
  if (rc.panel.empty()) throw UsageError("--panel is required");
  Inputs in;
  PanelSchema schema;
  schema.controls = rc.controls;
  in.panel = load_panel(rc.panel, schema);
  if (rc.group_min_firms > 0) in.panel = group_industries(in.panel, rc.group_min_firms);

  std::optional<PolicySeries> total;
  if (!rc.policy_total.empty()) total = load_policy(rc.policy_total, "total");
  for (const auto& arg : rc.policies) {
    const auto eq = arg.find('=');
    const std::string path = eq == std::string::npos ? arg : arg.substr(eq + 1);
    const std::string name = eq == std::string::npos ? fs::path(path).stem().string() : arg.substr(0, eq);
    in.raw_policies.push_back(load_policy(path, name));
    in.policies.push_back(scale_policy(in.raw_policies.back(), total ? &*total : nullptr));
    in.spec.policies.push_back(name);
  }

  in.spec.p = rc.p;
  if (rc.dynamics == "panardl")
    in.spec.dynamics = Dynamics::PanARDL;
  else if (rc.dynamics == "partial" || rc.dynamics == "partial_adjustment")
    in.spec.dynamics = Dynamics::PartialAdjustment;
  else
    throw UsageError("--dynamics must be panardl or partial");
  if (rc.mode == "single")
    in.spec.threshold_mode = ThresholdMode::Single;
  else if (rc.mode == "two")
    in.spec.threshold_mode = ThresholdMode::Two;
  else
    throw UsageError("--mode must be single or two");
  in.spec.controls = rc.controls;
  in.spec.min_obs_after_lags = rc.min_t;

  // --ft trend | none | macro:<col> | both:<col>
  in.spec.ft_proxy.clear();
  const std::string& ft = rc.ft;
  const bool want_trend = ft == "trend" || ft.rfind("both:", 0) == 0;
  std::string macro_col;
  if (ft.rfind("macro:", 0) == 0) macro_col = ft.substr(6);
  if (ft.rfind("both:", 0) == 0) macro_col = ft.substr(5);
  if (!want_trend && macro_col.empty() && ft != "none")
    throw UsageError("--ft must be trend, none, macro:<col> or both:<col>");
  if (want_trend) {
    in.factors.push_back(trend_factor(in.panel.t_min(), in.panel.t_max()));
    in.spec.ft_proxy.push_back("trend");
  }
  if (!macro_col.empty()) {
    if (rc.macro.empty()) throw UsageError("--ft " + ft + " needs --macro <csv>");
    std::ifstream m(rc.macro);
    if (!m) throw UsageError("cannot open macro file '" + rc.macro + "'");
    std::string line;
    std::getline(m, line);
    const auto header = panelardl::detail::split_csv_line(line);
    std::size_t cq = header.size(), cv = header.size();
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (panelardl::detail::trim(header[i]) == "quarter") cq = i;
      if (panelardl::detail::trim(header[i]) == macro_col) cv = i;
    }
    if (cq == header.size() || cv == header.size())
      throw SchemaError("macro CSV needs columns 'quarter' and '" + macro_col + "'");
    CommonFactor f{macro_col, {}};
    std::size_t line_no = 1;
    while (std::getline(m, line)) {
      ++line_no;
      if (panelardl::detail::trim(line).empty()) continue;
      const auto cells = panelardl::detail::split_csv_line(line);
      const auto q = cells.size() > cq ? parse_quarter(cells[cq]) : std::nullopt;
      const auto v = cells.size() > cv ? panelardl::detail::parse_real(cells[cv]) : std::nullopt;
      if (!q || !v) throw ParseError("macro row " + std::to_string(line_no) + ": malformed values");
      if (!std::isnan(*v)) f.values[*q] = *v;
    }
    in.factors.push_back(std::move(f));
    in.spec.ft_proxy.push_back(macro_col);
  }
  in.spec.validate();
  in.vcov = detail::parse_vcov(rc.vcov);
  in.threads = resolve_threads(rc.threads);
  return in;
}

inline GridSpec grid_spec(const RunConfig& rc, ThresholdMode mode) {
  GridSpec g;
  g.lo = rc.grid_lo;
  g.hi = rc.grid_hi;
  g.step = rc.grid_step;
  g.mode = mode;
  return g;
}

/// Output of a stage: files to write plus a human-readable summary.
struct StageOutput {
  std::vector<std::pair<std::string, std::string>> files;
  std::string summary;
};

inline GridResult stage_grid(const RunConfig& rc, const Inputs& in, StageOutput& out) {
  SearchOptions opt;
  opt.threads = in.threads;
  const GridResult r = grid_search(in.panel, in.policies, in.factors, in.spec, grid_spec(rc, in.spec.threshold_mode), opt);
  json j = to_json(r);
  j["spec"] = to_json(in.spec);
  out.files.emplace_back("thresholds.json", j.dump(2) + "\n");
  out.files.emplace_back("ssr_surface.csv", detail::capture([&](std::ostream& os) { write_surface_csv(r, os); }));
  std::ostringstream s;
  s << "threshold search (" << to_string(r.mode) << "): gamma_pre=" << fmt12(r.best.gamma_pre)
    << " gamma_post=" << fmt12(r.best.gamma_post) << " ssr=" << fmt12(r.best_ssr) << " nobs=" << r.nobs << "\n";
  if (r.degenerate_points > 0) s << "  degenerate grid points: " << r.degenerate_points << "\n";
  if (r.ties.size() > 1) s << "  tied grid points: " << r.ties.size() << "\n";
  out.summary += s.str();
  return r;
}

/// Thresholds from flags, a thresholds.json, or a fresh grid search.
inline ThresholdParams resolve_thresholds(const RunConfig& rc, const Inputs& in, StageOutput& out) {
  if (rc.gamma_pre || rc.gamma_post) {
    ThresholdParams t;
    t.gamma_pre = rc.gamma_pre.value_or(*rc.gamma_post);
    t.gamma_post = rc.gamma_post.value_or(t.gamma_pre);
    if (in.spec.threshold_mode == ThresholdMode::Single && t.gamma_pre != t.gamma_post)
      throw UsageError("single-threshold mode needs gamma_pre == gamma_post");
    t.validate();
    return t;
  }
  if (!rc.thresholds_file.empty()) {
    const json j = detail::read_json(rc.thresholds_file);
    const json& best = j.contains("best") ? j["best"] : j;
    ThresholdParams t{best.at("gamma_pre").get<double>(), best.at("gamma_post").get<double>()};
    t.validate();
    return t;
  }
  return stage_grid(rc, in, out).best;
}

inline FitResult fit_at(const Inputs& in, const ThresholdParams& t) {
  const CrossSection cs(in.panel);
  const DesignLayout layout(in.panel, cs, in.policies, in.factors, in.spec);
  const DesignMatrix dm = absorb_two_way(layout.build(cs.capacity(t.gamma_pre), cs.capacity(t.gamma_post)));
  FitResult fit = fit_ols(dm, in.vcov);
  fit.spec = in.spec;
  fit.thresholds = t;
  return fit;
}

inline FitResult stage_estimate(const RunConfig& rc, const Inputs& in, const ThresholdParams& t, StageOutput& out) {
  const FitResult fit = fit_at(in, t);
  out.files.emplace_back("fit.json", to_json(fit, true).dump(2) + "\n");
  const std::string table = regression_table(fit, "FE-TE estimates");
  out.files.emplace_back("regression.txt", table);
  std::ostringstream s;
  s << "thresholds: gamma_pre=" << fmt12(t.gamma_pre) << " gamma_post=" << fmt12(t.gamma_post) << "\n" << table;

  if (!rc.truth.empty()) {
    const json truth = detail::read_json(rc.truth);
    json rec;
    if (!in.policies.empty()) {
      const std::string group = "policy:" + in.policies.front().name;
      const DeltaResult sr = net_short_run(fit, group);
      const double true_sr = truth.at("net_short_run").get<double>();
      rec["net_short_run"] = {{"estimate", num(sr.value)}, {"std_error", num(sr.std_error)}, {"truth", num(true_sr)},
                              {"z", num((sr.value - true_sr) / sr.std_error)},
                              {"within_3se", std::abs(sr.value - true_sr) <= 3.0 * sr.std_error}};
      try {
        const DeltaResult lr = long_run(fit, group);
        const double true_lr = truth.at("long_run").get<double>();
        rec["long_run"] = {{"estimate", num(lr.value)}, {"std_error", num(lr.std_error)}, {"truth", num(true_lr)},
                           {"z", num((lr.value - true_lr) / lr.std_error)},
                           {"within_3se", std::abs(lr.value - true_lr) <= 3.0 * lr.std_error}};
      } catch (const NonstationaryError& e) {
        rec["long_run"] = {{"error", e.what()}};
      }
    }
    const double step = rc.grid_step;
    for (const char* key : {"gamma_pre", "gamma_post"}) {
      const double est = std::string(key) == "gamma_pre" ? t.gamma_pre : t.gamma_post;
      const double tv = truth.at(key).get<double>();
      rec[key] = {{"estimate", num(est)}, {"truth", num(tv)}, {"within_one_step", std::abs(est - tv) <= step + 1e-9}};
    }
    out.files.emplace_back("recovery.json", rec.dump(2) + "\n");
    s << "recovery diagnostics:\n";
    for (const auto& [k, v] : rec.items()) s << "  " << k << ": " << v.dump() << "\n";
  }
  out.summary += s.str();
  return fit;
}

inline std::map<std::string, double> load_weights(const RunConfig& rc, const PanelDataset& ds, WeightKind& kind) {
  if (rc.weights == "equal") {
    kind = WeightKind::Equal;
    return equal_weights(ds.group_labels);
  }
  if (rc.weights == "size") {
    kind = WeightKind::Size;
    return size_weights(ds);
  }
  kind = WeightKind::Employment;
  std::ifstream f(rc.weights);
  if (!f) throw UsageError("--weights must be equal, size or a CSV path; cannot open '" + rc.weights + "'");
  std::string line;
  std::getline(f, line);
  const auto header = panelardl::detail::split_csv_line(line);
  if (header.size() < 2 || panelardl::detail::trim(header[0]) != "industry" || panelardl::detail::trim(header[1]) != "weight")
    throw SchemaError("weights CSV needs columns 'industry,weight'");
  std::map<std::string, double> w;
  std::size_t line_no = 1;
  while (std::getline(f, line)) {
    ++line_no;
    if (panelardl::detail::trim(line).empty()) continue;
    const auto cells = panelardl::detail::split_csv_line(line);
    const auto v = cells.size() > 1 ? panelardl::detail::parse_real(cells[1]) : std::nullopt;
    if (!v || std::isnan(*v)) throw ParseError("weights row " + std::to_string(line_no) + ": malformed weight");
    w[std::string(panelardl::detail::trim(cells[0]))] = *v;
  }
  return w;
}

inline void stage_effects(const RunConfig& rc, const Inputs& in, const FitResult& fit, StageOutput& out) {
  json j;
  j["thresholds"] = to_json(*fit.thresholds);
  std::ostringstream s;
  const CrossSection cs(in.panel);
  const CapacityPanel post = cs.capacity(fit.thresholds->gamma_post);
  WeightKind kind = WeightKind::Equal;
  const auto weights = load_weights(rc, in.panel, kind);
  j["policies"] = json::object();
  for (const auto& q : in.policies) {
    const std::string group = "policy:" + q.name;
    json pj;
    try {
      const DynamicsSummary d = dynamics_summary(fit, group);
      pj["dynamics"] = to_json(d);
      out.files.emplace_back("lag_profile_" + q.name + ".csv",
                             detail::capture([&](std::ostream& os) { write_lag_profile_csv(d, os); }));
      s << "policy " << q.name << ": net short-run " << fmt12(d.net_sr.value) << " (" << fmt12(d.net_sr.std_error)
        << "), long-run " << fmt12(d.long_run.value) << " (" << fmt12(d.long_run.std_error) << "), mean lag "
        << fmt12(d.mean_lag) << ", half-life " << (d.half_life ? std::to_string(*d.half_life) : "n/a") << "\n";
      const PolicyEffectReport pe = policy_effects(d.net_sr.value, q, post, in.panel.group_labels, weights, kind);
      pj["policy_effects"] = to_json(pe);
      out.files.emplace_back("policy_effects_" + q.name + ".csv",
                             detail::capture([&](std::ostream& os) { write_policy_effect_csv(pe, in.panel, os); }));
      s << "  national policy effect (" << to_string(kind) << " weights): " << fmt12(pe.national) << "\n";
    } catch (const NonstationaryError& e) {
      pj["error"] = e.what();
      s << "policy " << q.name << ": " << e.what() << "\n";
    } catch (const SingularityError& e) {
      pj["error"] = e.what();
      s << "policy " << q.name << ": " << e.what() << "\n";
    }
    j["policies"][q.name] = std::move(pj);
  }

  if (!in.factors.empty() && fit.column_groups.count("industry_interactions")) {
    Inputs restricted = in;
    restricted.spec.ft_proxy.clear();
    try {
      const FitResult r = fit_at(restricted, *fit.thresholds);
      const FTest f = joint_f_test(r, fit, fit.group("industry_interactions").size());
      j["industry_interaction_test"] = to_json(f);
      s << "joint F-test on industry interactions: F=" << fmt12(f.f) << " p=" << fmt12(f.p_value) << "\n";
    } catch (const UsageError& e) {
      j["industry_interaction_test"] = {{"error", e.what()}};
    }
    json loadings = json::object();
    for (const auto& [factor, m] : industry_loadings(fit)) {
      loadings[factor] = json::object();
      for (const auto& [ind, v] : m) loadings[factor][ind] = num(v);
    }
    j["industry_loadings"] = std::move(loadings);
  }
  out.files.emplace_back("effects.json", j.dump(2) + "\n");
  out.summary += s.str();
}

inline void stage_jackknife(Inputs in, const ThresholdParams& t, StageOutput& out) {
  JackknifeOptions opt;
  opt.vcov = in.vcov;
  opt.threads = in.threads;
  in.spec.min_obs_after_lags = std::max<std::size_t>(in.spec.min_obs_after_lags, opt.min_obs);
  const JackknifeResult r = half_panel_jackknife(in.panel, in.policies, in.factors, in.spec, t, opt);
  json j = to_json(r);
  j["thresholds"] = to_json(t);
  out.files.emplace_back("jackknife.json", j.dump(2) + "\n");
  const std::string table = jackknife_table(r);
  out.files.emplace_back("jackknife.txt", table);
  out.summary += table;
  for (const auto& w : r.warnings) out.summary += "warning: " + w + "\n";
}

inline void stage_filter(const RunConfig& rc, StageOutput& out) {
  if (rc.panel.empty()) throw UsageError("--panel is required");
  PanelSchema schema;
  schema.controls = rc.controls;
  const PanelDataset raw = load_panel(rc.panel, schema);
  auto [filtered, report] = apply_filters(raw, rc.filter);
  out.files.emplace_back("filter_report.json", to_json(report).dump(2) + "\n");
  const std::string table = filter_table(report);
  out.files.emplace_back("filter_report.txt", table);
  out.files.emplace_back("panel_filtered.csv", detail::capture([&](std::ostream& os) { write_panel(filtered, os); }));
  if (rc.group_min_firms > 0) {
    const PanelDataset grouped = group_industries(filtered, rc.group_min_firms);
    std::ostringstream g;
    g << "firm,industry,group\n";
    for (std::size_t f = 0; f < grouped.n_firms(); ++f)
      g << grouped.firm_ids[f] << ',' << grouped.firm_industry_code[f] << ','
        << grouped.group_labels[grouped.firm_group[f]] << '\n';
    out.files.emplace_back("industry_groups.csv", g.str());
  }
  out.summary += table;
}

inline void stage_simulate(const RunConfig& rc, StageOutput& out) {
  DgpConfig cfg = rc.dgp.empty() ? DgpConfig{} : dgp_config_from_json(detail::read_json(rc.dgp));
  if (rc.seed) cfg.seed = *rc.seed;
  if (rc.n_firms) cfg.n_firms = *rc.n_firms;
  if (rc.n_quarters) cfg.n_quarters = *rc.n_quarters;
  if (rc.n_industries) {
    cfg.n_industries = *rc.n_industries;
    if (!cfg.phi.empty() && cfg.phi.size() != cfg.n_industries) cfg.phi.clear();
  }
  if (rc.n_quarters && cfg.policy_start > cfg.n_quarters) cfg.policy_start = cfg.n_quarters / 2 + 1;
  const DgpOutput sim = simulate(cfg);
  out.files.emplace_back("panel.csv", detail::capture([&](std::ostream& os) { write_panel(sim.panel, os); }));
  out.files.emplace_back("policy.csv", detail::capture([&](std::ostream& os) { write_policy(sim.policy, os); }));
  out.files.emplace_back("truth.json", to_json(sim.truth).dump(2) + "\n");
  std::ostringstream s;
  s << "simulated " << sim.panel.n_firms() << " firms, " << sim.panel.n_obs() << " observations, "
    << sim.panel.n_groups() << " industries (seed " << cfg.seed << ")\n";
  out.summary += s.str();
}

inline void execute(const RunConfig& rc, StageOutput& out) {
  const std::string& cmd = rc.subcommand;
  if (cmd == "simulate") return stage_simulate(rc, out);
  if (cmd == "filter") return stage_filter(rc, out);
  const Inputs in = load_inputs(rc);
  if (cmd == "grid") {
    stage_grid(rc, in, out);
  } else if (cmd == "estimate") {
    stage_estimate(rc, in, resolve_thresholds(rc, in, out), out);
  } else if (cmd == "effects") {
    const ThresholdParams t = resolve_thresholds(rc, in, out);
    const FitResult fit = fit_at(in, t);
    stage_effects(rc, in, fit, out);
  } else if (cmd == "jackknife") {
    stage_jackknife(in, resolve_thresholds(rc, in, out), out);
  } else if (cmd == "full") {
    const ThresholdParams t = stage_grid(rc, in, out).best;
    const FitResult fit = stage_estimate(rc, in, t, out);
    stage_effects(rc, in, fit, out);
  } else {
    throw UsageError("unknown subcommand '" + cmd + "'");
  }
}

inline json error_json(const std::string& kind, const std::string& code, const std::string& message) {
  return {{"error", {{"kind", kind}, {"code", code}, {"message", message}}}};
}

inline const char* kind_name(ErrorKind k) {
  switch (k) {
    case ErrorKind::Usage: return "usage";
    case ErrorKind::Data: return "data";
    case ErrorKind::Numerical: return "numerical";
  }
  return "numerical";
}

inline int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::Usage: return 1;
    case ErrorKind::Data: return 2;
    case ErrorKind::Numerical: return 3;
  }
  return 3;
}

/**
 * @brief Command-line entry point.
 *
 * Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical error.
 * Errors are written to `err` as a single JSON object.
 */
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  RunConfig rc;
  CLI::App app{"Threshold PanARDL estimation for panel data", "panelardl"};
  app.set_config("--config", "", "TOML/INI file with option values; flags on the command line win");
  app.require_subcommand(1);

  app.add_option("--panel", rc.panel, "panel CSV (firm,industry,quarter,y,<controls>)");
  app.add_option("--policy", rc.policies, "policy CSV as name=path or path; repeatable");
  app.add_option("--policy-total", rc.policy_total, "policy CSV used as the common scaling denominator");
  app.add_option("--weights", rc.weights, "industry weights: equal, size, or an industry,weight CSV");
  app.add_option("--macro", rc.macro, "CSV of observed common series (quarter,<col>...)");
  app.add_option("--controls", rc.controls, "firm-level control columns")->delimiter(',');
  app.add_option("--p", rc.p, "lag order");
  app.add_option("--dynamics", rc.dynamics, "panardl or partial");
  app.add_option("--mode", rc.mode, "single or two");
  app.add_option("--gamma-pre", rc.gamma_pre, "fixed gamma_pre");
  app.add_option("--gamma-post", rc.gamma_post, "fixed gamma_post");
  app.add_option("--thresholds", rc.thresholds_file, "thresholds.json from a previous grid run");
  app.add_option("--ft", rc.ft, "trend, none, macro:<col> or both:<col>");
  app.add_option("--vcov", rc.vcov, "classical, hc1 or cluster");
  app.add_option("--min-t", rc.min_t, "minimum usable observations per firm");
  app.add_option("--group-min-firms", rc.group_min_firms, "minimum firms per industry group (0 keeps codes)");
  app.add_option("--grid-lo", rc.grid_lo);
  app.add_option("--grid-hi", rc.grid_hi);
  app.add_option("--grid-step", rc.grid_step);
  app.add_option("--min-consecutive", rc.filter.min_consecutive);
  app.add_option("--tail-vars", rc.filter.tail_vars)->delimiter(',');
  app.add_option("--winsor-vars", rc.filter.winsor_vars)->delimiter(',');
  app.add_option("--out", rc.out, "output directory");
  app.add_option("--truth", rc.truth, "truth.json from simulate, for recovery diagnostics");
  app.add_option("--dgp", rc.dgp, "JSON simulation config");
  app.add_option("--seed", rc.seed);
  app.add_option("--n-firms", rc.n_firms);
  app.add_option("--n-quarters", rc.n_quarters);
  app.add_option("--n-industries", rc.n_industries);
  app.add_option("--threads", rc.threads, "worker cap (default: PANELARDL_THREADS, else all cores)");

  for (const char* name : {"simulate", "filter", "grid", "estimate", "effects", "jackknife", "full"})
    app.add_subcommand(name)->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << error_json("usage", "usage", e.what()).dump() << "\n";
    return 1;
  }
  rc.subcommand = app.get_subcommands().front()->get_name();

  try {
    StageOutput result;
    execute(rc, result);
    fs::create_directories(rc.out);
    for (const auto& [name, text] : result.files) detail::write_text(fs::path(rc.out) / name, text);
    detail::write_text(fs::path(rc.out) / (rc.subcommand + "_summary.txt"), result.summary);
    out << result.summary;
    return 0;
  } catch (const Error& e) {
    err << error_json(kind_name(e.kind()), e.code(), e.what()).dump() << "\n";
    return exit_code(e.kind());
  } catch (const fs::filesystem_error& e) {
    err << error_json("usage", "io", e.what()).dump() << "\n";
    return 1;
  } catch (const json::exception& e) {
    err << error_json("data", "parse", e.what()).dump() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << error_json("numerical", "internal", e.what()).dump() << "\n";
    return 3;
  }
}

}  // namespace panelardl::cli
