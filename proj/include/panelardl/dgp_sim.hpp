#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "panelardl/debt_capacity.hpp"
#include "panelardl/error.hpp"
#include "panelardl/panel_io.hpp"
#include "panelardl/quantile.hpp"

namespace panelardl {

/**
 * @brief Stateless counter-based normal draws.
 *
 * Each draw is a pure function of (seed, stream, i, t), so the order in
 * which draws are made never changes the values.
 */
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

  [[nodiscard]] double uniform(std::uint64_t stream, std::uint64_t i, std::uint64_t t, std::uint64_t k = 0) const {
    std::uint64_t h = mix(seed_ ^ mix(stream + 0x9E3779B97F4A7C15ULL));
    h = mix(h ^ mix(i + 0x632BE59BD9B4E019ULL));
    h = mix(h ^ mix(t + 0x8CB92BA72F3D8DD7ULL));
    h = mix(h ^ mix(k + 0xD6E8FEB86659FD93ULL));
    return (static_cast<double>(h >> 11) + 0.5) * 0x1.0p-53;
  }

  [[nodiscard]] double normal(std::uint64_t stream, std::uint64_t i, std::uint64_t t) const {
    const double u1 = uniform(stream, i, t, 0);
    const double u2 = uniform(stream, i, t, 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }
  std::uint64_t seed_;
};

struct DgpConfig {
  std::size_t n_firms = 200;
  std::size_t n_industries = 5;
  std::size_t n_quarters = 40;
  std::size_t burn_in = 50;
  /// First policy-on quarter (1-based); the window runs to the last quarter.
  std::size_t policy_start = 21;

  std::vector<double> lambda = {0.5};
  std::vector<double> beta0 = {0.05, 0.0};
  std::vector<double> beta1 = {0.05, 0.0};
  std::vector<double> control_coefs = {};
  /// Industry loadings on the trend f_t = t/T; must sum to zero (or be empty).
  std::vector<double> phi = {};
  double gamma_pre = 0.6;
  double gamma_post = 0.6;

  double leverage_center = 0.3;
  double industry_spread = 0.2;   ///< range of industry mean leverage
  double firm_sd = 0.08;          ///< firm-effect dispersion, scaled per industry
  double time_sd = 0.01;
  double error_sd = 0.01;
  double policy_level = 100.0;    ///< raw purchases are policy_level * U(0.5, 1.5)

  bool unbalanced = false;
  double exit_hazard = 0.04;
  double entry_fraction = 0.3;    ///< entry quarter drawn from the first fraction of the sample
  std::size_t min_run = 5;

  std::uint64_t seed = 1;

  void validate() const {
    double sl = 0.0;
    for (double l : lambda) sl += l;
    if (sl >= 1.0) throw UsageError("DGP requires sum(lambda) < 1");
    double sp = 0.0;
    for (double v : phi) sp += v;
    if (!phi.empty() && (phi.size() != n_industries || std::abs(sp) > 1e-12))
      throw UsageError("DGP phi must have one loading per industry and sum to zero");
    if (!(gamma_pre > 0.0 && gamma_pre < 1.0 && gamma_post > 0.0 && gamma_post < 1.0))
      throw UsageError("DGP thresholds must lie inside (0, 1)");
    if (n_firms < 2 || n_industries < 1 || n_quarters < 2 || policy_start < 1 || policy_start > n_quarters)
      throw UsageError("DGP dimensions are inconsistent");
    if (unbalanced && min_run > n_quarters) throw UsageError("DGP min_run exceeds the sample length");
  }
};

struct DgpTruth {
  DgpConfig config;
  double net_short_run = 0.0;   ///< sum(beta1)
  double long_run = 0.0;        ///< sum(beta1) / (1 - sum(lambda))
  /// pi_{s,t}(gamma_post) for observed quarters, [industry][t-1].
  std::vector<std::vector<double>> pi_post;
};

struct DgpOutput {
  PanelDataset panel;
  PolicySeries policy;
  DgpTruth truth;
};

/// Industry code assigned to simulated industry k.
inline int dgp_industry_code(std::size_t k) { return 100 + static_cast<int>(k); }

/**
 * @brief Forward simulation of the threshold PanARDL model.
 *
 * y_it = (1 - sum(lambda)) mu_i + delta_t + phi_s f_t + sum lambda_l y_{t-l}
 *        + sum beta0_l pi_{s,t-1-l}(gamma_pre)
 *        + sum beta1_l q_{t-l} pi_{s,t-1-l}(gamma_post) + x_it' c + u_it
 *
 * pi is recomputed every quarter from the simulated cross-section of firms
 * present in that quarter, with the same quantile rule the estimator uses.
 */
inline DgpOutput simulate(const DgpConfig& cfg) {
  cfg.validate();
  const CounterRng rng(cfg.seed);
  enum Stream : std::uint64_t { kError = 1, kTime, kFirm, kPolicy, kEntry, kExit, kControl = 100 };

  const std::size_t N = cfg.n_firms, S = cfg.n_industries, T = cfg.n_quarters, B = cfg.burn_in;
  const std::size_t total = B + T;   // simulated quarters, index k -> quarter k - B + 1
  double sum_lambda = 0.0;
  for (double l : cfg.lambda) sum_lambda += l;

  std::vector<std::size_t> industry(N);
  std::vector<double> mu(N);
  for (std::size_t i = 0; i < N; ++i) {
    industry[i] = i % S;
    const double pos = S > 1 ? static_cast<double>(industry[i]) / static_cast<double>(S - 1) - 0.5 : 0.0;
    const double spread = cfg.firm_sd * (0.5 + (S > 1 ? static_cast<double>(industry[i]) / static_cast<double>(S - 1) : 0.5));
    mu[i] = cfg.leverage_center + cfg.industry_spread * pos + spread * rng.normal(kFirm, i, 0);
  }

  // observation window per firm, in observed quarters 1..T
  std::vector<std::size_t> first(N, 1), last(N, T);
  if (cfg.unbalanced) {
    const std::size_t max_entry = std::max<std::size_t>(
        1, std::min(T - cfg.min_run + 1, 1 + static_cast<std::size_t>(cfg.entry_fraction * static_cast<double>(T))));
    for (std::size_t i = 0; i < N; ++i) {
      first[i] = 1 + static_cast<std::size_t>(rng.uniform(kEntry, i, 0) * static_cast<double>(max_entry));
      first[i] = std::min(first[i], max_entry);
      std::size_t extra = 0;
      while (first[i] + cfg.min_run + extra <= T && rng.uniform(kExit, i, extra) >= cfg.exit_hazard) ++extra;
      last[i] = std::min(T, first[i] + cfg.min_run - 1 + extra);
    }
  }

  PolicySeries policy;
  policy.name = "q";
  for (std::size_t t = 1; t <= T; ++t) {
    const bool on = t >= cfg.policy_start;
    policy.raw[static_cast<int>(t)] = on ? cfg.policy_level * (0.5 + rng.uniform(kPolicy, 0, t)) : 0.0;
    if (on) policy.policy_on.insert(static_cast<int>(t));
  }
  const ScaledPolicy q = scale_policy(policy);

  std::vector<std::vector<double>> y(total, std::vector<double>(N, 0.0));
  std::vector<std::vector<double>> pi_pre(total, std::vector<double>(S, 0.0));
  std::vector<std::vector<double>> pi_post(total, std::vector<double>(S, 0.0));
  std::vector<std::vector<double>> x(cfg.control_coefs.size(), std::vector<double>(N * T, 0.0));

  auto present = [&](std::size_t i, std::size_t k) {
    if (k < B) return true;
    const std::size_t t = k - B + 1;
    return t >= first[i] && t <= last[i];
  };

  std::vector<double> cross;
  std::vector<std::vector<double>> cells(S);
  for (std::size_t k = 0; k < total; ++k) {
    const long quarter = static_cast<long>(k) - static_cast<long>(B) + 1;   // <= 0 during burn-in
    const bool observed = quarter >= 1;
    const double delta = observed ? cfg.time_sd * rng.normal(kTime, 0, static_cast<std::uint64_t>(quarter)) : 0.0;
    const double ft = observed ? static_cast<double>(quarter) / static_cast<double>(T) : 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      double v = (1.0 - sum_lambda) * mu[i] + delta;
      if (!cfg.phi.empty()) v += cfg.phi[industry[i]] * ft;
      for (std::size_t l = 1; l <= cfg.lambda.size(); ++l)
        v += cfg.lambda[l - 1] * (k >= l ? y[k - l][i] : mu[i]);
      for (std::size_t l = 0; l < cfg.beta0.size(); ++l)
        if (k >= l + 1) v += cfg.beta0[l] * pi_pre[k - 1 - l][industry[i]];
      for (std::size_t l = 0; l < cfg.beta1.size(); ++l)
        if (k >= l + 1 && quarter - static_cast<long>(l) >= 1)
          v += cfg.beta1[l] * q.at(static_cast<int>(quarter - static_cast<long>(l))) * pi_post[k - 1 - l][industry[i]];
      if (observed)
        for (std::size_t c = 0; c < cfg.control_coefs.size(); ++c) {
          const double xv = rng.normal(kControl + c, i, static_cast<std::uint64_t>(quarter));
          x[c][i * T + static_cast<std::size_t>(quarter - 1)] = xv;
          v += cfg.control_coefs[c] * xv;
        }
      v += cfg.error_sd * rng.normal(kError, i, static_cast<std::uint64_t>(k));
      if (!std::isfinite(v) || std::abs(v) > 1e6) throw StabilityError("simulated series exploded");
      y[k][i] = v;
    }
    // proportions from the cross-section present at this quarter
    cross.clear();
    for (auto& c : cells) c.clear();
    for (std::size_t i = 0; i < N; ++i)
      if (present(i, k)) {
        cross.push_back(y[k][i]);
        cells[industry[i]].push_back(y[k][i]);
      }
    std::sort(cross.begin(), cross.end());
    for (auto& c : cells) std::sort(c.begin(), c.end());
    const double g_pre = quantile_sorted(cross, cfg.gamma_pre);
    const double g_post = quantile_sorted(cross, cfg.gamma_post);
    for (std::size_t s = 0; s < S; ++s) {
      const auto& c = cells[s];
      if (c.empty()) {
        pi_pre[k][s] = pi_post[k][s] = 0.0;
        continue;
      }
      const auto n = static_cast<double>(c.size());
      pi_pre[k][s] = static_cast<double>(std::lower_bound(c.begin(), c.end(), g_pre) - c.begin()) / n;
      pi_post[k][s] = static_cast<double>(std::lower_bound(c.begin(), c.end(), g_post) - c.begin()) / n;
    }
  }

  DgpOutput out;
  PanelDataset& ds = out.panel;
  for (std::size_t c = 0; c < cfg.control_coefs.size(); ++c) ds.control_names.push_back("x" + std::to_string(c + 1));
  ds.controls.assign(cfg.control_coefs.size(), {});
  // firm ids zero-padded so lexicographic order matches simulation order
  const std::size_t width = std::to_string(N).size();
  for (std::size_t i = 0; i < N; ++i) {
    std::string id = std::to_string(i + 1);
    id = "f" + std::string(width - id.size(), '0') + id;
    ds.firm_ids.push_back(id);
    ds.firm_industry_code.push_back(dgp_industry_code(industry[i]));
    for (std::size_t t = first[i]; t <= last[i]; ++t) {
      ds.firm.push_back(i);
      ds.quarter.push_back(static_cast<int>(t));
      ds.y.push_back(y[B + t - 1][i]);
      for (std::size_t c = 0; c < cfg.control_coefs.size(); ++c) ds.controls[c].push_back(x[c][i * T + t - 1]);
    }
  }
  detail::assign_code_groups(ds);

  out.policy = std::move(policy);
  out.truth.config = cfg;
  for (double b : cfg.beta1) out.truth.net_short_run += b;
  out.truth.long_run = out.truth.net_short_run / (1.0 - sum_lambda);
  out.truth.pi_post.assign(S, std::vector<double>(T, 0.0));
  for (std::size_t s = 0; s < S; ++s)
    for (std::size_t t = 1; t <= T; ++t) out.truth.pi_post[s][t - 1] = pi_post[B + t - 1][s];
  return out;
}

}  // namespace panelardl
