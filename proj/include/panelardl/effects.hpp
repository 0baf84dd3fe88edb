#pragma once

#include <Eigen/Dense>
#include <boost/math/distributions/fisher_f.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "panelardl/debt_capacity.hpp"
#include "panelardl/error.hpp"
#include "panelardl/estimator.hpp"

namespace panelardl {

// ---------------------------------------------------------------------------
// Short- and long-run effects

/// Sum of a coefficient group (e.g. "policy:q") with its standard error.
inline DeltaResult net_short_run(const FitResult& fit, const std::string& group) {
  Eigen::VectorXd w = Eigen::VectorXd::Zero(fit.coefficients.size());
  for (std::size_t j : fit.group(group)) w(static_cast<Eigen::Index>(j)) = 1.0;
  DeltaOptions opt;
  opt.check_gradient = false;
  return delta_method(fit, linear_transform(w), opt);
}

/// theta = sum(beta) / (1 - sum(lambda)).
inline double long_run_value(double sum_beta, double sum_lambda) {
  if (sum_lambda >= 1.0)
    throw NonstationaryError("sum of lagged-y coefficients is " + std::to_string(sum_lambda) + " >= 1");
  return sum_beta / (1.0 - sum_lambda);
}

inline DeltaResult long_run(const FitResult& fit, const std::string& num_group,
                            const std::string& lag_y_group = "lagged_y", const DeltaOptions& opt = {}) {
  const auto& num = fit.group(num_group);
  const auto& den = fit.group(lag_y_group);
  double sl = 0.0;
  for (std::size_t j : den) sl += fit.coefficients(static_cast<Eigen::Index>(j));
  if (sl >= 1.0) throw NonstationaryError("sum of lagged-y coefficients is " + std::to_string(sl) + " >= 1");
  return delta_method(fit, ratio_transform(num, den), opt);
}

// ---------------------------------------------------------------------------
// Distributed-lag dynamics

struct LagDistribution {
  std::vector<double> phi;   ///< impulse-response weights phi_0..phi_H
  std::vector<double> rho;   ///< phi_h / sum(phi)
  double mean_lag = 0.0;
  std::size_t horizon = 0;
  std::vector<std::string> warnings;
};

/**
 * @brief Inverts lambda(L) to get the distributed-lag weights.
 *
 * phi_0 = beta_0 and phi_h = beta_h + sum_{j=1..h} lambda_j phi_{h-j},
 * with beta_h = 0 beyond the last lag and lambda_j = 0 beyond p. The series
 * is truncated at the first H >= max(4p, len(beta)-1) with
 * |phi_H| <= tail_tol * max|phi|.
 */
inline LagDistribution distributed_lag(const std::vector<double>& beta, const std::vector<double>& lambda,
                                       double tail_tol = 1e-8, std::size_t max_horizon = 1000000) {
  if (beta.empty()) throw UsageError("distributed lag needs at least one beta coefficient");
  double sl = 0.0;
  for (double l : lambda) sl += l;
  if (sl >= 1.0) throw NonstationaryError("sum of lagged-y coefficients is " + std::to_string(sl) + " >= 1");

  const std::size_t floor_h = std::max(4 * lambda.size(), beta.size() - 1);
  LagDistribution out;
  double peak = 0.0;
  for (std::size_t h = 0;; ++h) {
    double v = h < beta.size() ? beta[h] : 0.0;
    for (std::size_t j = 1; j <= std::min(h, lambda.size()); ++j) v += lambda[j - 1] * out.phi[h - j];
    out.phi.push_back(v);
    peak = std::max(peak, std::abs(v));
    if (h >= floor_h && std::abs(v) <= tail_tol * peak) break;
    if (h >= max_horizon) throw NonstationaryError("distributed-lag weights did not decay within the horizon cap");
  }
  out.horizon = out.phi.size() - 1;

  double sum = 0.0, weighted = 0.0;
  for (std::size_t h = 0; h < out.phi.size(); ++h) {
    sum += out.phi[h];
    weighted += static_cast<double>(h) * out.phi[h];
  }
  if (std::abs(sum) <= 1e-12) throw SingularityError("lag distribution undefined: sum of weights is zero");
  for (double v : out.phi) out.rho.push_back(v / sum);
  out.mean_lag = weighted / sum;
  if (std::any_of(out.phi.begin(), out.phi.end(), [](double v) { return v < 0.0; }))
    out.warnings.push_back("negative distributed-lag weights; mean lag is not a proper average delay");
  return out;
}

/// Mean lag from the generating functions: B'(1)/B(1) + sum(j lambda_j)/(1 - sum(lambda)).
inline double mean_lag_closed_form(const std::vector<double>& beta, const std::vector<double>& lambda) {
  double sb = 0.0, jb = 0.0, sl = 0.0, jl = 0.0;
  for (std::size_t j = 0; j < beta.size(); ++j) {
    sb += beta[j];
    jb += static_cast<double>(j) * beta[j];
  }
  for (std::size_t j = 0; j < lambda.size(); ++j) {
    sl += lambda[j];
    jl += static_cast<double>(j + 1) * lambda[j];
  }
  if (sl >= 1.0) throw NonstationaryError("sum of lagged-y coefficients is >= 1");
  if (sb == 0.0) throw SingularityError("mean lag undefined: sum of beta is zero");
  return jb / sb + jl / (1.0 - sl);
}

/**
 * @brief Half-life of a response profile, in periods since impact.
 *
 * With h* the (first) peak of phi, the half-life is the last index h >= h*
 * of the run starting at the peak over which phi_h >= phi_max / 2. A
 * response that halves right after an impact peak has half-life 0. When the
 * dominant response is negative the profile is mirrored first.
 */
inline std::size_t half_life(const std::vector<double>& phi) {
  if (phi.empty()) throw UsageError("half-life of an empty response");
  const auto hi = std::max_element(phi.begin(), phi.end());
  const auto lo = std::min_element(phi.begin(), phi.end());
  const double sign = *hi >= -*lo ? 1.0 : -1.0;
  const auto peak_it = sign > 0 ? hi : lo;
  const double peak = sign * *peak_it;
  if (!(peak > 0.0) || !std::isfinite(peak)) throw SingularityError("half-life undefined for an all-zero response");
  auto h = static_cast<std::size_t>(peak_it - phi.begin());
  while (h + 1 < phi.size() && sign * phi[h + 1] >= peak / 2.0) ++h;
  if (h + 1 == phi.size()) throw SingularityError("response never falls below half of its peak within the horizon");
  return h;
}

struct DynamicsSummary {
  DeltaResult net_sr;
  DeltaResult long_run;
  std::vector<double> phi;
  std::vector<double> rho;
  double mean_lag = 0.0;
  std::optional<std::size_t> half_life;
  std::size_t horizon = 0;
  std::vector<std::string> warnings;
};

/// Net short-run, long-run, lag profile, mean lag and half-life for one policy group.
inline DynamicsSummary dynamics_summary(const FitResult& fit, const std::string& num_group,
                                        const std::string& lag_y_group = "lagged_y", double tail_tol = 1e-8) {
  DynamicsSummary s;
  s.net_sr = net_short_run(fit, num_group);
  s.long_run = long_run(fit, num_group, lag_y_group);
  std::vector<double> beta, lambda;
  for (std::size_t j : fit.group(num_group)) beta.push_back(fit.coefficients(static_cast<Eigen::Index>(j)));
  for (std::size_t j : fit.group(lag_y_group)) lambda.push_back(fit.coefficients(static_cast<Eigen::Index>(j)));
  const LagDistribution ld = distributed_lag(beta, lambda, tail_tol);
  s.phi = ld.phi;
  s.rho = ld.rho;
  s.mean_lag = ld.mean_lag;
  s.horizon = ld.horizon;
  s.warnings = ld.warnings;
  try {
    s.half_life = half_life(ld.phi);
  } catch (const SingularityError& e) {
    s.warnings.push_back(e.what());
  }
  return s;
}

// ---------------------------------------------------------------------------
// Policy-effect aggregation

/**
 * PE_s = coef * mean over the policy-on window of q_t * pi_{s,t-1}.
 * Quarters where the industry has no lagged proportion are skipped;
 * industries absent throughout the window are omitted.
 */
inline std::map<std::string, double> industry_policy_effect(double coef, const ScaledPolicy& q, const CapacityPanel& post,
                                                            const std::vector<std::string>& group_labels,
                                                            std::vector<std::string>* warnings = nullptr) {
  std::map<std::string, double> out;
  for (std::size_t s = 0; s < post.n_groups; ++s) {
    double sum = 0.0;
    std::size_t n = 0;
    for (int t : q.policy_on) {
      const double pi = post.pi_at(s, t - 1);
      if (std::isnan(pi)) continue;
      sum += q.at(t) * pi;
      ++n;
    }
    if (n == 0) {
      if (warnings) warnings->push_back("industry " + group_labels[s] + " absent throughout the policy window");
      continue;
    }
    out[group_labels[s]] = coef * sum / static_cast<double>(n);
  }
  return out;
}

/**
 * PE = coef * mean over the window of q_t * sum_s w_s pi_{s,t-1}, with the
 * weights normalized to sum to one over the industries present at t-1.
 */
inline double national_policy_effect(double coef, const ScaledPolicy& q, const CapacityPanel& post,
                                      const std::vector<std::string>& group_labels,
                                      const std::map<std::string, double>& weights) {
  std::vector<double> w(post.n_groups, 0.0);
  double total = 0.0;
  for (std::size_t s = 0; s < post.n_groups; ++s) {
    auto it = weights.find(group_labels[s]);
    if (it != weights.end()) w[s] = it->second;
    if (w[s] < 0.0) throw UsageError("negative industry weight for " + group_labels[s]);
    total += w[s];
  }
  if (!(total > 0.0)) throw UsageError("industry weights are all zero");
  double sum = 0.0;
  std::size_t n = 0;
  for (int t : q.policy_on) {
    double acc = 0.0, wsum = 0.0;
    for (std::size_t s = 0; s < post.n_groups; ++s) {
      const double pi = post.pi_at(s, t - 1);
      if (std::isnan(pi) || w[s] == 0.0) continue;
      acc += w[s] * pi;
      wsum += w[s];
    }
    if (wsum == 0.0) continue;
    sum += q.at(t) * acc / wsum;
    ++n;
  }
  if (n == 0) throw MissingPeriodError("no weighted industry is observed during the policy window");
  return coef * sum / static_cast<double>(n);
}

enum class WeightKind { Equal, Size, Employment };

inline const char* to_string(WeightKind k) {
  switch (k) {
    case WeightKind::Equal: return "equal";
    case WeightKind::Size: return "size";
    case WeightKind::Employment: return "employment";
  }
  return "?";
}

inline std::map<std::string, double> equal_weights(const std::vector<std::string>& labels) {
  std::map<std::string, double> w;
  for (const auto& l : labels) w[l] = 1.0 / static_cast<double>(labels.size());
  return w;
}

/// Industry shares of firm-quarter observations.
inline std::map<std::string, double> size_weights(const PanelDataset& ds) {
  std::map<std::string, double> w;
  for (std::size_t r = 0; r < ds.n_obs(); ++r) w[ds.group_labels[ds.group_of_row(r)]] += 1.0;
  for (auto& [k, v] : w) v /= static_cast<double>(ds.n_obs());
  return w;
}

inline std::map<std::string, double> normalize_weights(std::map<std::string, double> w) {
  double total = 0.0;
  for (const auto& [k, v] : w) total += v;
  if (!(total > 0.0)) throw UsageError("industry weights are all zero");
  for (auto& [k, v] : w) v /= total;
  return w;
}

struct PolicyEffectReport {
  std::string policy;
  double coefficient = 0.0;
  std::map<std::string, double> per_industry;
  double national = 0.0;
  std::map<std::string, double> weights;
  WeightKind kind = WeightKind::Equal;
  std::vector<std::string> warnings;
};

inline PolicyEffectReport policy_effects(double coef, const ScaledPolicy& q, const CapacityPanel& post,
                                         const std::vector<std::string>& group_labels,
                                         const std::map<std::string, double>& weights, WeightKind kind) {
  PolicyEffectReport r;
  r.policy = q.name;
  r.coefficient = coef;
  r.kind = kind;
  r.per_industry = industry_policy_effect(coef, q, post, group_labels, &r.warnings);
  std::map<std::string, double> w;
  for (const auto& [label, pe] : r.per_industry) {
    auto it = weights.find(label);
    w[label] = it == weights.end() ? 0.0 : it->second;
  }
  r.weights = normalize_weights(w);
  r.national = national_policy_effect(coef, q, post, group_labels, r.weights);
  return r;
}

// ---------------------------------------------------------------------------
// Joint F-test

struct FTest {
  double f = 0.0;
  std::size_t dof_num = 0;
  std::size_t dof_den = 0;
  double p_value = 1.0;
};

/// F = ((SSR_r - SSR_u)/q) / (SSR_u / dof_u) for nested fits on the same rows.
inline FTest joint_f_test(const FitResult& restricted, const FitResult& unrestricted, std::size_t q) {
  if (q == 0) throw UsageError("F-test needs at least one restriction");
  if (restricted.nobs != unrestricted.nobs) throw UsageError("F-test fits use different samples");
  const double tol = 1e-9 * std::max(1.0, unrestricted.ssr);
  if (restricted.ssr < unrestricted.ssr - tol)
    throw UsageError("nesting violation: restricted SSR is below the unrestricted SSR");
  FTest t;
  t.dof_num = q;
  t.dof_den = unrestricted.dof;
  const double diff = std::max(0.0, restricted.ssr - unrestricted.ssr);
  t.f = (diff / static_cast<double>(q)) / (unrestricted.ssr / static_cast<double>(unrestricted.dof));
  const boost::math::fisher_f dist(static_cast<double>(t.dof_num), static_cast<double>(t.dof_den));
  t.p_value = t.f > 0.0 ? boost::math::cdf(boost::math::complement(dist, t.f)) : 1.0;
  return t;
}

/// Industry loadings phi_s per factor, restoring the base industry as minus the sum.
inline std::map<std::string, std::map<std::string, double>> industry_loadings(const FitResult& fit) {
  std::map<std::string, std::map<std::string, double>> out;
  for (const auto& [name, cols] : fit.column_groups) {
    if (name.rfind("industry:", 0) != 0 || cols.empty()) continue;
    const std::string factor = name.substr(9);
    auto& m = out[factor];
    double sum = 0.0;
    for (std::size_t j : cols) {
      const std::string& label = fit.labels[j];
      const auto open = label.rfind('[');
      const std::string industry = label.substr(open + 1, label.size() - open - 2);
      const double v = fit.coefficients(static_cast<Eigen::Index>(j));
      m[industry] = v;
      sum += v;
    }
    if (!fit.industry_labels.empty()) m[fit.industry_labels.back()] = -sum;
  }
  return out;
}

}  // namespace panelardl
