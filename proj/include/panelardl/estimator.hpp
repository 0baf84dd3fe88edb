#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "panelardl/debt_capacity.hpp"
#include "panelardl/design.hpp"
#include "panelardl/error.hpp"

namespace panelardl {

enum class VcovKind { Classical, HeteroRobust, ClusterByFirm };

inline const char* to_string(VcovKind k) {
  switch (k) {
    case VcovKind::Classical: return "classical";
    case VcovKind::HeteroRobust: return "hetero_robust";
    case VcovKind::ClusterByFirm: return "cluster_by_firm";
  }
  return "?";
}

struct FitResult {
  std::vector<std::string> labels;
  Eigen::VectorXd coefficients;
  Eigen::MatrixXd vcov;
  double ssr = 0.0;
  std::size_t nobs = 0;
  std::size_t n_firms = 0;
  std::size_t n_quarters = 0;
  std::size_t dof = 0;
  Eigen::VectorXd residuals;
  VcovKind vcov_kind = VcovKind::ClusterByFirm;
  std::map<std::string, std::vector<std::size_t>> column_groups;
  std::vector<std::string> dropped_columns;
  std::vector<std::string> industry_labels;
  std::optional<ModelSpec> spec;
  std::optional<ThresholdParams> thresholds;

  [[nodiscard]] std::size_t index(const std::string& label) const {
    for (std::size_t j = 0; j < labels.size(); ++j)
      if (labels[j] == label) return j;
    throw UsageError("unknown coefficient '" + label + "'");
  }
  [[nodiscard]] double coef(const std::string& label) const {
    return coefficients(static_cast<Eigen::Index>(index(label)));
  }
  [[nodiscard]] double se(const std::string& label) const {
    const auto j = static_cast<Eigen::Index>(index(label));
    return std::sqrt(std::max(0.0, vcov(j, j)));
  }
  [[nodiscard]] const std::vector<std::size_t>& group(const std::string& name) const {
    auto it = column_groups.find(name);
    if (it == column_groups.end() || it->second.empty())
      throw UsageError("unknown or empty coefficient group '" + name + "'");
    return it->second;
  }
};

struct FitOptions {
  /// Count absorbed firm and quarter effects in the degrees of freedom.
  bool absorbed_effects = true;
  /// Relative pivot threshold for rank detection in the QR factorization.
  double rank_tol = 1e-10;
};

/**
 * @brief Least squares on an (absorbed) design via column-pivoted QR.
 *
 * Degrees of freedom: nobs - k - F - Q + 1 when the design carries absorbed
 * firm (F) and quarter (Q) effects, which is the residual dof of the
 * dummy-saturated regression. HC1 scales by nobs/dof. The firm-clustered
 * sandwich scales by G/(G-1) * (nobs-1)/(nobs-k-Q): firm effects are nested
 * in the clusters and are not counted there.
 */
inline FitResult fit_ols(const DesignMatrix& dm, VcovKind kind = VcovKind::ClusterByFirm, const FitOptions& opt = {}) {
  const Eigen::MatrixXd& X = dm.regressors;
  const auto n = X.rows();
  const auto k = X.cols();
  if (n == 0 || k == 0) throw EstimationError("empty design");

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  qr.setThreshold(opt.rank_tol);
  if (qr.rank() < k) {
    std::string cols;
    for (Eigen::Index j = qr.rank(); j < k; ++j) {
      if (!cols.empty()) cols += ", ";
      cols += dm.labels[static_cast<std::size_t>(qr.colsPermutation().indices()(j))];
    }
    throw EstimationError("rank-deficient design; linearly dependent columns: " + cols);
  }

  FitResult fit;
  fit.labels = dm.labels;
  fit.column_groups = dm.column_groups;
  fit.dropped_columns = dm.demeaning.dropped_columns;
  fit.industry_labels = dm.industry_labels;
  fit.vcov_kind = kind;
  fit.coefficients = qr.solve(dm.response);
  fit.residuals = dm.response - X * fit.coefficients;
  fit.ssr = fit.residuals.squaredNorm();
  fit.nobs = static_cast<std::size_t>(n);
  fit.n_firms = dm.n_distinct_firms();
  fit.n_quarters = dm.n_distinct_quarters();

  const std::size_t absorbed = opt.absorbed_effects ? fit.n_firms + fit.n_quarters - 1 : 0;
  const std::size_t params = static_cast<std::size_t>(k) + absorbed;
  if (fit.nobs <= params) throw EstimationError("no residual degrees of freedom");
  fit.dof = fit.nobs - params;

  // (X'X)^{-1} = P R^{-1} R^{-T} P'
  const Eigen::MatrixXd R = qr.matrixR().topLeftCorner(k, k).triangularView<Eigen::Upper>();
  const Eigen::MatrixXd Rinv =
      R.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(k, k));
  const Eigen::MatrixXd inner = Rinv * Rinv.transpose();
  const auto& perm = qr.colsPermutation();
  const Eigen::MatrixXd bread = perm * inner * perm.transpose();

  switch (kind) {
    case VcovKind::Classical:
      fit.vcov = bread * (fit.ssr / static_cast<double>(fit.dof));
      break;
    case VcovKind::HeteroRobust: {
      const Eigen::MatrixXd Xe = X.array().colwise() * fit.residuals.array();
      const Eigen::MatrixXd meat = Xe.transpose() * Xe;
      fit.vcov = bread * meat * bread * (static_cast<double>(fit.nobs) / static_cast<double>(fit.dof));
      break;
    }
    case VcovKind::ClusterByFirm: {
      std::map<std::size_t, Eigen::VectorXd> score;
      for (Eigen::Index i = 0; i < n; ++i) {
        auto [it, inserted] = score.try_emplace(dm.row_firm[static_cast<std::size_t>(i)], Eigen::VectorXd::Zero(k));
        it->second += X.row(i).transpose() * fit.residuals(i);
      }
      Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(k, k);
      for (const auto& [firm, s] : score) meat.selfadjointView<Eigen::Lower>().rankUpdate(s);
      meat = meat.selfadjointView<Eigen::Lower>();
      const double G = static_cast<double>(score.size());
      const double nn = static_cast<double>(fit.nobs);
      const double nonnested = static_cast<double>(k) + (opt.absorbed_effects ? static_cast<double>(fit.n_quarters) : 0.0);
      if (G < 2.0 || nn <= nonnested) throw EstimationError("too few clusters for a firm-clustered variance");
      const double factor = G / (G - 1.0) * (nn - 1.0) / (nn - nonnested);
      fit.vcov = bread * meat * bread * factor;
      break;
    }
  }
  fit.vcov = 0.5 * (fit.vcov + fit.vcov.transpose());
  return fit;
}

// ---------------------------------------------------------------------------
// Delta method

/// A scalar function of the coefficient vector with its analytic gradient.
struct CoefficientTransform {
  std::function<double(const Eigen::VectorXd&)> value;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> gradient;
};

struct DeltaResult {
  double value = 0.0;
  double std_error = 0.0;
};

struct DeltaOptions {
#ifdef NDEBUG
  bool check_gradient = false;
#else
  bool check_gradient = true;
#endif
  double fd_relative_tol = 1e-5;
};

/// Central differences with step 1e-6 * max(1, |b_j|).
inline Eigen::VectorXd finite_difference_gradient(const std::function<double(const Eigen::VectorXd&)>& fn,
                                                  const Eigen::VectorXd& b) {
  Eigen::VectorXd g(b.size());
  Eigen::VectorXd x = b;
  for (Eigen::Index j = 0; j < b.size(); ++j) {
    const double h = 1e-6 * std::max(1.0, std::abs(b(j)));
    x(j) = b(j) + h;
    const double up = fn(x);
    x(j) = b(j) - h;
    const double down = fn(x);
    x(j) = b(j);
    g(j) = (up - down) / (2.0 * h);
  }
  return g;
}

/// Relative mismatch between two gradients, measured against the larger one.
inline double gradient_mismatch(const Eigen::VectorXd& analytic, const Eigen::VectorXd& numeric) {
  const double scale = std::max({analytic.cwiseAbs().maxCoeff(), numeric.cwiseAbs().maxCoeff(), 1e-300});
  return (analytic - numeric).cwiseAbs().maxCoeff() / scale;
}

inline DeltaResult delta_method(const Eigen::VectorXd& b, const Eigen::MatrixXd& V, const CoefficientTransform& g,
                                const DeltaOptions& opt = {}) {
  const Eigen::VectorXd grad = g.gradient(b);
  if (!grad.allFinite()) throw SingularityError("transform gradient is not finite at the estimate");
  if (opt.check_gradient) {
    const Eigen::VectorXd fd = finite_difference_gradient(g.value, b);
    if (gradient_mismatch(grad, fd) > opt.fd_relative_tol)
      throw EstimationError("analytic gradient disagrees with finite differences");
  }
  DeltaResult r;
  r.value = g.value(b);
  r.std_error = std::sqrt(std::max(0.0, grad.dot(V * grad)));
  return r;
}

inline DeltaResult delta_method(const FitResult& fit, const CoefficientTransform& g, const DeltaOptions& opt = {}) {
  return delta_method(fit.coefficients, fit.vcov, g, opt);
}

/// Weighted sum of coefficients, a linear transform.
inline CoefficientTransform linear_transform(Eigen::VectorXd weights) {
  return {[w = weights](const Eigen::VectorXd& b) { return w.dot(b); },
          [w = weights](const Eigen::VectorXd&) { return w; }};
}

/**
 * Sum of the numerator coefficients over one minus the sum of the
 * denominator coefficients: the long-run multiplier.
 */
inline CoefficientTransform ratio_transform(std::vector<std::size_t> numerator, std::vector<std::size_t> denominator) {
  auto sums = [=](const Eigen::VectorXd& b) {
    double sn = 0.0, sd = 0.0;
    for (std::size_t j : numerator) sn += b(static_cast<Eigen::Index>(j));
    for (std::size_t j : denominator) sd += b(static_cast<Eigen::Index>(j));
    return std::pair{sn, 1.0 - sd};
  };
  return {[=](const Eigen::VectorXd& b) {
            const auto [sn, den] = sums(b);
            return sn / den;
          },
          [=](const Eigen::VectorXd& b) {
            const auto [sn, den] = sums(b);
            if (den == 0.0) throw SingularityError("long-run transform undefined: 1 - sum(lambda) = 0");
            Eigen::VectorXd g = Eigen::VectorXd::Zero(b.size());
            for (std::size_t j : numerator) g(static_cast<Eigen::Index>(j)) += 1.0 / den;
            for (std::size_t j : denominator) g(static_cast<Eigen::Index>(j)) += sn / (den * den);
            return g;
          }};
}

}  // namespace panelardl
