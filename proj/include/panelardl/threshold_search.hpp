#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "panelardl/debt_capacity.hpp"
#include "panelardl/design.hpp"
#include "panelardl/error.hpp"
#include "panelardl/parallel.hpp"

namespace panelardl {

struct GridSpec {
  double lo = 0.25;
  double hi = 0.90;
  double step = 0.01;
  ThresholdMode mode = ThresholdMode::Single;

  void validate() const {
    if (!(lo < hi) || !(step > 0.0) || lo <= 0.0 || hi >= 1.0)
      throw UsageError("grid requires 0 < lo < hi < 1 and step > 0");
  }
  [[nodiscard]] std::size_t size() const {
    return static_cast<std::size_t>(std::llround((hi - lo) / step)) + 1;
  }
  /// Grid values, rounded to 1e-10 so 0.25 + 35*0.01 prints as 0.6.
  [[nodiscard]] std::vector<double> points() const {
    std::vector<double> out;
    for (std::size_t i = 0; i < size(); ++i)
      out.push_back(std::round((lo + static_cast<double>(i) * step) * 1e10) / 1e10);
    return out;
  }
};

struct GridPoint {
  double gamma_pre = 0.0;
  double gamma_post = 0.0;
  double ssr = std::numeric_limits<double>::infinity();
  bool degenerate = false;
};

struct GridResult {
  ThresholdParams best;
  double best_ssr = std::numeric_limits<double>::infinity();
  ThresholdMode mode = ThresholdMode::Single;
  std::vector<GridPoint> surface;      ///< row-major: gamma_pre outer, gamma_post inner
  std::vector<ThresholdParams> ties;   ///< points within tie_tol of the minimum, best first
  std::size_t degenerate_points = 0;
  std::size_t nobs = 0;
};

struct SearchOptions {
  unsigned threads = 1;
  double tie_tol = 1e-12;
  AbsorbOptions absorb;
};

namespace detail {

/// True when every pi value in the block is 0, or every value is 1.
inline bool degenerate_block(const Eigen::MatrixXd& raw_pi) {
  return (raw_pi.array() == 0.0).all() || (raw_pi.array() == 1.0).all();
}

/// Threshold-dependent block after absorption and partialling out the fixed block.
struct PartialledBlock {
  Eigen::MatrixXd z;
  Eigen::VectorXd zy;
  Eigen::MatrixXd zz;
  bool degenerate = false;
};

/**
 * SSR of the fixed block plus threshold blocks, from Gram pieces of columns
 * already orthogonal to the fixed block (Frisch-Waugh-Lovell). The small
 * system is solved after scaling to unit diagonal with a rank-revealing QR;
 * a numerically singular block returns +inf.
 */
inline double partialled_ssr(double yy, const Eigen::MatrixXd& gram, const Eigen::VectorXd& rhs) {
  const Eigen::VectorXd d = gram.diagonal();
  if ((d.array() <= 0.0).any()) return std::numeric_limits<double>::infinity();
  const Eigen::VectorXd s = d.cwiseSqrt().cwiseInverse();
  const Eigen::MatrixXd scaled = s.asDiagonal() * gram * s.asDiagonal();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(scaled);
  qr.setThreshold(1e-10);
  if (qr.rank() < scaled.cols()) return std::numeric_limits<double>::infinity();
  const Eigen::VectorXd srhs = s.asDiagonal() * rhs;
  const Eigen::VectorXd sol = qr.solve(srhs);
  return std::max(0.0, yy - srhs.dot(sol));
}

}  // namespace detail

/**
 * @brief Grid search for the quantile threshold(s) minimizing the SSR.
 *
 * Every grid point refits the FE-TE regression with the indicators at that
 * quantile. The regression rows, the absorbed response and the absorbed
 * fixed columns do not depend on the thresholds, so they are computed once;
 * per quantile only the pi and policy-interaction columns are rebuilt,
 * absorbed and projected off the fixed block. In two-threshold mode those
 * per-quantile blocks are cached and every (gamma_pre, gamma_post) pair
 * combines two cached blocks.
 *
 * Degenerate points (pi identically 0 or 1, or a singular threshold block)
 * get SSR = +inf. Ties break toward the smallest gamma_pre, then gamma_post.
 */
inline GridResult grid_search(const PanelDataset& ds, const std::vector<ScaledPolicy>& policies,
                              const std::vector<CommonFactor>& factors, const ModelSpec& spec, const GridSpec& grid,
                              const SearchOptions& opt = {}) {
  grid.validate();
  const ThresholdMode mode = grid.mode;
  if (mode == ThresholdMode::Two && spec.policies.empty())
    throw UsageError("two-threshold search needs at least one policy series");

  const CrossSection cs(ds);
  const DesignLayout layout(ds, cs, policies, factors, spec);
  const std::vector<double> gammas = grid.points();
  const std::size_t G = gammas.size();

  const CapacityPanel lo_cap = cs.capacity(gammas.front());
  if (detail::degenerate_block(layout.pi_columns(lo_cap)))
    throw SearchError("indicators are degenerate at the lower grid bound " + std::to_string(gammas.front()));

  // Threshold-free part: response and fixed columns, absorbed once.
  DesignMatrix base = layout.build(lo_cap, lo_cap);
  const TwoWayAbsorber absorber(base.row_firm, base.row_quarter, opt.absorb.tol, opt.absorb.max_iter);
  const std::vector<std::size_t> fixed_idx = layout.fixed_columns();
  const auto n = static_cast<Eigen::Index>(layout.n_rows());
  Eigen::MatrixXd fixed(n, static_cast<Eigen::Index>(fixed_idx.size()));
  for (std::size_t k = 0; k < fixed_idx.size(); ++k) fixed.col(static_cast<Eigen::Index>(k)) = base.regressors.col(static_cast<Eigen::Index>(fixed_idx[k]));
  parallel_for(fixed_idx.size(), opt.threads, [&](std::size_t k) {
    auto col = fixed.col(static_cast<Eigen::Index>(k));
    absorber.absorb(col);
  });
  Eigen::VectorXd y = base.response;
  absorber.absorb(y);

  Eigen::MatrixXd q_fixed;  // orthonormal basis of the absorbed fixed block
  if (fixed.cols() > 0) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(fixed);
    qr.setThreshold(1e-10);
    q_fixed = qr.householderQ() * Eigen::MatrixXd::Identity(n, qr.rank());
  }
  auto partial_out = [&](Eigen::MatrixXd& m) {
    if (q_fixed.cols() > 0) m -= q_fixed * (q_fixed.transpose() * m);
  };
  {
    Eigen::MatrixXd ym = y;
    partial_out(ym);
    y = ym.col(0);
  }
  const double yy = y.squaredNorm();

  auto make_block = [&](const Eigen::MatrixXd& raw, bool check_degenerate) {
    detail::PartialledBlock b;
    b.degenerate = check_degenerate && detail::degenerate_block(raw);
    b.z = raw;
    for (Eigen::Index j = 0; j < b.z.cols(); ++j) {
      auto col = b.z.col(j);
      absorber.absorb(col);
    }
    partial_out(b.z);
    b.zy = b.z.transpose() * y;
    b.zz = b.z.transpose() * b.z;
    return b;
  };

  GridResult res;
  res.mode = mode;
  res.nobs = layout.n_rows();
  const std::size_t kp = layout.n_pi_cols(), km = layout.n_policy_cols();

  if (mode == ThresholdMode::Single) {
    res.surface.resize(G);
    parallel_for(G, opt.threads, [&](std::size_t i) {
      const CapacityPanel cap = cs.capacity(gammas[i]);
      Eigen::MatrixXd raw(n, static_cast<Eigen::Index>(kp + km));
      raw.leftCols(static_cast<Eigen::Index>(kp)) = layout.pi_columns(cap);
      if (km > 0) raw.rightCols(static_cast<Eigen::Index>(km)) = layout.policy_columns(cap);
      const bool degenerate = detail::degenerate_block(raw.leftCols(static_cast<Eigen::Index>(kp)));
      const auto b = make_block(raw, false);
      GridPoint& pt = res.surface[i];
      pt.gamma_pre = pt.gamma_post = gammas[i];
      pt.degenerate = degenerate;
      if (!degenerate) pt.ssr = detail::partialled_ssr(yy, b.zz, b.zy);
      if (!std::isfinite(pt.ssr)) pt.degenerate = true;
    });
  } else {
    std::vector<detail::PartialledBlock> pre(G), post(G);
    parallel_for(G, opt.threads, [&](std::size_t i) {
      const CapacityPanel cap = cs.capacity(gammas[i]);
      pre[i] = make_block(layout.pi_columns(cap), true);
      post[i] = make_block(layout.policy_columns(cap), false);
      post[i].degenerate = pre[i].degenerate;
    });
    res.surface.resize(G * G);
    const Eigen::Index k = static_cast<Eigen::Index>(kp + km);
    parallel_for(G, opt.threads, [&](std::size_t a) {
      Eigen::MatrixXd gram(k, k);
      Eigen::VectorXd rhs(k);
      for (std::size_t b = 0; b < G; ++b) {
        GridPoint& pt = res.surface[a * G + b];
        pt.gamma_pre = gammas[a];
        pt.gamma_post = gammas[b];
        pt.degenerate = pre[a].degenerate || post[b].degenerate;
        if (pt.degenerate) continue;
        const auto kpi = static_cast<Eigen::Index>(kp);
        gram.topLeftCorner(kpi, kpi) = pre[a].zz;
        gram.bottomRightCorner(k - kpi, k - kpi) = post[b].zz;
        gram.topRightCorner(kpi, k - kpi) = pre[a].z.transpose() * post[b].z;
        gram.bottomLeftCorner(k - kpi, kpi) = gram.topRightCorner(kpi, k - kpi).transpose();
        rhs.head(kpi) = pre[a].zy;
        rhs.tail(k - kpi) = post[b].zy;
        pt.ssr = detail::partialled_ssr(yy, gram, rhs);
        if (!std::isfinite(pt.ssr)) pt.degenerate = true;
      }
    });
  }

  for (const GridPoint& pt : res.surface) {
    if (pt.degenerate) {
      ++res.degenerate_points;
      continue;
    }
    if (pt.ssr < res.best_ssr) {
      res.best_ssr = pt.ssr;
      res.best = {pt.gamma_pre, pt.gamma_post};
    }
  }
  if (!std::isfinite(res.best_ssr)) throw SearchError("every grid point is degenerate");
  res.ties.push_back(res.best);
  for (const GridPoint& pt : res.surface) {
    if (pt.degenerate || (pt.gamma_pre == res.best.gamma_pre && pt.gamma_post == res.best.gamma_post)) continue;
    if (pt.ssr <= res.best_ssr * (1.0 + opt.tie_tol)) res.ties.push_back({pt.gamma_pre, pt.gamma_post});
  }
  return res;
}

inline void write_surface_csv(const GridResult& r, std::ostream& out) {
  out << "gamma_pre,gamma_post,ssr\n";
  char buf[64];
  for (const auto& pt : r.surface) {
    if (std::isfinite(pt.ssr))
      std::snprintf(buf, sizeof buf, "%.12g,%.12g,%.12g", pt.gamma_pre, pt.gamma_post, pt.ssr);
    else
      std::snprintf(buf, sizeof buf, "%.12g,%.12g,inf", pt.gamma_pre, pt.gamma_post);
    out << buf << '\n';
  }
}

}  // namespace panelardl
