#pragma once

#include <Eigen/Dense>

#include <map>
#include <string>
#include <vector>

#include "panelardl/debt_capacity.hpp"
#include "panelardl/design.hpp"
#include "panelardl/error.hpp"
#include "panelardl/estimator.hpp"
#include "panelardl/parallel.hpp"

namespace panelardl {

struct JackknifeResult {
  std::vector<std::string> labels;
  Eigen::VectorXd corrected;
  Eigen::VectorXd se;   ///< from the full-sample vcov
  FitResult full;
  FitResult half_a;
  FitResult half_b;
  std::vector<std::string> warnings;

  [[nodiscard]] double coef(const std::string& label) const {
    for (std::size_t j = 0; j < labels.size(); ++j)
      if (labels[j] == label) return corrected(static_cast<Eigen::Index>(j));
    throw UsageError("unknown coefficient '" + label + "'");
  }
};

struct JackknifeOptions {
  std::size_t min_obs = 8;
  VcovKind vcov = VcovKind::ClusterByFirm;
  unsigned threads = 1;
  AbsorbOptions absorb;
};

/// Splits each firm's design rows into two time-ordered halves of equal length.
struct HalfPanelSplit {
  std::vector<std::size_t> first;
  std::vector<std::size_t> second;
  std::vector<std::string> warnings;
};

/**
 * Drops a firm's first row when its row count is odd, then halves it by
 * time. Firms that would be the only firm in some quarter of either half are
 * removed from both halves, since that quarter's effect would absorb them.
 */
inline HalfPanelSplit split_half_panels(const DesignMatrix& dm, std::size_t min_obs) {
  std::map<std::size_t, std::vector<std::size_t>> by_firm;
  for (std::size_t i = 0; i < dm.n_rows(); ++i) by_firm[dm.row_firm[i]].push_back(i);

  std::map<std::size_t, std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> halves;
  for (const auto& [firm, rows] : by_firm) {
    if (rows.size() < min_obs)
      throw JackknifeError("firm '" + dm.firm_ids[firm] + "' has " + std::to_string(rows.size()) +
                           " usable observations; the half-panel jackknife needs at least " + std::to_string(min_obs));
    const std::size_t start = rows.size() % 2;
    const std::size_t half = (rows.size() - start) / 2;
    auto& h = halves[firm];
    h.first.assign(rows.begin() + static_cast<std::ptrdiff_t>(start), rows.begin() + static_cast<std::ptrdiff_t>(start + half));
    h.second.assign(rows.begin() + static_cast<std::ptrdiff_t>(start + half), rows.end());
  }

  HalfPanelSplit split;
  for (bool changed = true; changed;) {
    changed = false;
    for (int side = 0; side < 2; ++side) {
      std::map<int, std::size_t> firms_in_quarter;
      for (const auto& [firm, h] : halves)
        for (std::size_t i : side == 0 ? h.first : h.second) ++firms_in_quarter[dm.row_quarter[i]];
      for (auto it = halves.begin(); it != halves.end();) {
        bool lonely = false;
        for (std::size_t i : side == 0 ? it->second.first : it->second.second)
          lonely = lonely || firms_in_quarter[dm.row_quarter[i]] < 2;
        if (lonely) {
          split.warnings.push_back("firm '" + dm.firm_ids[it->first] +
                                   "' is alone in a half-sample quarter; dropped from both halves");
          it = halves.erase(it);
          changed = true;
        } else {
          ++it;
        }
      }
      if (changed) break;
    }
  }
  for (const auto& [firm, h] : halves) {
    split.first.insert(split.first.end(), h.first.begin(), h.first.end());
    split.second.insert(split.second.end(), h.second.begin(), h.second.end());
  }
  std::sort(split.first.begin(), split.first.end());
  std::sort(split.second.begin(), split.second.end());
  if (split.first.empty() || split.second.empty()) throw JackknifeError("no firms left for the half-panel split");
  return split;
}

/**
 * @brief Half-panel jackknife bias correction of the FE-TE estimator.
 *
 * corrected = 2 * full - (half_a + half_b) / 2, where each half-sample has
 * its own firm and quarter effects absorbed. Thresholds are held at the
 * supplied values. Standard errors are the full-sample ones.
 */
inline JackknifeResult half_panel_jackknife(const PanelDataset& ds, const std::vector<ScaledPolicy>& policies,
                                            const std::vector<CommonFactor>& factors, const ModelSpec& spec,
                                            const ThresholdParams& thresholds, const JackknifeOptions& opt = {}) {
  thresholds.validate();
  const CrossSection cs(ds);
  const DesignLayout layout(ds, cs, policies, factors, spec);
  const DesignMatrix raw = layout.build(cs.capacity(thresholds.gamma_pre), cs.capacity(thresholds.gamma_post));
  const HalfPanelSplit split = split_half_panels(raw, opt.min_obs);

  const DesignMatrix samples[3] = {raw, raw.select_rows(split.first), raw.select_rows(split.second)};
  FitResult fits[3];
  std::string failures[3];
  parallel_for(3, opt.threads, [&](std::size_t k) {
    const DesignMatrix dm = absorb_two_way(samples[k], opt.absorb);
    try {
      fits[k] = fit_ols(dm, opt.vcov);
    } catch (const EstimationError& e) {
      failures[k] = e.what();
    }
  });
  static const char* names[3] = {"full sample", "first half", "second half"};
  for (int k = 0; k < 3; ++k)
    if (!failures[k].empty()) throw JackknifeError(std::string(names[k]) + ": " + failures[k]);
  for (int k = 1; k < 3; ++k)
    if (fits[k].labels != fits[0].labels) {
      std::string missing;
      for (const auto& l : fits[0].labels)
        if (std::find(fits[k].labels.begin(), fits[k].labels.end(), l) == fits[k].labels.end())
          missing += (missing.empty() ? "" : ", ") + l;
      throw JackknifeError(std::string(names[k]) + " lost collinear columns: " + missing);
    }

  JackknifeResult res;
  res.labels = fits[0].labels;
  res.corrected = 2.0 * fits[0].coefficients - 0.5 * (fits[1].coefficients + fits[2].coefficients);
  res.se = fits[0].vcov.diagonal().cwiseMax(0.0).cwiseSqrt();
  res.full = std::move(fits[0]);
  res.half_a = std::move(fits[1]);
  res.half_b = std::move(fits[2]);
  res.full.spec = res.half_a.spec = res.half_b.spec = spec;
  res.full.thresholds = res.half_a.thresholds = res.half_b.thresholds = thresholds;
  res.warnings = split.warnings;
  return res;
}

}  // namespace panelardl
