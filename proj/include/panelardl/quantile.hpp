#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

namespace panelardl {

/**
 * @brief Empirical quantile of an already sorted sample.
 *
 * Linear interpolation between order statistics: the k-th of n sorted
 * points (1-based) sits at probability (k-1)/(n-1). Every quantile in the
 * library goes through this function so that tail drops, winsorization and
 * debt-capacity thresholds agree.
 */
inline double quantile_sorted(std::span<const double> sorted, double prob) {
  if (sorted.empty()) throw std::invalid_argument("quantile of empty sample");
  if (sorted.size() == 1) return sorted.front();
  prob = std::clamp(prob, 0.0, 1.0);
  const double pos = prob * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double w = pos - static_cast<double>(lo);
  if (w == 0.0) return sorted[lo];
  return sorted[lo] + w * (sorted[hi] - sorted[lo]);
}

/// Sorts a copy of the sample and returns its prob-quantile.
inline double quantile(std::vector<double> sample, double prob) {
  std::sort(sample.begin(), sample.end());
  return quantile_sorted(sample, prob);
}

}  // namespace panelardl
