#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include <boost/math/distributions/normal.hpp>

namespace panelci::stats {

inline double mean(std::span<const double> x) {
  if (x.empty()) return std::nan("");
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

/// Standard deviation. `population` divides by N, otherwise by N - 1.
inline double standard_deviation(std::span<const double> x, bool population = true) {
  const std::size_t n = x.size();
  if (n == 0 || (!population && n < 2)) return std::nan("");
  const double m = mean(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(population ? n : n - 1));
}

/// Sample quantile with linear interpolation between order statistics
/// (Hyndman-Fan type 7). Sorts a copy.
inline double quantile(std::vector<double> x, double p) {
  if (x.empty()) return std::nan("");
  std::sort(x.begin(), x.end());
  const double h = (static_cast<double>(x.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, x.size() - 1);
  return x[lo] + (h - static_cast<double>(lo)) * (x[hi] - x[lo]);
}

/// Standard normal quantile.
inline double normal_quantile(double p) {
  return boost::math::quantile(boost::math::normal_distribution<double>{}, p);
}

/// Two-sided critical value for a confidence level, e.g. 0.95 -> 1.959964.
inline double two_sided_z(double level) { return normal_quantile(0.5 + level / 2.0); }

inline double rmse(std::span<const double> a, std::span<const double> b) {
  if (a.empty()) return 0.0;
  double ss = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) ss += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(ss / static_cast<double>(a.size()));
}

}  // namespace panelci::stats
