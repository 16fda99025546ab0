#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "panelci/errors.hpp"

namespace panelci {

enum class Kernel { gaussian, epanechnikov };
enum class BoundaryMode { whole_series, split_at_t_pre };

struct SmoothConfig {
  double bandwidth = 7.0;  // days
  Kernel kernel = Kernel::gaussian;
  BoundaryMode boundary_mode = BoundaryMode::split_at_t_pre;
};

inline Kernel parse_kernel(const std::string& s) {
  if (s == "gaussian") return Kernel::gaussian;
  if (s == "epanechnikov") return Kernel::epanechnikov;
  throw ValidationError("unknown kernel '" + s + "' (expected gaussian|epanechnikov)");
}

inline BoundaryMode parse_boundary_mode(const std::string& s) {
  if (s == "whole_series") return BoundaryMode::whole_series;
  if (s == "split_at_t_pre") return BoundaryMode::split_at_t_pre;
  throw ValidationError("unknown boundary mode '" + s + "' (expected whole_series|split_at_t_pre)");
}

inline std::string to_string(Kernel k) { return k == Kernel::gaussian ? "gaussian" : "epanechnikov"; }
inline std::string to_string(BoundaryMode m) {
  return m == BoundaryMode::whole_series ? "whole_series" : "split_at_t_pre";
}

namespace detail {

inline double kernel_weight(Kernel k, double u) {
  switch (k) {
    case Kernel::gaussian:
      return std::exp(-0.5 * u * u);
    case Kernel::epanechnikov:
      return std::abs(u) <= 1.0 ? 0.75 * (1.0 - u * u) : 0.0;
  }
  return 0.0;
}

// Fills out[begin, end) using only the observations y[begin, end).
// Deviations from the block's first value are averaged, which keeps a
// constant block bit-exact.
inline void smooth_block(std::span<const double> y, std::span<double> out, std::size_t begin, std::size_t end,
                         const SmoothConfig& cfg) {
  const double anchor = y[begin];
  for (std::size_t t = begin; t < end; ++t) {
    double num = 0.0, den = 0.0;
    for (std::size_t s = begin; s < end; ++s) {
      const double w =
          detail::kernel_weight(cfg.kernel, (static_cast<double>(t) - static_cast<double>(s)) / cfg.bandwidth);
      num += w * (y[s] - anchor);
      den += w;
    }
    // K(0) > 0 for both kernels, so den > 0.
    out[t] = anchor + num / den;
  }
}

}  // namespace detail

/// Nadaraya-Watson smoother on the integer day grid.
///
/// Under `split_at_t_pre` the first `t_pre` observations and the remainder
/// are smoothed as separate blocks, so no post value leaks into a pre
/// estimate and vice versa.
inline std::vector<double> nw_smooth(std::span<const double> series, const SmoothConfig& cfg, std::size_t t_pre = 0) {
  if (!(cfg.bandwidth > 0.0)) throw ValidationError("smoothing bandwidth must be > 0");
  if (series.size() < 2) throw ValidationError("smoothing needs a series of length >= 2");
  for (double v : series)
    if (!std::isfinite(v)) throw ValidationError("smoothing input has missing values");
  std::vector<double> out(series.size());
  const bool split = cfg.boundary_mode == BoundaryMode::split_at_t_pre && t_pre > 0 && t_pre < series.size();
  if (split) {
    detail::smooth_block(series, out, 0, t_pre, cfg);
    detail::smooth_block(series, out, t_pre, series.size(), cfg);
  } else {
    detail::smooth_block(series, out, 0, series.size(), cfg);
  }
  return out;
}

/// Applies `nw_smooth` to every row of a units-by-periods matrix.
inline Eigen::MatrixXd smooth_rows(const Eigen::MatrixXd& m, const SmoothConfig& cfg, std::size_t t_pre) {
  Eigen::MatrixXd out(m.rows(), m.cols());
  std::vector<double> row(static_cast<std::size_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index t = 0; t < m.cols(); ++t) row[static_cast<std::size_t>(t)] = m(i, t);
    auto s = nw_smooth(row, cfg, t_pre);
    for (Eigen::Index t = 0; t < m.cols(); ++t) out(i, t) = s[static_cast<std::size_t>(t)];
  }
  return out;
}

}  // namespace panelci
