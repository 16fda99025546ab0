#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "panelci/errors.hpp"
#include "panelci/parallel.hpp"
#include "panelci/scm.hpp"

namespace panelci::robustness {

struct UnitRatio {
  std::string label;
  bool is_treated = false;
  bool included = false;  // passed the pre-RMSE filter (treated always passes)
  double pre_rmse = 0.0;
  double post_rmse = 0.0;
  double ratio = 0.0;
  Eigen::VectorXd gap;  // observed - synthetic, all periods
};

struct RmseRatioReport {
  std::vector<UnitRatio> units;  // treated first, then donors in panel order
  std::size_t treated_rank = 0;
  std::size_t n_considered = 0;
  double min_pre_rmse_filter = 1.0;
  std::vector<std::string> skipped;
};

inline double rmse_ratio(double post, double pre) {
  if (pre == 0.0) return post == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return post / pre;
}

/// Placebo-in-space test. The treated unit and every donor are fitted as if
/// treated (the real treated unit never enters a donor pool), and the
/// treated unit is ranked by post/pre RMSE ratio against donors whose
/// pre-treatment RMSE is at least `min_pre_rmse`. Rank 1 is the largest
/// ratio; ties count against the treated unit.
inline RmseRatioReport placebo_in_space(const PanelDataset& panel, const scm::FitConfig& cfg,
                                        double min_pre_rmse = 1.0) {
  panel.validate();
  const PanelDataset work = scm::preprocess(panel, cfg.smoothing);
  const auto donors = work.donor_indices();
  if (donors.size() < 2) throw ValidationError("placebo-in-space needs at least two donor units");
  scm::FitConfig inner = cfg;
  inner.smoothing.reset();

  std::vector<std::string> labels{work.treated_unit};
  for (auto i : donors) labels.push_back(work.units[i]);
  std::vector<std::optional<scm::SCFit>> fits(labels.size());
  parallel_for(labels.size(), cfg.threads, [&](std::size_t k) {
    try {
      fits[k] = k == 0 ? scm::fit_point(work, inner) : scm::fit_point(scm::as_pseudo_treated(work, labels[k]), inner);
    } catch (const NumericalError&) {
    }
  });
  if (!fits[0]) throw NumericalError("placebo-in-space: the treated unit's own fit failed");

  RmseRatioReport rep;
  rep.min_pre_rmse_filter = min_pre_rmse;
  for (std::size_t k = 0; k < labels.size(); ++k) {
    if (!fits[k]) {
      rep.skipped.push_back(labels[k]);
      continue;
    }
    const auto& f = *fits[k];
    UnitRatio u;
    u.label = labels[k];
    u.is_treated = k == 0;
    u.pre_rmse = f.pre_rmse;
    u.post_rmse = f.post_rmse;
    u.ratio = rmse_ratio(f.post_rmse, f.pre_rmse);
    u.included = u.is_treated || f.pre_rmse >= min_pre_rmse;
    u.gap = f.observed - f.counterfactual;
    rep.units.push_back(std::move(u));
  }
  const double treated_ratio = rep.units.front().ratio;
  rep.treated_rank = 1;
  for (const auto& u : rep.units) {
    if (!u.included) continue;
    ++rep.n_considered;
    if (!u.is_treated && u.ratio >= treated_ratio) ++rep.treated_rank;
  }
  return rep;
}

struct BackdateResult {
  std::size_t shift_days = 0;
  std::size_t shifted_t_pre = 0;
  scm::SCFit fit;                // estimated with the shifted treatment date
  Eigen::VectorXd holdout_gaps;  // shifted date .. original date, length shift_days
  double holdout_rmse = 0.0;
  double holdout_mean_gap = 0.0;
  Eigen::VectorXd post_effects;  // periods after the original treatment date
  double post_mean_effect = 0.0;
};

/// Re-estimates with the treatment date moved `shift_days` earlier.
///
/// Smoothing, when configured, is applied once using the original treatment
/// date as the block boundary; the estimator itself only sees the shifted
/// date. The zeta rule is recomputed on the shortened pre-period. A shift
/// of zero returns exactly scm::fit(panel, cfg).
inline BackdateResult backdate(const PanelDataset& panel, std::size_t shift_days, const scm::FitConfig& cfg) {
  panel.validate();
  if (shift_days >= panel.t_pre)
    throw ValidationError("backdating shift (" + std::to_string(shift_days) + ") must be smaller than t_pre (" +
                          std::to_string(panel.t_pre) + ")");
  BackdateResult out;
  out.shift_days = shift_days;
  out.shifted_t_pre = panel.t_pre - shift_days;
  if (shift_days == 0) {
    out.fit = scm::fit(panel, cfg);
  } else {
    PanelDataset shifted = scm::preprocess(panel, cfg.smoothing);
    shifted.t_pre = out.shifted_t_pre;
    scm::FitConfig inner = cfg;
    inner.smoothing.reset();
    out.fit = scm::fit(shifted, inner);
  }
  const auto s = static_cast<Eigen::Index>(shift_days);
  out.holdout_gaps = out.fit.effects.head(s);
  out.post_effects = out.fit.effects.tail(out.fit.effects.size() - s);
  if (s > 0) {
    out.holdout_rmse = std::sqrt(out.holdout_gaps.squaredNorm() / static_cast<double>(s));
    out.holdout_mean_gap = out.holdout_gaps.mean();
  }
  out.post_mean_effect = out.post_effects.mean();
  return out;
}

struct LooFit {
  std::string dropped;
  scm::SCFit fit;
};

struct LooResult {
  scm::SCFit baseline;
  std::vector<LooFit> fits;
};

inline constexpr double kNonzeroWeight = 1e-6;

/// Refits once per donor with weight above 1e-6 in the baseline fit, each
/// time removing that donor from the pool. Placebo variances are attached
/// only when `with_variance` is set.
inline LooResult leave_one_out(const PanelDataset& panel, const scm::FitConfig& cfg, bool with_variance = false) {
  LooResult out;
  out.baseline = with_variance ? scm::fit(panel, cfg) : scm::fit_point(panel, cfg);
  std::vector<std::string> active;
  const auto& w = out.baseline.weights;
  for (std::size_t k = 0; k < w.donor_labels.size(); ++k)
    if (w.omega(static_cast<Eigen::Index>(k)) > kNonzeroWeight) active.push_back(w.donor_labels[k]);
  if (active.size() < 2)
    throw ValidationError("leave-one-out needs at least two donors with non-zero weight (baseline has " +
                          std::to_string(active.size()) + ")");
  out.fits.resize(active.size());
  scm::FitConfig inner = cfg;
  inner.threads = 1;
  parallel_for(active.size(), cfg.threads, [&](std::size_t k) {
    PanelDataset reduced = panel;
    reduced.excluded_units.insert(active[k]);
    out.fits[k] = {active[k], with_variance ? scm::fit(reduced, inner) : scm::fit_point(reduced, inner)};
  });
  return out;
}

}  // namespace panelci::robustness
