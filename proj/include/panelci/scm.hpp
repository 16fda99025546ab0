#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "panelci/errors.hpp"
#include "panelci/panel.hpp"
#include "panelci/parallel.hpp"
#include "panelci/simplex_qp.hpp"
#include "panelci/smooth.hpp"
#include "panelci/stats.hpp"

namespace panelci::scm {

/// How the ridge parameter zeta is chosen.
struct ZetaSpec {
  enum class Mode { zero, rule, value };
  Mode mode = Mode::zero;
  double value = 0.0;

  static ZetaSpec zero() { return {}; }
  static ZetaSpec rule() { return {Mode::rule, 0.0}; }
  static ZetaSpec fixed(double v) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError("zeta must be a finite non-negative number");
    return {Mode::value, v};
  }

  /// Accepts "0", "rule" or a non-negative number.
  static ZetaSpec parse(const std::string& s) {
    if (s == "0" || s == "zero") return zero();
    if (s == "rule") return rule();
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used == s.size()) return fixed(v);
    } catch (const std::exception&) {
    }
    throw ValidationError("zeta must be 0, 'rule' or a non-negative number (got '" + s + "')");
  }

  std::string describe() const {
    switch (mode) {
      case Mode::zero: return "0";
      case Mode::rule: return "rule";
      case Mode::value: return csv::number(value);
    }
    return "";
  }
};

struct FitConfig {
  ZetaSpec zeta;
  std::optional<SmoothConfig> smoothing;
  SimplexQpOptions solver;
  bool population_sd = true;  // zeta rule: divide-by-N standard deviation
  double level = 0.95;
  std::size_t threads = 1;
};

struct SCWeights {
  std::vector<std::string> donor_labels;
  Eigen::VectorXd omega;
  double zeta = 0.0;
  double objective_value = 0.0;
  double kkt_residual = 0.0;
  std::size_t iterations = 0;
};

struct SCFit {
  std::string treated_unit;
  std::vector<Day> times;
  std::size_t t_pre = 0;
  SCWeights weights;
  Eigen::VectorXd observed;        // series used for estimation (smoothed when configured)
  Eigen::VectorXd counterfactual;  // length T
  Eigen::VectorXd effects;         // post periods only
  double avg_effect = 0.0;
  double variance = std::nan("");  // NaN until placebo variance is attached
  double ci_lo = std::nan("");
  double ci_hi = std::nan("");
  double pre_rmse = 0.0;
  double post_rmse = 0.0;
  double pre_treatment_mean = 0.0;
  double pct_change = 0.0;
  std::size_t n_placebo = 0;
  std::vector<std::string> skipped_placebos;
};

struct PlaceboVariance {
  double variance = 0.0;
  std::vector<std::string> labels;  // successful pseudo-treated units, panel order
  std::vector<double> effects;      // their average effects
  std::vector<std::string> skipped;
};

/// 100 * average effect / pre-treatment mean.
inline double percent_change(double avg_effect, double pre_treatment_mean) {
  if (pre_treatment_mean == 0.0) return std::nan("");
  return 100.0 * avg_effect / pre_treatment_mean;
}

/// Simplex-constrained ridge weights for one treated series.
///
/// Minimises sum_t (sum_i w_i Y_it - Y_1t)^2 + zeta^2 T_pre ||w||^2 over the
/// unit simplex. `donor_pre` is donors x T_pre.
inline SCWeights solve_weights(const Eigen::MatrixXd& donor_pre, const Eigen::VectorXd& treated_pre, double zeta,
                               const SimplexQpOptions& opts = {}) {
  if (donor_pre.rows() < 1) throw ValidationError("synthetic control needs at least one donor");
  if (treated_pre.size() < 2) throw ValidationError("synthetic control needs at least two pre-treatment periods");
  if (zeta < 0.0) throw ValidationError("zeta must be non-negative");
  const double ridge = zeta * zeta * static_cast<double>(treated_pre.size());
  const auto res = solve_simplex_ridge(donor_pre, treated_pre, ridge, opts);
  SCWeights w;
  w.omega = res.omega;
  w.zeta = zeta;
  w.objective_value = res.objective;
  w.kkt_residual = res.kkt_residual;
  w.iterations = res.iterations;
  return w;
}

/// zeta = (T - T_pre)^(1/4) * sd of first differences pooled over the donor
/// pool and pre-treatment periods 2..T_pre.
inline double zeta_rule(const PanelDataset& panel, bool population_sd = true) {
  if (panel.t_pre < 2) throw ValidationError("zeta rule needs at least two pre-treatment periods");
  const auto donors = panel.donor_indices();
  if (donors.empty()) throw ValidationError("zeta rule needs at least one control unit");
  std::vector<double> diffs;
  diffs.reserve(donors.size() * (panel.t_pre - 1));
  for (auto i : donors)
    for (std::size_t t = 1; t < panel.t_pre; ++t)
      diffs.push_back(panel.outcomes(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)) -
                      panel.outcomes(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t - 1)));
  const double sigma = stats::standard_deviation(diffs, population_sd);
  if (std::isnan(sigma)) throw ValidationError("zeta rule: too few first differences for a sample SD");
  return std::pow(static_cast<double>(panel.n_post()), 0.25) * sigma;
}

inline double resolve_zeta(const ZetaSpec& spec, const PanelDataset& panel, bool population_sd) {
  switch (spec.mode) {
    case ZetaSpec::Mode::zero: return 0.0;
    case ZetaSpec::Mode::rule: return zeta_rule(panel, population_sd);
    case ZetaSpec::Mode::value: return spec.value;
  }
  return 0.0;
}

/// Copy of the panel with every unit smoothed, or the panel itself.
inline PanelDataset preprocess(const PanelDataset& panel, const std::optional<SmoothConfig>& smoothing) {
  if (!smoothing) return panel;
  PanelDataset out = panel;
  out.outcomes = smooth_rows(panel.outcomes, *smoothing, panel.t_pre);
  return out;
}

/// Point estimates only: weights, counterfactual, effects and fit summaries.
/// Smoothing in `cfg` is applied to every unit before estimation.
inline SCFit fit_point(const PanelDataset& panel, const FitConfig& cfg) {
  panel.validate();
  if (panel.t_pre < 2) throw ValidationError("synthetic control needs at least two pre-treatment periods");
  const PanelDataset work = preprocess(panel, cfg.smoothing);
  const auto donors = work.donor_indices();
  if (donors.empty()) throw ValidationError("donor pool for '" + panel.treated_unit + "' is empty");

  const auto T = static_cast<Eigen::Index>(work.n_periods());
  const auto t_pre = static_cast<Eigen::Index>(work.t_pre);
  const auto treated = static_cast<Eigen::Index>(work.index_of(work.treated_unit));

  Eigen::MatrixXd donor_all(static_cast<Eigen::Index>(donors.size()), T);
  for (std::size_t k = 0; k < donors.size(); ++k)
    donor_all.row(static_cast<Eigen::Index>(k)) = work.outcomes.row(static_cast<Eigen::Index>(donors[k]));

  SCFit fit;
  fit.treated_unit = work.treated_unit;
  fit.times = work.times;
  fit.t_pre = work.t_pre;
  fit.observed = work.outcomes.row(treated).transpose();

  const double zeta = resolve_zeta(cfg.zeta, work, cfg.population_sd);
  fit.weights = solve_weights(donor_all.leftCols(t_pre), fit.observed.head(t_pre), zeta, cfg.solver);
  for (auto i : donors) fit.weights.donor_labels.push_back(work.units[i]);

  fit.counterfactual = donor_all.transpose() * fit.weights.omega;
  fit.effects = fit.observed.tail(T - t_pre) - fit.counterfactual.tail(T - t_pre);
  fit.avg_effect = fit.effects.mean();
  const Eigen::VectorXd pre_gap = fit.observed.head(t_pre) - fit.counterfactual.head(t_pre);
  fit.pre_rmse = std::sqrt(pre_gap.squaredNorm() / static_cast<double>(t_pre));
  fit.post_rmse = std::sqrt(fit.effects.squaredNorm() / static_cast<double>(T - t_pre));
  fit.pre_treatment_mean = fit.observed.head(t_pre).mean();
  fit.pct_change = percent_change(fit.avg_effect, fit.pre_treatment_mean);
  return fit;
}

/// The panel with `pseudo` as treated unit; the real treated unit joins the
/// exclusions so it never serves as a donor.
inline PanelDataset as_pseudo_treated(const PanelDataset& panel, const std::string& pseudo) {
  PanelDataset out = panel;
  out.excluded_units.insert(panel.treated_unit);
  out.treated_unit = pseudo;
  return out;
}

/// (1/N) sum_j (tau_j - mean tau)^2.
inline double demeaned_second_moment(std::span<const double> effects) {
  const double m = stats::mean(effects);
  double ss = 0.0;
  for (double e : effects) ss += (e - m) * (e - m);
  return ss / static_cast<double>(effects.size());
}

/// Placebo variance: each donor in turn is treated as the treated unit,
/// fitted on the remaining donors, and the variance of the resulting
/// average effects (around their mean, divided by the count) is returned.
inline PlaceboVariance placebo_variance(const PanelDataset& panel, const FitConfig& cfg) {
  panel.validate();
  const PanelDataset work = preprocess(panel, cfg.smoothing);
  const auto donors = work.donor_indices();
  if (donors.size() < 2) throw ValidationError("placebo variance needs at least two donor units");

  FitConfig inner = cfg;
  inner.smoothing.reset();
  std::vector<std::optional<double>> slot(donors.size());
  parallel_for(donors.size(), cfg.threads, [&](std::size_t k) {
    try {
      slot[k] = fit_point(as_pseudo_treated(work, work.units[donors[k]]), inner).avg_effect;
    } catch (const NumericalError&) {
    }
  });

  PlaceboVariance pv;
  for (std::size_t k = 0; k < donors.size(); ++k) {
    if (slot[k]) {
      pv.labels.push_back(work.units[donors[k]]);
      pv.effects.push_back(*slot[k]);
    } else {
      pv.skipped.push_back(work.units[donors[k]]);
    }
  }
  if (pv.effects.size() < 2)
    throw NumericalError("placebo variance: fewer than two placebo fits succeeded");
  pv.variance = demeaned_second_moment(pv.effects);
  return pv;
}

/// Attaches a variance and a normal confidence interval to a fit.
inline void attach_variance(SCFit& fit, const PlaceboVariance& pv, double level) {
  fit.variance = pv.variance;
  const double half = stats::two_sided_z(level) * std::sqrt(pv.variance);
  fit.ci_lo = fit.avg_effect - half;
  fit.ci_hi = fit.avg_effect + half;
  fit.n_placebo = pv.effects.size();
  fit.skipped_placebos = pv.skipped;
}

/// Full synthetic-control fit with placebo variance and confidence interval.
inline SCFit fit(const PanelDataset& panel, const FitConfig& cfg) {
  SCFit f = fit_point(panel, cfg);
  attach_variance(f, placebo_variance(panel, cfg), cfg.level);
  return f;
}

}  // namespace panelci::scm
