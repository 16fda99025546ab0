#pragma once

#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "panelci/errors.hpp"
#include "panelci/panel.hpp"
#include "panelci/scm.hpp"

namespace panelci::decomp {

inline constexpr const char* kCompositeLabel = "composite";

/// The panel with an extra unit "composite", the unweighted mean of
/// `members`, set as treated. Members and the original treated unit are
/// excluded from the donor pool.
inline PanelDataset composite_unit(const PanelDataset& panel, const std::set<std::string>& members) {
  panel.validate();
  if (members.empty()) throw ValidationError("composite unit needs at least one member");
  if (panel.find(kCompositeLabel)) throw ValidationError("panel already has a unit named 'composite'");
  for (const auto& m : members)
    if (!panel.lgb_units.count(m)) throw ValidationError("composite member '" + m + "' is not an LGB unit");
  // mean of deviations from the first member, so identical members come back unchanged
  const Eigen::VectorXd anchor = panel.series(*members.begin());
  Eigen::VectorXd dev = Eigen::VectorXd::Zero(anchor.size());
  for (const auto& m : members) dev += panel.series(m) - anchor;
  const Eigen::VectorXd mean = anchor + dev / static_cast<double>(members.size());

  PanelDataset out = panel;
  out.units.push_back(kCompositeLabel);
  out.outcomes.conservativeResize(out.outcomes.rows() + 1, Eigen::NoChange);
  out.outcomes.row(out.outcomes.rows() - 1) = mean.transpose();
  out.excluded_units.insert(members.begin(), members.end());
  out.excluded_units.insert(panel.treated_unit);
  out.treated_unit = kCompositeLabel;
  return out;
}

struct AssumptionsNote {
  std::string sutva =
      "SUTVA: the month-long campaign and the disclosure do not alter potential outcomes of units other than "
      "those they target, and each unit has one version of each treatment.";
  std::string homogeneity =
      "Effect homogeneity: the campaign effect on the treated unit equals the campaign effect on the composite "
      "LGB unit in every post-treatment period.";
};

/// Disclosure-only average effect under effect homogeneity.
inline double net_effect(double tau_avg, double gamma_avg) { return tau_avg - gamma_avg; }

struct DecompResult {
  std::vector<Day> post_days;
  Eigen::VectorXd tau_series;    // treated unit, both treatments
  Eigen::VectorXd gamma_series;  // composite LGB unit, campaign only
  Eigen::VectorXd tau_c_series;  // tau - gamma
  double tau_c_avg = 0.0;
  scm::SCFit tau_fit;
  scm::SCFit gamma_fit;
  std::vector<std::string> members;
  AssumptionsNote assumptions;
};

/// Disclosure effect net of the campaign: tau_c = tau - gamma, where tau is
/// the treated unit's SC effect and gamma the composite unit's. Both fits
/// carry their own placebo CIs; no joint interval is formed.
inline DecompResult decompose(const PanelDataset& panel, const std::set<std::string>& members,
                              const scm::FitConfig& cfg) {
  DecompResult r;
  const auto comp = composite_unit(panel, members);
  r.tau_fit = scm::fit(panel, cfg);
  r.gamma_fit = scm::fit(comp, cfg);
  r.members.assign(members.begin(), members.end());
  r.post_days.assign(panel.times.begin() + static_cast<std::ptrdiff_t>(panel.t_pre), panel.times.end());
  r.tau_series = r.tau_fit.effects;
  r.gamma_series = r.gamma_fit.effects;
  r.tau_c_series = r.tau_series - r.gamma_series;
  r.tau_c_avg = net_effect(r.tau_fit.avg_effect, r.gamma_fit.avg_effect);
  return r;
}

}  // namespace panelci::decomp
