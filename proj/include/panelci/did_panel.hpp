#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "panelci/dates.hpp"
#include "panelci/errors.hpp"

namespace panelci::did {

/// Player-by-day outcomes for a single-adoption-date design.
///
/// `outcomes` holds NaN on days a player did not play. Days up to and
/// including `base_index` are pre-treatment; `base_index` is the latest
/// pre-treatment day and the fixed base period of every contrast.
struct DidPanel {
  std::vector<std::string> players;
  std::vector<Day> days;
  Eigen::MatrixXd outcomes;
  std::vector<std::uint8_t> treated;
  Eigen::MatrixXd covariates;  // players x k
  std::vector<std::string> covariate_names;
  std::size_t base_index = 0;
  std::size_t dropped_without_base = 0;

  std::size_t n_players() const { return players.size(); }
  std::size_t n_days() const { return days.size(); }
  bool observed(std::size_t i, std::size_t t) const {
    return std::isfinite(outcomes(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)));
  }
  double y(std::size_t i, std::size_t t) const {
    return outcomes(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t));
  }

  void validate() const {
    const auto n = static_cast<Eigen::Index>(players.size());
    if (outcomes.rows() != n || outcomes.cols() != static_cast<Eigen::Index>(days.size()))
      throw ValidationError("DiD outcome matrix shape does not match players x days");
    if (treated.size() != players.size()) throw ValidationError("treatment flags do not match players");
    if (covariates.rows() != n || covariates.cols() != static_cast<Eigen::Index>(covariate_names.size()))
      throw ValidationError("covariate matrix shape does not match players x covariate names");
    if (!covariates.allFinite()) throw ValidationError("covariates must be finite");
    if (base_index >= days.size()) throw ValidationError("base period outside the panel days");
    for (std::size_t i = 0; i < players.size(); ++i)
      if (!observed(i, base_index))
        throw ValidationError("player '" + players[i] + "' has no observation at the base period");
  }
};

/// Removes players without a base-period observation, counting them.
inline DidPanel drop_players_missing_base(const DidPanel& in) {
  std::vector<Eigen::Index> keep;
  for (std::size_t i = 0; i < in.players.size(); ++i)
    if (in.observed(i, in.base_index)) keep.push_back(static_cast<Eigen::Index>(i));
  DidPanel out;
  out.days = in.days;
  out.base_index = in.base_index;
  out.covariate_names = in.covariate_names;
  out.dropped_without_base = in.dropped_without_base + (in.players.size() - keep.size());
  out.outcomes.resize(static_cast<Eigen::Index>(keep.size()), in.outcomes.cols());
  out.covariates.resize(static_cast<Eigen::Index>(keep.size()), in.covariates.cols());
  for (std::size_t k = 0; k < keep.size(); ++k) {
    const auto i = keep[k];
    out.players.push_back(in.players[static_cast<std::size_t>(i)]);
    out.treated.push_back(in.treated[static_cast<std::size_t>(i)]);
    out.outcomes.row(static_cast<Eigen::Index>(k)) = in.outcomes.row(i);
    out.covariates.row(static_cast<Eigen::Index>(k)) = in.covariates.row(i);
  }
  return out;
}

}  // namespace panelci::did
