#pragma once

#include <string>
#include <vector>

#include "panelci/panel.hpp"

namespace panelci::fixture {

/// Builds a panel from row-major unit series; days start on 2022-01-01.
inline PanelDataset make_panel(const std::vector<std::string>& units, const std::vector<std::vector<double>>& rows,
                               std::string treated, std::size_t t_pre) {
  PanelDataset p;
  p.units = units;
  const auto T = rows.front().size();
  const Day start = parse_day("2022-01-01");
  for (std::size_t t = 0; t < T; ++t) p.times.push_back(start + std::chrono::days{static_cast<int>(t)});
  p.outcomes.resize(static_cast<Eigen::Index>(units.size()), static_cast<Eigen::Index>(T));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t t = 0; t < T; ++t)
      p.outcomes(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)) = rows[i][t];
  p.treated_unit = std::move(treated);
  p.t_pre = t_pre;
  return p;
}

}  // namespace panelci::fixture
