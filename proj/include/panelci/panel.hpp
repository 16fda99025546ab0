#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "panelci/csv.hpp"
#include "panelci/dates.hpp"
#include "panelci/errors.hpp"

namespace panelci {

inline constexpr int kSchemaVersion = 1;

/// Balanced unit-by-day outcome matrix with treatment metadata.
///
/// Rows of `outcomes` follow `units`, columns follow `times`. The first
/// `t_pre` columns are the pre-treatment period.
struct PanelDataset {
  std::vector<std::string> units;
  std::vector<Day> times;
  Eigen::MatrixXd outcomes;
  std::string treated_unit;
  std::size_t t_pre = 0;
  std::set<std::string> lgb_units;
  std::set<std::string> excluded_units;

  std::size_t n_units() const { return units.size(); }
  std::size_t n_periods() const { return times.size(); }
  std::size_t n_post() const { return times.size() - t_pre; }

  std::optional<std::size_t> find(const std::string& label) const {
    auto it = std::find(units.begin(), units.end(), label);
    if (it == units.end()) return std::nullopt;
    return static_cast<std::size_t>(it - units.begin());
  }

  std::size_t index_of(const std::string& label) const {
    auto i = find(label);
    if (!i) throw ValidationError("unit '" + label + "' is not in the panel");
    return *i;
  }

  /// Units eligible as donors: everything except the treated unit, LGB
  /// units and explicit exclusions, in panel order.
  std::vector<std::size_t> donor_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < units.size(); ++i) {
      const auto& u = units[i];
      if (u == treated_unit || lgb_units.count(u) || excluded_units.count(u)) continue;
      out.push_back(i);
    }
    return out;
  }

  Eigen::VectorXd series(const std::string& label) const { return outcomes.row(index_of(label)).transpose(); }

  void validate() const {
    if (units.empty() || times.empty()) throw ValidationError("panel has no units or no periods");
    if (static_cast<std::size_t>(outcomes.rows()) != units.size() ||
        static_cast<std::size_t>(outcomes.cols()) != times.size())
      throw ValidationError("outcome matrix shape does not match units x times");
    if (t_pre < 1 || t_pre >= times.size())
      throw ValidationError("t_pre must satisfy 1 <= t_pre < T (got t_pre=" + std::to_string(t_pre) +
                            ", T=" + std::to_string(times.size()) + ")");
    if (!find(treated_unit)) throw ValidationError("treated unit '" + treated_unit + "' is not in the panel");
    for (const auto& u : lgb_units)
      if (!find(u)) throw ValidationError("LGB unit '" + u + "' is not in the panel");
    std::set<std::string> seen;
    for (const auto& u : units)
      if (!seen.insert(u).second) throw ValidationError("duplicate unit label '" + u + "'");
    for (std::size_t t = 1; t < times.size(); ++t)
      if (times[t] <= times[t - 1]) throw ValidationError("panel days must be strictly increasing");
    if (!outcomes.allFinite()) throw ValidationError("panel has missing or non-finite outcome cells");
  }
};

/// Sidecar path for a panel CSV: same stem, `.json` extension.
inline std::string sidecar_path(const std::string& csv_path) {
  return std::filesystem::path(csv_path).replace_extension(".json").string();
}

inline nlohmann::json panel_metadata(const PanelDataset& p) {
  return {{"schema_version", kSchemaVersion},
          {"treated_unit", p.treated_unit},
          {"t_pre", p.t_pre},
          {"treatment_date", format_day(p.times.at(p.t_pre))},
          {"lgb_units", p.lgb_units},
          {"excluded_units", p.excluded_units}};
}

/// Writes `unit,date,value` rows plus the JSON sidecar.
inline void write_panel(const PanelDataset& p, const std::string& csv_path) {
  std::ofstream out(csv_path);
  if (!out) throw IoError("cannot open '" + csv_path + "' for writing");
  out << "unit,date,value\n";
  for (std::size_t i = 0; i < p.units.size(); ++i)
    for (std::size_t t = 0; t < p.times.size(); ++t)
      out << csv::escape(p.units[i]) << ',' << format_day(p.times[t]) << ',' << csv::number(p.outcomes(i, t))
          << '\n';
  std::ofstream side(sidecar_path(csv_path));
  if (!side) throw IoError("cannot write panel sidecar next to '" + csv_path + "'");
  side << panel_metadata(p).dump(2) << '\n';
}

/// Reads a panel CSV and its sidecar. Unit order is first appearance; days
/// are sorted. Every unit-day cell must appear exactly once.
inline PanelDataset read_panel(const std::string& csv_path) {
  csv::Reader reader(csv_path);
  const auto cu = reader.column("unit");
  const auto cd = reader.column("date");
  const auto cv = reader.column("value");
  std::vector<std::string> units;
  std::map<std::string, std::size_t> unit_index;
  std::set<Day> days;
  std::map<std::pair<std::size_t, Day>, double> cells;
  std::vector<std::string> f;
  while (reader.next(f)) {
    const auto row = std::to_string(reader.row());
    if (f.size() < reader.header().size()) throw ValidationError("row " + row + ": expected " +
                                                                 std::to_string(reader.header().size()) + " fields");
    Day d;
    if (!try_parse_day(f[cd], d)) throw ValidationError("row " + row + ", column date: unparseable '" + f[cd] + "'");
    double v = 0.0;
    try {
      std::size_t used = 0;
      v = std::stod(f[cv], &used);
      if (used != f[cv].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ValidationError("row " + row + ", column value: not a number '" + f[cv] + "'");
    }
    auto [it, fresh] = unit_index.emplace(f[cu], units.size());
    if (fresh) units.push_back(f[cu]);
    days.insert(d);
    if (!cells.emplace(std::make_pair(it->second, d), v).second)
      throw ValidationError("row " + row + ": duplicate cell (" + f[cu] + ", " + f[cd] + ")");
  }
  PanelDataset p;
  p.units = units;
  p.times.assign(days.begin(), days.end());
  p.outcomes.resize(static_cast<Eigen::Index>(units.size()), static_cast<Eigen::Index>(days.size()));
  for (std::size_t i = 0; i < units.size(); ++i)
    for (std::size_t t = 0; t < p.times.size(); ++t) {
      auto it = cells.find({i, p.times[t]});
      if (it == cells.end())
        throw ValidationError("panel is unbalanced: no value for (" + units[i] + ", " + format_day(p.times[t]) + ")");
      p.outcomes(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)) = it->second;
    }

  std::ifstream side(sidecar_path(csv_path));
  if (!side) throw IoError("missing panel sidecar '" + sidecar_path(csv_path) + "'");
  nlohmann::json meta;
  try {
    side >> meta;
    p.treated_unit = meta.at("treated_unit").get<std::string>();
    p.t_pre = meta.at("t_pre").get<std::size_t>();
    p.lgb_units = meta.value("lgb_units", std::set<std::string>{});
    p.excluded_units = meta.value("excluded_units", std::set<std::string>{});
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("bad panel sidecar '" + sidecar_path(csv_path) + "': " + e.what());
  }
  p.validate();
  return p;
}

}  // namespace panelci
