#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "panelci/csv.hpp"
#include "panelci/dates.hpp"
#include "panelci/did_panel.hpp"
#include "panelci/errors.hpp"
#include "panelci/panel.hpp"

namespace panelci::dataio {

struct MatchRecord {
  std::string match_id;
  Day date;
  std::string region;
  std::string player_id;
  std::string character;
  std::string role;
  bool win = false;
  double kills = 0, deaths = 0, assists = 0, gold = 0;
};

/// Maps server tags to the four analysis regions plus "other".
/// Accepts both platform ids (EUW1, LA2, ...) and already-normalized names.
inline std::string normalize_region(std::string tag) {
  for (auto& c : tag) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  static const std::map<std::string, std::string> table = {
      {"BR", "latin_america"},  {"BR1", "latin_america"},  {"LAN", "latin_america"},
      {"LA1", "latin_america"}, {"LAS", "latin_america"},  {"LA2", "latin_america"},
      {"LATIN_AMERICA", "latin_america"},
      {"EUNE", "europe"},       {"EUN1", "europe"},        {"EUW", "europe"},
      {"EUW1", "europe"},       {"EUROPE", "europe"},
      {"KR", "korea"},          {"KOREA", "korea"},
      {"NA", "north_america"},  {"NA1", "north_america"},  {"NORTH_AMERICA", "north_america"}};
  auto it = table.find(tag);
  return it == table.end() ? "other" : it->second;
}

/// Five position labels, normalized to the platform's names.
inline std::optional<std::string> normalize_role(std::string r) {
  for (auto& c : r) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (r == "top") return "top";
  if (r == "jungle") return "jungle";
  if (r == "mid" || r == "middle") return "middle";
  if (r == "bottom" || r == "bot" || r == "adc") return "bottom";
  if (r == "support" || r == "utility") return "utility";
  return std::nullopt;
}

inline const std::vector<std::string>& required_columns() {
  static const std::vector<std::string> cols = {"match_id", "date",  "region", "player_id", "character", "role",
                                                "win",      "kills", "deaths", "assists",   "gold"};
  return cols;
}

/// Logical column -> header name. Unmapped columns use their logical name.
struct Schema {
  std::map<std::string, std::string> rename;

  std::string header_for(const std::string& logical) const {
    auto it = rename.find(logical);
    return it == rename.end() ? logical : it->second;
  }
};

struct LoadResult {
  std::vector<MatchRecord> records;
  std::size_t dropped_outside_window = 0;
};

/// Reads a long-format match log. Rows dated outside `window` are dropped
/// and counted; every other problem is an error naming the row and column.
inline LoadResult load_matches(const std::string& path, const Schema& schema, const DateWindow& window) {
  csv::Reader reader(path);
  std::map<std::string, std::size_t> col;
  for (const auto& c : required_columns()) col[c] = reader.column(schema.header_for(c));

  LoadResult out;
  std::set<std::pair<std::string, std::string>> keys;
  struct MatchInfo {
    std::size_t rows = 0;
    Day date;
    std::string region;
    std::unordered_set<std::string> characters;
  };
  std::unordered_map<std::string, MatchInfo> matches;
  std::vector<std::string> f;
  while (reader.next(f)) {
    const std::string row = "row " + std::to_string(reader.row());
    if (f.size() < reader.header().size())
      throw ValidationError(row + ": expected " + std::to_string(reader.header().size()) + " fields, got " +
                            std::to_string(f.size()));
    auto field = [&](const char* c) -> const std::string& { return f[col.at(c)]; };
    auto fail = [&](const char* c, const std::string& why) {
      return ValidationError(row + ", column " + schema.header_for(c) + ": " + why);
    };
    auto count = [&](const char* c, bool integral) {
      const auto& s = field(c);
      double v = 0;
      try {
        std::size_t used = 0;
        v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw fail(c, "not a number '" + s + "'");
      }
      if (!std::isfinite(v) || v < 0) throw fail(c, "must be a non-negative number, got '" + s + "'");
      if (integral && v != std::floor(v)) throw fail(c, "must be a whole count, got '" + s + "'");
      return v;
    };

    MatchRecord r;
    r.match_id = field("match_id");
    r.player_id = field("player_id");
    r.character = field("character");
    if (r.match_id.empty()) throw fail("match_id", "empty");
    if (r.player_id.empty()) throw fail("player_id", "empty");
    if (r.character.empty()) throw fail("character", "empty");
    if (!try_parse_day(field("date"), r.date)) throw fail("date", "not an ISO-8601 date '" + field("date") + "'");
    r.region = normalize_region(field("region"));
    auto role = normalize_role(field("role"));
    if (!role) throw fail("role", "unknown position '" + field("role") + "'");
    r.role = *role;
    const auto& w = field("win");
    if (w != "0" && w != "1") throw fail("win", "expected 0 or 1, got '" + w + "'");
    r.win = w == "1";
    r.kills = count("kills", true);
    r.deaths = count("deaths", true);
    r.assists = count("assists", true);
    r.gold = count("gold", false);

    if (!window.contains(r.date)) {
      ++out.dropped_outside_window;
      continue;
    }
    if (!keys.emplace(r.match_id, r.player_id).second)
      throw ValidationError(row + ": duplicate (match_id, player_id) = (" + r.match_id + ", " + r.player_id + ")");
    auto& m = matches[r.match_id];
    if (m.rows == 0) {
      m.date = r.date;
      m.region = r.region;
    } else if (m.date != r.date) {
      throw fail("date", "match " + r.match_id + " has rows on different days");
    } else if (m.region != r.region) {
      throw fail("region", "match " + r.match_id + " has rows in different regions");
    }
    if (++m.rows > 10) throw ValidationError(row + ": match " + r.match_id + " has more than 10 player rows");
    if (!m.characters.insert(r.character).second)
      throw fail("character", "'" + r.character + "' appears twice in match " + r.match_id);
    out.records.push_back(std::move(r));
  }
  return out;
}

enum class Metric { pick_rate, win_rate };
enum class WinRateFill { neutral, carry_forward };

inline Metric parse_metric(const std::string& s) {
  if (s == "pick_rate") return Metric::pick_rate;
  if (s == "win_rate") return Metric::win_rate;
  throw ValidationError("unknown metric '" + s + "' (expected pick_rate or win_rate)");
}
inline std::string to_string(Metric m) { return m == Metric::pick_rate ? "pick_rate" : "win_rate"; }

inline WinRateFill parse_win_rate_fill(const std::string& s) {
  if (s == "neutral") return WinRateFill::neutral;
  if (s == "carry_forward") return WinRateFill::carry_forward;
  throw ValidationError("unknown win-rate fill '" + s + "' (expected neutral or carry_forward)");
}

/// Per-day match totals and per unit-day appearance and win counts.
struct DailyCounts {
  std::vector<Day> days;
  std::vector<std::string> units;
  std::vector<std::size_t> matches;         // per day
  Eigen::MatrixXd appearances, wins;        // units x days
};

/// Sorted set of characters seen in the records.
inline std::vector<std::string> characters_of(const std::vector<MatchRecord>& records) {
  std::set<std::string> s;
  for (const auto& r : records) s.insert(r.character);
  return {s.begin(), s.end()};
}

inline DailyCounts daily_counts(const std::vector<MatchRecord>& records, const std::vector<std::string>& units,
                                const DateWindow& window, const std::optional<std::set<std::string>>& regions = {}) {
  DailyCounts c;
  for (Day d = window.first; d <= window.last; d += std::chrono::days{1}) c.days.push_back(d);
  c.units = units;
  const auto T = static_cast<Eigen::Index>(c.days.size());
  c.matches.assign(c.days.size(), 0);
  c.appearances = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(units.size()), T);
  c.wins = c.appearances;
  std::unordered_map<std::string, Eigen::Index> unit_row;
  for (std::size_t i = 0; i < units.size(); ++i) unit_row[units[i]] = static_cast<Eigen::Index>(i);
  std::unordered_set<std::string> seen_matches;
  for (const auto& r : records) {
    if (!window.contains(r.date))
      throw ValidationError("record for match " + r.match_id + " lies outside the panel window");
    if (regions && !regions->count(r.region)) continue;
    const auto t = static_cast<std::size_t>((r.date - window.first).count());
    if (seen_matches.insert(r.match_id).second) ++c.matches[t];
    auto it = unit_row.find(r.character);
    if (it == unit_row.end()) continue;
    c.appearances(it->second, static_cast<Eigen::Index>(t)) += 1;
    if (r.win) c.wins(it->second, static_cast<Eigen::Index>(t)) += 1;
  }
  return c;
}

struct CharacterPanelConfig {
  Metric metric = Metric::pick_rate;
  std::optional<std::set<std::string>> regions;
  DateWindow window;
  Day treatment_date;  // first post-treatment day
  std::string treated_unit;
  std::set<std::string> lgb_units;
  std::set<std::string> exclude_units;     // removed from the panel entirely
  std::set<std::string> donor_exclusions;  // kept, but never donors
  WinRateFill fill = WinRateFill::neutral;
};

/// Balanced character-by-day panel of pick rates or win rates (percent).
///
/// Pick rate divides by the day's number of matches. Win rate on a day
/// without appearances is 50 or the last observed value (50 before any).
inline PanelDataset build_character_panel(const std::vector<MatchRecord>& records, const CharacterPanelConfig& cfg) {
  if (records.empty()) throw ValidationError("no match records to build a panel from");
  if (!(cfg.window.first < cfg.treatment_date && cfg.treatment_date <= cfg.window.last))
    throw ValidationError("treatment date " + format_day(cfg.treatment_date) + " must lie strictly inside the window");
  std::vector<std::string> units;
  for (auto& u : characters_of(records))
    if (!cfg.exclude_units.count(u)) units.push_back(u);

  auto c = daily_counts(records, units, cfg.window, cfg.regions);
  std::string empty_days;
  for (std::size_t t = 0; t < c.days.size(); ++t)
    if (c.matches[t] == 0) empty_days += (empty_days.empty() ? "" : ", ") + format_day(c.days[t]);
  if (!empty_days.empty()) throw ValidationError("days with zero matches after filtering: " + empty_days);

  PanelDataset p;
  p.units = units;
  p.times = c.days;
  p.treated_unit = cfg.treated_unit;
  p.t_pre = static_cast<std::size_t>((cfg.treatment_date - cfg.window.first).count());
  p.lgb_units = cfg.lgb_units;
  for (const auto& u : cfg.donor_exclusions)
    if (!cfg.exclude_units.count(u)) p.excluded_units.insert(u);
  const auto n = static_cast<Eigen::Index>(units.size());
  const auto T = static_cast<Eigen::Index>(c.days.size());
  p.outcomes.resize(n, T);
  for (Eigen::Index i = 0; i < n; ++i) {
    double last = 50.0;
    for (Eigen::Index t = 0; t < T; ++t) {
      const double a = c.appearances(i, t);
      if (cfg.metric == Metric::pick_rate) {
        p.outcomes(i, t) = 100.0 * a / static_cast<double>(c.matches[static_cast<std::size_t>(t)]);
      } else if (a > 0) {
        last = 100.0 * c.wins(i, t) / a;
        p.outcomes(i, t) = last;
      } else {
        p.outcomes(i, t) = cfg.fill == WinRateFill::neutral ? 50.0 : last;
      }
    }
  }
  p.validate();
  return p;
}

/// Per player-day aggregates. Kill/death/assist/gold fields are sums.
struct PlayerDay {
  std::size_t matches_played = 0;
  std::size_t matches_won = 0;
  std::size_t picks_of_focal = 0;
  double kills = 0, deaths = 0, assists = 0, gold = 0;

  double avg(double sum) const { return matches_played ? sum / static_cast<double>(matches_played) : std::nan(""); }
};

struct PlayerSummary {
  std::size_t pre_matches = 0, post_matches = 0;
  std::size_t pre_focal = 0, post_focal = 0;
  std::size_t pre_days_played = 0;
  double pre_focal_pickrate = std::nan("");
  double post_focal_pickrate = std::nan("");
};

struct PlayerLedger {
  std::string focal;
  std::vector<Day> days;
  std::size_t t_pre = 0;  // days[t_pre] is the treatment day
  std::vector<std::string> players;
  std::vector<std::map<std::size_t, PlayerDay>> cells;  // per player: day index -> aggregates
  std::vector<PlayerSummary> summary;

  std::size_t index_of(const std::string& id) const {
    auto it = std::find(players.begin(), players.end(), id);
    if (it == players.end()) throw ValidationError("player '" + id + "' is not in the ledger");
    return static_cast<std::size_t>(it - players.begin());
  }
};

inline PlayerLedger build_player_ledger(const std::vector<MatchRecord>& records, const std::string& focal,
                                        const DateWindow& window, Day treatment_date) {
  if (!(window.first < treatment_date && treatment_date <= window.last))
    throw ValidationError("treatment date must lie strictly inside the window");
  PlayerLedger L;
  L.focal = focal;
  for (Day d = window.first; d <= window.last; d += std::chrono::days{1}) L.days.push_back(d);
  L.t_pre = static_cast<std::size_t>((treatment_date - window.first).count());
  std::unordered_map<std::string, std::size_t> index;
  for (const auto& r : records) {
    if (!window.contains(r.date)) throw ValidationError("record for match " + r.match_id + " lies outside the window");
    auto [it, fresh] = index.emplace(r.player_id, L.players.size());
    if (fresh) {
      L.players.push_back(r.player_id);
      L.cells.emplace_back();
    }
    auto& c = L.cells[it->second][static_cast<std::size_t>((r.date - window.first).count())];
    ++c.matches_played;
    c.matches_won += r.win;
    c.picks_of_focal += r.character == focal;
    c.kills += r.kills;
    c.deaths += r.deaths;
    c.assists += r.assists;
    c.gold += r.gold;
  }
  L.summary.resize(L.players.size());
  for (std::size_t i = 0; i < L.players.size(); ++i) {
    auto& s = L.summary[i];
    for (const auto& [t, c] : L.cells[i]) {
      if (t < L.t_pre) {
        s.pre_matches += c.matches_played;
        s.pre_focal += c.picks_of_focal;
        ++s.pre_days_played;
      } else {
        s.post_matches += c.matches_played;
        s.post_focal += c.picks_of_focal;
      }
    }
    if (s.pre_matches) s.pre_focal_pickrate = 100.0 * static_cast<double>(s.pre_focal) / static_cast<double>(s.pre_matches);
    if (s.post_matches)
      s.post_focal_pickrate = 100.0 * static_cast<double>(s.post_focal) / static_cast<double>(s.post_matches);
  }
  return L;
}

enum class Group { control, moderate, substantial, excluded };

inline std::string to_string(Group g) {
  switch (g) {
    case Group::control: return "control";
    case Group::moderate: return "moderate";
    case Group::substantial: return "substantial";
    case Group::excluded: return "excluded";
  }
  return "?";
}

struct PlayerClassification {
  std::string player_id;
  bool prior_user = false;
  double reduction_pct = std::nan("");
  Group group = Group::excluded;
  std::string note;
};

struct ClassifyConfig {
  double focal_threshold_pct = 5.0;
  std::size_t min_pre_matches = 50;
  double moderate_cut_pct = 75.0;
};

struct Classification {
  std::vector<PlayerClassification> players;  // ledger order
  std::map<Group, std::size_t> counts;
  std::size_t prior_users = 0;
  std::size_t prior_without_post = 0;
};

/// Prior users have >= threshold focal pick rate over >= min pre matches.
/// Reduction <= 0 is control, (0, cut] moderate, (cut, 100] substantial.
/// A prior user with no post-treatment matches has no defined reduction and
/// is excluded (counted in `prior_without_post`).
inline Classification classify_players(const PlayerLedger& L, const ClassifyConfig& cfg = {}) {
  if (L.t_pre == 0 || L.t_pre >= L.days.size()) throw ValidationError("ledger must cover pre and post days");
  Classification out;
  for (auto g : {Group::control, Group::moderate, Group::substantial, Group::excluded}) out.counts[g] = 0;
  for (std::size_t i = 0; i < L.players.size(); ++i) {
    const auto& s = L.summary[i];
    PlayerClassification c;
    c.player_id = L.players[i];
    c.prior_user = s.pre_matches >= cfg.min_pre_matches && s.pre_focal_pickrate >= cfg.focal_threshold_pct;
    if (!c.prior_user) {
      c.note = "not a prior user";
    } else if (s.post_matches == 0) {
      ++out.prior_without_post;
      c.note = "prior user without post-treatment matches";
    } else {
      if (!(s.pre_focal_pickrate > 0)) throw std::logic_error("prior user with zero focal pick rate");
      c.reduction_pct = 100.0 * (s.pre_focal_pickrate - s.post_focal_pickrate) / s.pre_focal_pickrate;
      if (c.reduction_pct <= 0.0)
        c.group = Group::control;
      else if (c.reduction_pct <= cfg.moderate_cut_pct)
        c.group = Group::moderate;
      else
        c.group = Group::substantial;
    }
    out.prior_users += c.prior_user;
    ++out.counts[c.group];
    out.players.push_back(std::move(c));
  }
  return out;
}

enum class GroupOutcome { pick_rate, matches, win_rate };

inline GroupOutcome parse_group_outcome(const std::string& s) {
  if (s == "pick_rate") return GroupOutcome::pick_rate;
  if (s == "matches") return GroupOutcome::matches;
  if (s == "win_rate") return GroupOutcome::win_rate;
  throw ValidationError("unknown group outcome '" + s + "' (expected pick_rate, matches or win_rate)");
}

struct GroupMean {
  Group group;
  std::size_t n_players = 0;
  double pre_mean = std::nan("");
  double post_mean = std::nan("");
};

struct GroupMeans {
  std::vector<GroupMean> groups;
  std::vector<std::string> warnings;
};

/// Each player's outcome is averaged over the days they played in a period,
/// then players are averaged with equal weight within their group.
inline GroupMeans group_daily_means(const PlayerLedger& L, const Classification& cls, GroupOutcome outcome) {
  if (cls.players.empty()) throw ValidationError("classification is empty");
  if (cls.players.size() != L.players.size()) throw ValidationError("classification does not match the ledger");
  auto value = [&](const PlayerDay& c) {
    switch (outcome) {
      case GroupOutcome::pick_rate: return 100.0 * static_cast<double>(c.picks_of_focal) / static_cast<double>(c.matches_played);
      case GroupOutcome::matches: return static_cast<double>(c.matches_played);
      case GroupOutcome::win_rate: return 100.0 * static_cast<double>(c.matches_won) / static_cast<double>(c.matches_played);
    }
    return std::nan("");
  };
  GroupMeans out;
  for (auto g : {Group::control, Group::moderate, Group::substantial}) {
    GroupMean gm{g};
    double pre_sum = 0, post_sum = 0;
    std::size_t pre_n = 0, post_n = 0;
    for (std::size_t i = 0; i < L.players.size(); ++i) {
      if (cls.players[i].group != g) continue;
      ++gm.n_players;
      double ps[2] = {0, 0};
      std::size_t pn[2] = {0, 0};
      for (const auto& [t, c] : L.cells[i]) {
        const int post = t >= L.t_pre;
        ps[post] += value(c);
        ++pn[post];
      }
      if (pn[0]) pre_sum += ps[0] / static_cast<double>(pn[0]), ++pre_n;
      if (pn[1]) post_sum += ps[1] / static_cast<double>(pn[1]), ++post_n;
    }
    if (gm.n_players == 0) {
      out.warnings.push_back("group " + to_string(g) + " is empty and omitted");
      continue;
    }
    if (pre_n) gm.pre_mean = pre_sum / static_cast<double>(pre_n);
    if (post_n) gm.post_mean = post_sum / static_cast<double>(post_n);
    out.groups.push_back(gm);
  }
  return out;
}

enum class Design { moderate, substantial };

inline Design parse_design(const std::string& s) {
  if (s == "moderate") return Design::moderate;
  if (s == "substantial") return Design::substantial;
  throw ValidationError("unknown design '" + s + "' (expected moderate or substantial)");
}
inline std::string to_string(Design d) { return d == Design::moderate ? "moderate" : "substantial"; }

inline const std::vector<std::string>& did_covariate_names() {
  static const std::vector<std::string> n = {"kills", "deaths", "assists", "gold", "daily_matches"};
  return n;
}

/// Player-day win-rate panel over control, moderate and substantial
/// players, each tagged with its group. Covariates are pre-treatment
/// per-match averages plus matches per day played. The base period is the
/// day before treatment; players without a base-day observation are dropped
/// and counted per group. `panel.treated` is unset until a design is chosen.
struct PlayerPanel {
  did::DidPanel panel;
  std::vector<Group> groups;
  std::map<Group, std::size_t> dropped_without_base;
};

inline Group parse_group(const std::string& s) {
  if (s == "control") return Group::control;
  if (s == "moderate") return Group::moderate;
  if (s == "substantial") return Group::substantial;
  if (s == "excluded") return Group::excluded;
  throw ValidationError("unknown group '" + s + "'");
}

inline PlayerPanel build_player_panel(const PlayerLedger& L, const Classification& cls) {
  if (cls.players.size() != L.players.size()) throw ValidationError("classification does not match the ledger");
  PlayerPanel out;
  auto& p = out.panel;
  p.days = L.days;
  p.base_index = L.t_pre - 1;
  p.covariate_names = did_covariate_names();
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < L.players.size(); ++i) {
    const auto g = cls.players[i].group;
    if (g == Group::excluded) continue;
    auto base = L.cells[i].find(p.base_index);
    if (base == L.cells[i].end()) {
      ++out.dropped_without_base[g];
      continue;
    }
    rows.push_back(i);
  }
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto T = static_cast<Eigen::Index>(L.days.size());
  p.outcomes = Eigen::MatrixXd::Constant(n, T, std::nan(""));
  p.covariates = Eigen::MatrixXd::Zero(n, 5);
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto i = rows[static_cast<std::size_t>(k)];
    p.players.push_back(L.players[i]);
    p.treated.push_back(0);
    out.groups.push_back(cls.players[i].group);
    PlayerDay pre;
    for (const auto& [t, c] : L.cells[i]) {
      p.outcomes(k, static_cast<Eigen::Index>(t)) =
          100.0 * static_cast<double>(c.matches_won) / static_cast<double>(c.matches_played);
      if (t < L.t_pre) {
        pre.matches_played += c.matches_played;
        pre.kills += c.kills;
        pre.deaths += c.deaths;
        pre.assists += c.assists;
        pre.gold += c.gold;
      }
    }
    const auto& s = L.summary[i];
    p.covariates.row(k) << pre.avg(pre.kills), pre.avg(pre.deaths), pre.avg(pre.assists), pre.avg(pre.gold),
        static_cast<double>(s.pre_matches) / static_cast<double>(s.pre_days_played);
  }
  return out;
}

/// Treated = the design's group, controls = the control group; other
/// players are left out.
inline did::DidPanel select_design(const PlayerPanel& pp, Design design) {
  const Group treated_group = design == Design::moderate ? Group::moderate : Group::substantial;
  const auto& in = pp.panel;
  did::DidPanel p;
  p.days = in.days;
  p.base_index = in.base_index;
  p.covariate_names = in.covariate_names;
  auto dropped = [&](Group g) {
    auto it = pp.dropped_without_base.find(g);
    return it == pp.dropped_without_base.end() ? std::size_t{0} : it->second;
  };
  p.dropped_without_base = dropped(Group::control) + dropped(treated_group);
  std::vector<Eigen::Index> rows;
  for (std::size_t i = 0; i < pp.groups.size(); ++i)
    if (pp.groups[i] == treated_group || pp.groups[i] == Group::control) rows.push_back(static_cast<Eigen::Index>(i));
  p.outcomes.resize(static_cast<Eigen::Index>(rows.size()), in.outcomes.cols());
  p.covariates.resize(static_cast<Eigen::Index>(rows.size()), in.covariates.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto i = rows[k];
    p.players.push_back(in.players[static_cast<std::size_t>(i)]);
    p.treated.push_back(pp.groups[static_cast<std::size_t>(i)] == treated_group ? 1 : 0);
    p.outcomes.row(static_cast<Eigen::Index>(k)) = in.outcomes.row(i);
    p.covariates.row(static_cast<Eigen::Index>(k)) = in.covariates.row(i);
  }
  p.validate();
  return p;
}

inline did::DidPanel build_did_panel(const PlayerLedger& L, const Classification& cls, Design design) {
  return select_design(build_player_panel(L, cls), design);
}

/// Observed player-days as `player,date,outcome`; players, groups,
/// covariates and the day grid go to the JSON sidecar.
inline void write_player_panel(const PlayerPanel& pp, const std::string& csv_path) {
  const auto& p = pp.panel;
  std::ofstream out(csv_path);
  if (!out) throw IoError("cannot open '" + csv_path + "' for writing");
  out << "player,date,outcome\n";
  for (std::size_t i = 0; i < p.n_players(); ++i)
    for (std::size_t t = 0; t < p.n_days(); ++t)
      if (p.observed(i, t))
        out << csv::escape(p.players[i]) << ',' << format_day(p.days[t]) << ',' << csv::number(p.y(i, t)) << '\n';
  nlohmann::json players = nlohmann::json::array();
  for (std::size_t i = 0; i < p.n_players(); ++i) {
    std::vector<double> x(static_cast<std::size_t>(p.covariates.cols()));
    for (Eigen::Index j = 0; j < p.covariates.cols(); ++j)
      x[static_cast<std::size_t>(j)] = p.covariates(static_cast<Eigen::Index>(i), j);
    players.push_back({{"id", p.players[i]}, {"group", to_string(pp.groups[i])}, {"covariates", x}});
  }
  nlohmann::json dropped = nlohmann::json::object();
  for (const auto& [g, n] : pp.dropped_without_base) dropped[to_string(g)] = n;
  nlohmann::json meta = {{"schema_version", kSchemaVersion},
                         {"first_day", format_day(p.days.front())},
                         {"n_days", p.n_days()},
                         {"base_date", format_day(p.days[p.base_index])},
                         {"covariate_names", p.covariate_names},
                         {"dropped_without_base", dropped},
                         {"players", players}};
  std::ofstream side(sidecar_path(csv_path));
  if (!side) throw IoError("cannot write player-panel sidecar next to '" + csv_path + "'");
  side << meta.dump(2) << '\n';
}

inline PlayerPanel read_player_panel(const std::string& csv_path) {
  std::ifstream side(sidecar_path(csv_path));
  if (!side) throw IoError("missing player-panel sidecar '" + sidecar_path(csv_path) + "'");
  PlayerPanel pp;
  auto& p = pp.panel;
  std::unordered_map<std::string, Eigen::Index> row_of;
  try {
    nlohmann::json meta;
    side >> meta;
    const Day first = parse_day(meta.at("first_day").get<std::string>());
    const auto n_days = meta.at("n_days").get<std::size_t>();
    for (std::size_t t = 0; t < n_days; ++t) p.days.push_back(first + std::chrono::days{static_cast<int>(t)});
    const Day base = parse_day(meta.at("base_date").get<std::string>());
    if (n_days == 0 || base < p.days.front() || base > p.days.back())
      throw ValidationError("base_date outside the day grid");
    p.base_index = static_cast<std::size_t>((base - first).count());
    p.covariate_names = meta.at("covariate_names").get<std::vector<std::string>>();
    const auto dropped = meta.value("dropped_without_base", nlohmann::json::object());
    for (const auto& [g, n] : dropped.items()) pp.dropped_without_base[parse_group(g)] = n.get<std::size_t>();
    const auto& players = meta.at("players");
    p.covariates.resize(static_cast<Eigen::Index>(players.size()), static_cast<Eigen::Index>(p.covariate_names.size()));
    for (const auto& pl : players) {
      const auto i = static_cast<Eigen::Index>(p.players.size());
      p.players.push_back(pl.at("id").get<std::string>());
      pp.groups.push_back(parse_group(pl.at("group").get<std::string>()));
      p.treated.push_back(0);
      auto x = pl.at("covariates").get<std::vector<double>>();
      if (x.size() != p.covariate_names.size())
        throw ValidationError("player '" + p.players.back() + "' has the wrong number of covariates");
      for (std::size_t j = 0; j < x.size(); ++j) p.covariates(i, static_cast<Eigen::Index>(j)) = x[j];
      if (!row_of.emplace(p.players.back(), i).second) throw ValidationError("duplicate player '" + p.players.back() + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("bad player-panel sidecar '" + sidecar_path(csv_path) + "': " + e.what());
  }
  p.outcomes = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(p.players.size()),
                                         static_cast<Eigen::Index>(p.days.size()), std::nan(""));
  csv::Reader reader(csv_path);
  const auto cp = reader.column("player"), cd = reader.column("date"), cv = reader.column("outcome");
  std::vector<std::string> f;
  while (reader.next(f)) {
    const std::string row = "row " + std::to_string(reader.row());
    if (f.size() < reader.header().size()) throw ValidationError(row + ": too few fields");
    auto it = row_of.find(f[cp]);
    if (it == row_of.end()) throw ValidationError(row + ", column player: unknown player '" + f[cp] + "'");
    Day d;
    if (!try_parse_day(f[cd], d) || d < p.days.front() || d > p.days.back())
      throw ValidationError(row + ", column date: bad or out-of-range day '" + f[cd] + "'");
    double v = 0;
    try {
      std::size_t used = 0;
      v = std::stod(f[cv], &used);
      if (used != f[cv].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ValidationError(row + ", column outcome: not a number '" + f[cv] + "'");
    }
    auto& cell = p.outcomes(it->second, static_cast<Eigen::Index>((d - p.days.front()).count()));
    if (!std::isnan(cell)) throw ValidationError(row + ": duplicate player-day");
    cell = v;
  }
  return pp;
}

}  // namespace panelci::dataio
