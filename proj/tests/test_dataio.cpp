#include <filesystem>
#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "panelci/dataio.hpp"

using namespace panelci;
using namespace panelci::dataio;

namespace {

const char* kHeader = "match_id,date,region,player_id,character,role,win,kills,deaths,assists,gold\n";

std::string write_tmp(const std::string& name, const std::string& body) {
  auto path = std::filesystem::path(::testing::TempDir()) / name;
  std::ofstream(path) << body;
  return path.string();
}

DateWindow june() { return {parse_day("2022-06-01"), parse_day("2022-06-30")}; }

MatchRecord rec(std::string match, const char* date, std::string player, std::string character, bool win,
                std::string region = "europe") {
  MatchRecord r;
  r.match_id = std::move(match);
  r.date = parse_day(date);
  r.region = std::move(region);
  r.player_id = std::move(player);
  r.character = std::move(character);
  r.role = "middle";
  r.win = win;
  r.kills = 5;
  r.deaths = 3;
  r.assists = 7;
  r.gold = 10000;
  return r;
}

std::string message_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const std::exception& e) {
    return e.what();
  }
  return "";
}

// Adds `n` single-player matches on `date` for `player`, `focal` of them with the focal pick.
void add_matches(std::vector<MatchRecord>& out, const std::string& player, const char* date, int n, int focal,
                 int wins = 0) {
  for (int k = 0; k < n; ++k)
    out.push_back(rec(player + "_" + date + "_" + std::to_string(k), date, player, k < focal ? "Graves" : "Other",
                      k < wins));
}

}  // namespace

TEST(LoadMatches, ValidRowsPassThrough) {
  auto path = write_tmp("three.csv", std::string(kHeader) +
                                         "m1,2022-06-03,EUW1,p1,Graves,JUNGLE,1,8,2,5,12000\n"
                                         "m1,2022-06-03,EUW1,p2,Leona,UTILITY,0,1,6,12,7000.5\n"
                                         "m2,2022-06-04T23:30:00-05:00,LA2,p1,Graves,jungle,0,3,3,3,9000\n");
  auto r = load_matches(path, {}, june());
  ASSERT_EQ(r.records.size(), 3u);
  EXPECT_EQ(r.dropped_outside_window, 0u);
  EXPECT_EQ(r.records[0].region, "europe");
  EXPECT_EQ(r.records[1].role, "utility");
  EXPECT_DOUBLE_EQ(r.records[1].gold, 7000.5);
  EXPECT_TRUE(r.records[0].win);
  EXPECT_EQ(r.records[2].region, "latin_america");
  EXPECT_EQ(format_day(r.records[2].date), "2022-06-05");  // UTC day of the start time
}

TEST(LoadMatches, DuplicateKeyNamed) {
  auto path = write_tmp("dup.csv", std::string(kHeader) +
                                       "m1,2022-06-03,KR,p1,Graves,TOP,1,0,0,0,0\n"
                                       "m1,2022-06-03,KR,p1,Leona,TOP,1,0,0,0,0\n");
  auto msg = message_of([&] { load_matches(path, {}, june()); });
  EXPECT_NE(msg.find("(m1, p1)"), std::string::npos) << msg;
  EXPECT_THROW(load_matches(path, {}, june()), ValidationError);
}

TEST(LoadMatches, OutOfWindowRowsDroppedAndCounted) {
  auto path = write_tmp("window.csv", std::string(kHeader) +
                                          "m1,2022-06-03,NA1,p1,Graves,TOP,1,0,0,0,0\n"
                                          "m2,2022-07-03,NA1,p1,Graves,TOP,1,0,0,0,0\n"
                                          "m3,2022-06-30,NA1,p1,Graves,TOP,1,0,0,0,0\n");
  auto r = load_matches(path, {}, june());
  EXPECT_EQ(r.records.size(), 2u);
  EXPECT_EQ(r.dropped_outside_window, 1u);
}

TEST(LoadMatches, MalformedRowsNameRowAndColumn) {
  auto bad = [&](const std::string& row) {
    return message_of([&] { load_matches(write_tmp("bad.csv", std::string(kHeader) + "m0,2022-06-01,KR,p0,Ahri,MID,0,1,1,1,1\n" + row), {}, june()); });
  };
  EXPECT_NE(bad("m1,2022-06-03,KR,p1,Graves,TOP,2,0,0,0,0\n").find("row 2, column win"), std::string::npos);
  EXPECT_NE(bad("m1,June 3,KR,p1,Graves,TOP,1,0,0,0,0\n").find("row 2, column date"), std::string::npos);
  EXPECT_NE(bad("m1,2022-06-03,KR,p1,Graves,TOP,1,-1,0,0,0\n").find("column kills"), std::string::npos);
  EXPECT_NE(bad("m1,2022-06-03,KR,p1,Graves,TOP,1,1.5,0,0,0\n").find("column kills"), std::string::npos);
  EXPECT_NE(bad("m1,2022-06-03,KR,p1,Graves,SWEEPER,1,0,0,0,0\n").find("column role"), std::string::npos);
  EXPECT_NE(bad("m1,2022-06-03,KR,p1\n").find("row 2"), std::string::npos);
  EXPECT_NE(bad("m0,2022-06-01,KR,p1,Ahri,TOP,1,0,0,0,0\n").find("appears twice"), std::string::npos);
}

TEST(LoadMatches, MatchSizeCapped) {
  std::string body = kHeader;
  for (int i = 0; i < 11; ++i)
    body += "m1,2022-06-03,KR,p" + std::to_string(i) + ",c" + std::to_string(i) + ",TOP,1,0,0,0,0\n";
  auto msg = message_of([&] { load_matches(write_tmp("big.csv", body), {}, june()); });
  EXPECT_NE(msg.find("more than 10"), std::string::npos) << msg;
}

TEST(LoadMatches, SchemaRenamesAndMissingColumns) {
  auto path = write_tmp("renamed.csv",
                        "game,day,server,summoner,champion,lane,result,k,d,a,g\n"
                        "m1,2022-06-03,EUN1,p1,Graves,BOTTOM,1,1,2,3,4\n");
  Schema s;
  s.rename = {{"match_id", "game"}, {"date", "day"},   {"region", "server"}, {"player_id", "summoner"},
              {"character", "champion"}, {"role", "lane"}, {"win", "result"}, {"kills", "k"},
              {"deaths", "d"}, {"assists", "a"}, {"gold", "g"}};
  auto r = load_matches(path, s, june());
  ASSERT_EQ(r.records.size(), 1u);
  EXPECT_EQ(r.records[0].region, "europe");
  auto msg = message_of([&] { load_matches(path, {}, june()); });
  EXPECT_NE(msg.find("no column 'match_id'"), std::string::npos) << msg;
  EXPECT_THROW(load_matches("/nonexistent/matches.csv", {}, june()), IoError);
}

TEST(Regions, ServerTagsMapToFourRegions) {
  EXPECT_EQ(normalize_region("BR1"), "latin_america");
  EXPECT_EQ(normalize_region("lan"), "latin_america");
  EXPECT_EQ(normalize_region("LAS"), "latin_america");
  EXPECT_EQ(normalize_region("EUNE"), "europe");
  EXPECT_EQ(normalize_region("euw"), "europe");
  EXPECT_EQ(normalize_region("KR"), "korea");
  EXPECT_EQ(normalize_region("NA1"), "north_america");
  EXPECT_EQ(normalize_region("OC1"), "other");
  EXPECT_EQ(normalize_region("JP1"), "other");
}

namespace {

CharacterPanelConfig two_day_cfg(Metric m) {
  CharacterPanelConfig c;
  c.metric = m;
  c.window = {parse_day("2022-06-01"), parse_day("2022-06-02")};
  c.treatment_date = parse_day("2022-06-02");
  c.treated_unit = "Graves";
  return c;
}

}  // namespace

TEST(CharacterPanel, PickRateUsesMatchCount) {
  std::vector<MatchRecord> r;
  for (int m = 0; m < 4; ++m) r.push_back(rec("a" + std::to_string(m), "2022-06-01", "p" + std::to_string(m), "Ahri", true));
  r.push_back(rec("a0", "2022-06-01", "q0", "Graves", false));
  r.push_back(rec("b0", "2022-06-02", "p0", "Graves", true));
  auto p = build_character_panel(r, two_day_cfg(Metric::pick_rate));
  EXPECT_DOUBLE_EQ(p.outcomes(p.index_of("Graves"), 0), 25.0);
  EXPECT_DOUBLE_EQ(p.outcomes(p.index_of("Ahri"), 0), 100.0);
  EXPECT_DOUBLE_EQ(p.outcomes(p.index_of("Graves"), 1), 100.0);
  EXPECT_DOUBLE_EQ(p.outcomes(p.index_of("Ahri"), 1), 0.0);
  EXPECT_EQ(p.t_pre, 1u);
}

TEST(CharacterPanel, WinRateAndFillModes) {
  std::vector<MatchRecord> r = {rec("a0", "2022-06-01", "p0", "Graves", true), rec("a1", "2022-06-01", "p1", "Graves", true),
                                rec("a1", "2022-06-01", "p2", "Ahri", false), rec("b0", "2022-06-02", "p0", "Ahri", true)};
  auto cfg = two_day_cfg(Metric::win_rate);
  auto p = build_character_panel(r, cfg);
  EXPECT_DOUBLE_EQ(p.outcomes(p.index_of("Graves"), 0), 100.0);
  EXPECT_DOUBLE_EQ(p.outcomes(p.index_of("Graves"), 1), 50.0);  // no appearances
  EXPECT_DOUBLE_EQ(p.outcomes(p.index_of("Ahri"), 0), 0.0);
  EXPECT_DOUBLE_EQ(p.outcomes(p.index_of("Ahri"), 1), 100.0);
  cfg.fill = WinRateFill::carry_forward;
  EXPECT_DOUBLE_EQ(build_character_panel(r, cfg).outcomes(p.index_of("Graves"), 1), 100.0);
}

TEST(CharacterPanel, HandCountedTwoByTwo) {
  // day 1: 2 matches (Ahri in both, Graves in one); day 2: 3 matches (Graves in two)
  std::vector<MatchRecord> r = {rec("a", "2022-06-01", "p0", "Ahri", true),   rec("a", "2022-06-01", "p1", "Graves", false),
                                rec("b", "2022-06-01", "p2", "Ahri", false),  rec("c", "2022-06-02", "p0", "Graves", true),
                                rec("d", "2022-06-02", "p1", "Graves", true), rec("e", "2022-06-02", "p3", "Ahri", true)};
  auto p = build_character_panel(r, two_day_cfg(Metric::pick_rate));
  ASSERT_EQ(p.units, (std::vector<std::string>{"Ahri", "Graves"}));
  Eigen::MatrixXd expect(2, 2);
  expect << 100.0, 100.0 / 3.0, 50.0, 200.0 / 3.0;
  EXPECT_LE((p.outcomes - expect).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(CharacterPanel, EmptyDayListed) {
  auto cfg = two_day_cfg(Metric::pick_rate);
  cfg.window.last = parse_day("2022-06-03");
  std::vector<MatchRecord> r = {rec("a", "2022-06-01", "p0", "Graves", true), rec("b", "2022-06-03", "p0", "Graves", true)};
  auto msg = message_of([&] { build_character_panel(r, cfg); });
  EXPECT_NE(msg.find("2022-06-02"), std::string::npos) << msg;
  cfg.regions = std::set<std::string>{"korea"};
  cfg.window.last = parse_day("2022-06-02");
  EXPECT_THROW(build_character_panel(r, cfg), ValidationError);
}

TEST(CharacterPanel, ExclusionsAndMetadata) {
  std::vector<MatchRecord> r = {rec("a", "2022-06-01", "p0", "Graves", true), rec("a", "2022-06-01", "p1", "Belveth", true),
                                rec("a", "2022-06-01", "p2", "Leona", true),  rec("a", "2022-06-01", "p3", "Ahri", true),
                                rec("b", "2022-06-02", "p0", "Graves", true)};
  auto cfg = two_day_cfg(Metric::pick_rate);
  cfg.exclude_units = {"Belveth"};
  cfg.donor_exclusions = {"Ahri"};
  cfg.lgb_units = {"Leona"};
  auto p = build_character_panel(r, cfg);
  EXPECT_FALSE(p.find("Belveth"));
  EXPECT_EQ(p.excluded_units, std::set<std::string>{"Ahri"});
  EXPECT_TRUE(p.donor_indices().empty());
  cfg.treatment_date = parse_day("2022-06-01");
  EXPECT_THROW(build_character_panel(r, cfg), ValidationError);
}

namespace {

// Random matches with 10 rows each, drawn from a 30-character pool.
std::vector<MatchRecord> random_matches(std::uint64_t seed, int per_day, bool allow_short) {
  std::mt19937_64 rng(seed);
  std::vector<std::string> pool;
  for (int c = 0; c < 30; ++c) pool.push_back("c" + std::to_string(c));
  const char* regions[] = {"europe", "korea", "north_america", "latin_america", "other"};
  std::vector<MatchRecord> out;
  const char* days[] = {"2022-06-01", "2022-06-02", "2022-06-03"};
  int id = 0;
  for (auto d : days)
    for (int m = 0; m < per_day; ++m, ++id) {
      std::shuffle(pool.begin(), pool.end(), rng);
      const int rows = allow_short ? 1 + static_cast<int>(rng() % 10) : 10;
      const auto* region = regions[rng() % 5];
      for (int k = 0; k < rows; ++k)
        out.push_back(rec("m" + std::to_string(id), d, "p" + std::to_string(id) + "_" + std::to_string(k), pool[static_cast<std::size_t>(k)], k < 5, region));
    }
  return out;
}

}  // namespace

TEST(CharacterPanel, PickRatesSumToHundredTimesPicksPerMatch) {
  for (bool short_matches : {false, true}) {
    auto r = random_matches(short_matches ? 2 : 1, 25, short_matches);
    CharacterPanelConfig cfg;
    cfg.window = {parse_day("2022-06-01"), parse_day("2022-06-03")};
    cfg.treatment_date = parse_day("2022-06-03");
    cfg.treated_unit = "c0";
    auto p = build_character_panel(r, cfg);
    for (Eigen::Index t = 0; t < 3; ++t) {
      const double total = p.outcomes.col(t).sum();
      std::map<std::string, int> rows;
      for (const auto& x : r)
        if (x.date == p.times[static_cast<std::size_t>(t)]) ++rows[x.match_id];
      double avg = 0;
      for (auto& [m, n] : rows) avg += n;
      avg /= static_cast<double>(rows.size());
      EXPECT_NEAR(total, 100.0 * avg, 1e-9);
      EXPECT_LE(total, 1000.0 + 1e-9);
      if (!short_matches) {
        EXPECT_NEAR(total, 1000.0, 1e-9);
      }
      EXPECT_GE(p.outcomes.col(t).minCoeff(), 0.0);
      EXPECT_LE(p.outcomes.col(t).maxCoeff(), 100.0);
    }
  }
}

TEST(CharacterPanel, RegionCountsSumToPooled) {
  auto r = random_matches(3, 40, true);
  const auto units = characters_of(r);
  const DateWindow w{parse_day("2022-06-01"), parse_day("2022-06-03")};
  auto pooled = daily_counts(r, units, w);
  std::vector<std::size_t> matches(3, 0);
  Eigen::MatrixXd app = Eigen::MatrixXd::Zero(pooled.appearances.rows(), 3), wins = app;
  for (const char* reg : {"europe", "korea", "north_america", "latin_america", "other"}) {
    auto c = daily_counts(r, units, w, std::set<std::string>{reg});
    for (std::size_t t = 0; t < 3; ++t) matches[t] += c.matches[t];
    app += c.appearances;
    wins += c.wins;
  }
  EXPECT_EQ(matches, pooled.matches);
  EXPECT_EQ(app, pooled.appearances);
  EXPECT_EQ(wins, pooled.wins);
}

namespace {

DateWindow two_days() { return {parse_day("2022-06-01"), parse_day("2022-06-02")}; }

}  // namespace

TEST(ClassifyPlayers, GroupRules) {
  std::vector<MatchRecord> r;
  add_matches(r, "below", "2022-06-01", 200, 9);       // 4.5% pre
  add_matches(r, "below", "2022-06-02", 10, 0);
  add_matches(r, "flat", "2022-06-01", 100, 10);       // 10% -> 10%
  add_matches(r, "flat", "2022-06-02", 50, 5);
  add_matches(r, "cut75", "2022-06-01", 100, 20);      // 20% -> 5%: exactly 75
  add_matches(r, "cut75", "2022-06-02", 20, 1);
  add_matches(r, "quit", "2022-06-01", 60, 30);        // 50% -> 0%
  add_matches(r, "quit", "2022-06-02", 10, 0);
  add_matches(r, "more", "2022-06-01", 50, 5);         // 10% -> 20%
  add_matches(r, "more", "2022-06-02", 10, 2);
  add_matches(r, "few", "2022-06-01", 49, 49);         // too few matches
  add_matches(r, "few", "2022-06-02", 10, 0);
  add_matches(r, "gone", "2022-06-01", 80, 40);        // no post matches
  add_matches(r, "half", "2022-06-01", 100, 10);       // 10% -> 5%
  add_matches(r, "half", "2022-06-02", 20, 1);
  auto L = build_player_ledger(r, "Graves", two_days(), parse_day("2022-06-02"));
  auto c = classify_players(L);
  auto group = [&](const std::string& id) { return c.players[L.index_of(id)].group; };
  EXPECT_EQ(group("below"), Group::excluded);
  EXPECT_FALSE(c.players[L.index_of("below")].prior_user);
  EXPECT_EQ(group("flat"), Group::control);
  EXPECT_DOUBLE_EQ(c.players[L.index_of("flat")].reduction_pct, 0.0);
  EXPECT_EQ(group("cut75"), Group::moderate);
  EXPECT_DOUBLE_EQ(c.players[L.index_of("cut75")].reduction_pct, 75.0);
  EXPECT_EQ(group("quit"), Group::substantial);
  EXPECT_EQ(group("more"), Group::control);
  EXPECT_DOUBLE_EQ(c.players[L.index_of("more")].reduction_pct, -100.0);
  EXPECT_EQ(group("few"), Group::excluded);
  EXPECT_EQ(group("gone"), Group::excluded);
  EXPECT_TRUE(c.players[L.index_of("gone")].prior_user);
  EXPECT_EQ(group("half"), Group::moderate);
  EXPECT_EQ(c.prior_users, 6u);
  EXPECT_EQ(c.prior_without_post, 1u);
  EXPECT_EQ(c.counts[Group::control], 2u);
  EXPECT_EQ(c.counts[Group::moderate], 2u);
  EXPECT_EQ(c.counts[Group::substantial], 1u);
}

TEST(ClassifyPlayers, PartitionProperty) {
  std::mt19937_64 rng(17);
  std::vector<MatchRecord> r;
  for (int i = 0; i < 300; ++i) {
    const std::string id = "p" + std::to_string(i);
    const int pre = 20 + static_cast<int>(rng() % 100), post = static_cast<int>(rng() % 40);
    add_matches(r, id, "2022-06-01", pre, static_cast<int>(rng() % static_cast<unsigned>(pre / 3 + 1)));
    if (post) add_matches(r, id, "2022-06-02", post, static_cast<int>(rng() % static_cast<unsigned>(post / 3 + 1)));
  }
  auto L = build_player_ledger(r, "Graves", two_days(), parse_day("2022-06-02"));
  auto c = classify_players(L);
  EXPECT_EQ(c.counts[Group::control] + c.counts[Group::moderate] + c.counts[Group::substantial],
            c.prior_users - c.prior_without_post);
  for (std::size_t i = 0; i < c.players.size(); ++i) {
    const auto& p = c.players[i];
    if (p.group != Group::excluded) {
      EXPECT_TRUE(p.prior_user);
    }
    const auto& s = L.summary[i];
    EXPECT_EQ(p.prior_user, s.pre_matches >= 50 && s.pre_focal_pickrate >= 5.0);
    if (!std::isnan(s.pre_focal_pickrate)) {
      EXPECT_GE(s.pre_focal_pickrate, 0.0);
      EXPECT_LE(s.pre_focal_pickrate, 100.0);
    }
  }
}

TEST(GroupDailyMeans, PlayerThenGroupAveraging) {
  std::vector<MatchRecord> r;
  // control player A: constant 50% win rate
  add_matches(r, "A", "2022-06-01", 60, 6, 30);
  add_matches(r, "A", "2022-06-02", 4, 1, 2);
  auto L = build_player_ledger(r, "Graves", two_days(), parse_day("2022-06-02"));
  auto c = classify_players(L);
  auto g = group_daily_means(L, c, GroupOutcome::win_rate);
  ASSERT_EQ(g.groups.size(), 1u);
  EXPECT_EQ(g.groups[0].group, Group::control);
  EXPECT_DOUBLE_EQ(g.groups[0].pre_mean, 50.0);
  EXPECT_DOUBLE_EQ(g.groups[0].post_mean, 50.0);
  EXPECT_EQ(g.warnings.size(), 2u);

  // two control players at 40 and 60, unequal volume; then a third played on two pre days
  r.clear();
  add_matches(r, "B", "2022-06-01", 100, 10, 40);
  add_matches(r, "B", "2022-06-03", 10, 1, 4);
  add_matches(r, "C", "2022-06-01", 50, 5, 30);
  add_matches(r, "C", "2022-06-03", 5, 1, 3);
  const DateWindow w{parse_day("2022-06-01"), parse_day("2022-06-03")};
  L = build_player_ledger(r, "Graves", w, parse_day("2022-06-03"));
  c = classify_players(L);
  EXPECT_DOUBLE_EQ(group_daily_means(L, c, GroupOutcome::win_rate).groups[0].pre_mean, 50.0);

  add_matches(r, "D", "2022-06-01", 30, 3, 30);  // day 1: 100%
  add_matches(r, "D", "2022-06-02", 30, 3, 0);   // day 2: 0%
  add_matches(r, "D", "2022-06-03", 2, 1, 1);
  L = build_player_ledger(r, "Graves", w, parse_day("2022-06-03"));
  c = classify_players(L);
  auto m = group_daily_means(L, c, GroupOutcome::win_rate).groups[0];
  // player means 40, 60, (100 + 0)/2 = 50 -> 50; pooling matches would give 100/210
  EXPECT_DOUBLE_EQ(m.pre_mean, 50.0);
  EXPECT_EQ(m.n_players, 3u);
  auto mm = group_daily_means(L, c, GroupOutcome::matches).groups[0];
  EXPECT_DOUBLE_EQ(mm.pre_mean, (100.0 + 50.0 + 30.0) / 3.0);
  EXPECT_DOUBLE_EQ(mm.post_mean, (10.0 + 5.0 + 2.0) / 3.0);
}

TEST(DidPanelFromLedger, OutcomesCovariatesAndRoundTrip) {
  const DateWindow w{parse_day("2022-06-01"), parse_day("2022-06-04")};
  std::vector<MatchRecord> r;
  add_matches(r, "ctl", "2022-06-01", 40, 4, 20);
  add_matches(r, "ctl", "2022-06-03", 20, 2, 15);  // base day
  add_matches(r, "ctl", "2022-06-04", 10, 1, 5);
  add_matches(r, "mod", "2022-06-02", 30, 6, 10);
  add_matches(r, "mod", "2022-06-03", 30, 6, 12);
  add_matches(r, "mod", "2022-06-04", 10, 1, 10);  // 20% -> 10%
  add_matches(r, "sub", "2022-06-01", 100, 50, 50);
  add_matches(r, "sub", "2022-06-04", 10, 0, 5);   // no base-day play
  auto L = build_player_ledger(r, "Graves", w, parse_day("2022-06-04"));
  auto c = classify_players(L);
  ASSERT_EQ(c.players[L.index_of("mod")].group, Group::moderate);
  auto p = build_did_panel(L, c, Design::moderate);
  ASSERT_EQ(p.players, (std::vector<std::string>{"ctl", "mod"}));
  EXPECT_EQ(p.base_index, 2u);
  EXPECT_EQ(p.treated, (std::vector<std::uint8_t>{0, 1}));
  EXPECT_DOUBLE_EQ(p.y(0, 2), 75.0);
  EXPECT_TRUE(std::isnan(p.y(0, 1)));
  EXPECT_DOUBLE_EQ(p.y(1, 3), 100.0);
  EXPECT_DOUBLE_EQ(p.covariates(0, 0), 5.0);
  EXPECT_DOUBLE_EQ(p.covariates(0, 3), 10000.0);
  EXPECT_DOUBLE_EQ(p.covariates(0, 4), 30.0);  // 60 matches over 2 pre days
  auto s = build_did_panel(L, c, Design::substantial);
  EXPECT_EQ(s.players, std::vector<std::string>{"ctl"});
  EXPECT_EQ(s.dropped_without_base, 1u);

  const auto path = (std::filesystem::path(::testing::TempDir()) / "players_rt.csv").string();
  auto pp = build_player_panel(L, c);
  EXPECT_EQ(pp.groups, (std::vector<Group>{Group::control, Group::moderate}));
  EXPECT_EQ(pp.dropped_without_base[Group::substantial], 1u);
  write_player_panel(pp, path);
  auto back = select_design(read_player_panel(path), Design::moderate);
  EXPECT_EQ(back.players, p.players);
  EXPECT_EQ(back.treated, p.treated);
  EXPECT_EQ(back.days, p.days);
  EXPECT_EQ(back.base_index, p.base_index);
  EXPECT_EQ(back.covariates, p.covariates);
  EXPECT_EQ(back.dropped_without_base, 0u);
  EXPECT_EQ(select_design(read_player_panel(path), Design::substantial).dropped_without_base, 1u);
  for (std::size_t i = 0; i < p.n_players(); ++i)
    for (std::size_t t = 0; t < p.n_days(); ++t) {
      EXPECT_EQ(back.observed(i, t), p.observed(i, t));
      if (p.observed(i, t)) {
        EXPECT_EQ(back.y(i, t), p.y(i, t));
      }
    }
}
