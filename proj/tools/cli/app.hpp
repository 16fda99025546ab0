#pragma once

#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "cli/manifest.hpp"
#include "cli/report.hpp"
#include "panelci/dataio.hpp"
#include "panelci/decomp.hpp"
#include "panelci/did.hpp"
#include "panelci/errors.hpp"
#include "panelci/panel.hpp"
#include "panelci/robustness.hpp"
#include "panelci/scm.hpp"
#include "panelci/simgen.hpp"

#ifndef PANELCI_VERSION
#define PANELCI_VERSION "0.0.0"
#endif

namespace panelci::cli {

enum ExitCode : int { kOk = 0, kInvalid = 1, kNumerical = 2 };

/// State shared by one invocation: the output directory, hashed inputs and
/// the seed, turned into a manifest when the command finishes.
struct Run {
  std::string command;
  CLI::App* sub = nullptr;
  Artifacts out;
  std::vector<FileDigest> inputs;
  std::optional<std::uint64_t> seed;

  void input(const std::string& path) { inputs.push_back({path, sha256_file(path)}); }
};

/// Resolved option values of a subcommand (flags, file values, defaults),
/// excluding the output directory.
inline json resolved_config(const CLI::App& sub) {
  json cfg = json::object();
  for (const CLI::Option* o : sub.get_options()) {
    const auto name = o->get_single_name();
    if (name == "help" || name == "out" || name.empty()) continue;
    if (o->get_expected_min() == 0) {
      cfg[name] = o->count() > 0;
    } else if (o->count() > 0) {
      const auto& r = o->results();
      cfg[name] = r.size() == 1 ? json(r.front()) : json(r);
    } else {
      cfg[name] = o->get_default_str();
    }
  }
  return cfg;
}

inline RunManifest make_manifest(const Run& run) {
  RunManifest m;
  m.command = run.command;
  m.config = resolved_config(*run.sub);
  m.config["command"] = run.command;
  m.config_hash = sha256_hex(m.config.dump());
  m.inputs = run.inputs;
  m.seed = run.seed;
  m.tool_version = PANELCI_VERSION;
  m.timestamp = utc_timestamp();
  m.outputs = run.out.files();
  return m;
}

inline void write_manifest(const Run& run) {
  const json j = make_manifest(run);
  std::ofstream out(run.out.manifest_path());
  if (!out) throw IoError("cannot write '" + run.out.manifest_path() + "'");
  out << j.dump(2) << '\n';
}

struct ScArgs {
  std::string panel;
  std::string zeta = "rule";
  bool no_smooth = false;
  double bandwidth = 7.0;
  std::string kernel = "gaussian";
  std::string boundary = "split_at_t_pre";
  double level = 0.95;
  bool sample_sd = false;

  scm::FitConfig config(std::size_t threads) const {
    scm::FitConfig c;
    c.zeta = scm::ZetaSpec::parse(zeta);
    if (!no_smooth) c.smoothing = SmoothConfig{bandwidth, parse_kernel(kernel), parse_boundary_mode(boundary)};
    c.population_sd = !sample_sd;
    c.level = level;
    c.threads = threads;
    return c;
  }
};

inline void add_sc_options(CLI::App* s, ScArgs& a) {
  s->add_option("--panel", a.panel, "Panel CSV (unit,date,value) with its .json sidecar")->required();
  s->add_option("--zeta", a.zeta, "Ridge strength: rule, 0, or a non-negative number")->capture_default_str();
  s->add_flag("--no-smooth", a.no_smooth, "Estimate on the raw series");
  s->add_option("--bandwidth", a.bandwidth, "Smoothing bandwidth in days")->capture_default_str()->check(CLI::PositiveNumber);
  s->add_option("--kernel", a.kernel, "Smoothing kernel")->capture_default_str()->check(CLI::IsMember({"gaussian", "epanechnikov"}));
  s->add_option("--boundary", a.boundary, "Smoothing boundary mode")
      ->capture_default_str()
      ->check(CLI::IsMember({"split_at_t_pre", "whole_series"}));
  s->add_option("--level", a.level, "Confidence level")->capture_default_str()->check(CLI::Range(0.5, 0.9999));
  s->add_flag("--sample-sd", a.sample_sd, "Zeta rule uses the N-1 standard deviation");
}

struct MatchArgs {
  std::string matches;
  std::vector<std::string> columns;
  std::string window_start, window_end;

  dataio::Schema schema() const {
    dataio::Schema s;
    for (const auto& c : columns) {
      const auto eq = c.find('=');
      if (eq == std::string::npos || eq == 0 || eq + 1 == c.size())
        throw ValidationError("--column expects logical=header, got '" + c + "'");
      const auto logical = c.substr(0, eq);
      const auto& req = dataio::required_columns();
      if (std::find(req.begin(), req.end(), logical) == req.end())
        throw ValidationError("--column: unknown logical column '" + logical + "'");
      s.rename[logical] = c.substr(eq + 1);
    }
    return s;
  }

  DateWindow window() const {
    DateWindow w{parse_day(window_start), parse_day(window_end)};
    if (w.last < w.first) throw ValidationError("window end precedes window start");
    return w;
  }
};

inline void add_match_options(CLI::App* s, MatchArgs& a) {
  s->add_option("--matches", a.matches, "Match-level CSV")->required();
  s->add_option("--column", a.columns, "Header override, logical=header (repeatable)");
  s->add_option("--window-start", a.window_start, "First study day (YYYY-MM-DD)")->required();
  s->add_option("--window-end", a.window_end, "Last study day (YYYY-MM-DD)")->required();
}

inline std::set<std::string> as_set(const std::vector<std::string>& v) { return {v.begin(), v.end()}; }

/// Parses argv and runs one subcommand. Returns the process exit status.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Panel-data causal inference: synthetic control, placebo inference, DiD", "panelci"};
  app.config_formatter(std::make_shared<CLI::ConfigINI>());
  auto* config_opt = app.set_config("--config", "", "INI file; section per command, e.g. [sc.fit] or [simulate]");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.set_version_flag("--version", PANELCI_VERSION);
  app.require_subcommand(1);
  app.fallthrough();
  std::size_t threads = 0;
  app.add_option("--threads", threads, "Worker threads (0 = all cores)")->capture_default_str();

  std::string out_dir;
  std::map<CLI::App*, std::function<void(Run&)>> handlers;
  auto command = [&](CLI::App* parent, const std::string& name, const std::string& desc) {
    auto* s = parent->add_subcommand(name, desc);
    s->fallthrough();
    return s;
  };
  auto with_out = [&](CLI::App* s) { s->add_option("--out", out_dir, "Output directory")->required(); };
  auto workers = [&] { return threads ? threads : std::max(1u, std::thread::hardware_concurrency()); };

  // ingest
  MatchArgs ingest_args;
  auto* ingest = command(&app, "ingest", "Validate and normalize a match log");
  add_match_options(ingest, ingest_args);
  with_out(ingest);
  handlers[ingest] = [&](Run& run) {
    run.input(ingest_args.matches);
    auto r = dataio::load_matches(ingest_args.matches, ingest_args.schema(), ingest_args.window());
    std::map<std::string, std::size_t> regions;
    std::set<std::string> matches, players;
    for (const auto& m : r.records) {
      matches.insert(m.match_id);
      players.insert(m.player_id);
      ++regions[m.region];
    }
    auto o = run.out.open("matches.csv");
    write_matches(o, r.records);
    json j = header(run.command);
    j.update({{"n_records", r.records.size()},
              {"dropped_outside_window", r.dropped_outside_window},
              {"n_matches", matches.size()},
              {"n_players", players.size()},
              {"n_characters", dataio::characters_of(r.records).size()},
              {"records_by_region", regions},
              {"window", {ingest_args.window_start, ingest_args.window_end}}});
    run.out.write_json("ingest.json", j);
  };

  // panel
  MatchArgs panel_args;
  std::string metric = "pick_rate", treatment_date, treated, win_fill = "neutral";
  std::vector<std::string> regions, lgb, exclude, donor_exclude;
  auto* panel = command(&app, "panel", "Build a balanced character-by-day panel");
  add_match_options(panel, panel_args);
  panel->add_option("--metric", metric, "Outcome")->capture_default_str()->check(CLI::IsMember({"pick_rate", "win_rate"}));
  panel->add_option("--treatment-date", treatment_date, "First post-treatment day")->required();
  panel->add_option("--treated", treated, "Treated unit label")->required();
  panel->add_option("--regions", regions, "Keep only these regions")->delimiter(',');
  panel->add_option("--lgb", lgb, "Units flagged LGB (never donors)")->delimiter(',');
  panel->add_option("--exclude", exclude, "Units dropped from the panel")->delimiter(',');
  panel->add_option("--donor-exclude", donor_exclude, "Units kept but never used as donors")->delimiter(',');
  panel->add_option("--win-fill", win_fill, "Win rate on days without appearances")
      ->capture_default_str()
      ->check(CLI::IsMember({"neutral", "carry_forward"}));
  with_out(panel);
  handlers[panel] = [&](Run& run) {
    run.input(panel_args.matches);
    auto r = dataio::load_matches(panel_args.matches, panel_args.schema(), panel_args.window());
    dataio::CharacterPanelConfig c;
    c.metric = dataio::parse_metric(metric);
    if (!regions.empty()) c.regions = as_set(regions);
    c.window = panel_args.window();
    c.treatment_date = parse_day(treatment_date);
    c.treated_unit = treated;
    c.lgb_units = as_set(lgb);
    c.exclude_units = as_set(exclude);
    c.donor_exclusions = as_set(donor_exclude);
    c.fill = dataio::parse_win_rate_fill(win_fill);
    auto p = dataio::build_character_panel(r.records, c);
    const auto path = run.out.path("panel.csv");
    write_panel(p, path);
    run.out.path("panel.json");
  };

  // classify
  MatchArgs cls_args;
  std::string focal, cls_treatment;
  dataio::ClassifyConfig cls_cfg;
  auto* classify = command(&app, "classify", "Classify prior users and build the player DiD panel");
  add_match_options(classify, cls_args);
  classify->add_option("--focal", focal, "Focal character")->required();
  classify->add_option("--treatment-date", cls_treatment, "First post-treatment day")->required();
  classify->add_option("--threshold", cls_cfg.focal_threshold_pct, "Minimum pre-period focal pick rate (%)")->capture_default_str();
  classify->add_option("--min-pre-matches", cls_cfg.min_pre_matches, "Minimum pre-period matches")->capture_default_str();
  classify->add_option("--moderate-cut", cls_cfg.moderate_cut_pct, "Largest reduction (%) still moderate")->capture_default_str();
  with_out(classify);
  handlers[classify] = [&](Run& run) {
    run.input(cls_args.matches);
    auto r = dataio::load_matches(cls_args.matches, cls_args.schema(), cls_args.window());
    auto L = dataio::build_player_ledger(r.records, focal, cls_args.window(), parse_day(cls_treatment));
    auto c = dataio::classify_players(L, cls_cfg);
    auto o = run.out.open("classification.csv");
    write_classification(o, L, c);
    json counts = json::object();
    for (const auto& [g, n] : c.counts) counts[dataio::to_string(g)] = n;
    json j = header(run.command);
    j.update({{"focal", focal},
              {"n_players", c.players.size()},
              {"prior_users", c.prior_users},
              {"prior_without_post", c.prior_without_post},
              {"counts", counts}});
    for (auto [name, outcome] : {std::pair{"pick_rate", dataio::GroupOutcome::pick_rate},
                                 std::pair{"matches", dataio::GroupOutcome::matches},
                                 std::pair{"win_rate", dataio::GroupOutcome::win_rate}})
      j["group_means"][name] = group_means_json(dataio::group_daily_means(L, c, outcome));
    run.out.write_json("classify.json", j);
    dataio::write_player_panel(dataio::build_player_panel(L, c), run.out.path("players.csv"));
    run.out.path("players.json");
  };

  // sc
  auto* sc = command(&app, "sc", "Synthetic control");
  sc->require_subcommand(1);
  ScArgs fit_args, plc_args, bd_args, loo_args;
  auto read_sc_panel = [&](Run& run, const ScArgs& a) {
    run.input(a.panel);
    run.input(sidecar_path(a.panel));
    return read_panel(a.panel);
  };

  auto* fit = command(sc, "fit", "Fit weights, effects and placebo confidence interval");
  add_sc_options(fit, fit_args);
  with_out(fit);
  handlers[fit] = [&](Run& run) {
    const auto p = read_sc_panel(run, fit_args);
    const auto cfg = fit_args.config(workers());
    const auto f = scm::fit(p, cfg);
    json j = header(run.command);
    j.update(fit_json(f, cfg));
    run.out.write_json("sc_fit.json", j);
    auto o = run.out.open("sc_fit_series.csv");
    write_fit_series(o, f);
  };

  double min_pre_rmse = 1.0;
  auto* placebo = command(sc, "placebo", "Placebo-in-space RMSE ratios");
  add_sc_options(placebo, plc_args);
  placebo->add_option("--min-pre-rmse", min_pre_rmse, "Drop donors whose placebo pre-RMSE is below this")
      ->capture_default_str();
  with_out(placebo);
  handlers[placebo] = [&](Run& run) {
    const auto p = read_sc_panel(run, plc_args);
    const auto rep = robustness::placebo_in_space(p, plc_args.config(workers()), min_pre_rmse);
    json j = header(run.command);
    j.update(placebo_json(rep));
    run.out.write_json("placebo.json", j);
    auto o = run.out.open("placebo_ratios.csv");
    write_placebo_ratios(o, rep);
    auto g = run.out.open("placebo_gaps.csv");
    write_placebo_gaps(g, rep, p.times);
  };

  std::size_t shift = 0;
  auto* backdate = command(sc, "backdate", "Move the treatment date earlier and check the hold-out fit");
  add_sc_options(backdate, bd_args);
  backdate->add_option("--shift", shift, "Days to move the treatment date back")->required();
  with_out(backdate);
  handlers[backdate] = [&](Run& run) {
    const auto p = read_sc_panel(run, bd_args);
    const auto cfg = bd_args.config(workers());
    const auto b = robustness::backdate(p, shift, cfg);
    json j = header(run.command);
    j.update(backdate_json(b, cfg));
    run.out.write_json("backdate.json", j);
    auto o = run.out.open("backdate_series.csv");
    write_backdate_series(o, b);
  };

  bool loo_variance = false;
  auto* loo = command(sc, "loo", "Leave-one-out over donors with positive weight");
  add_sc_options(loo, loo_args);
  loo->add_flag("--with-variance", loo_variance, "Also compute placebo variance for each refit");
  with_out(loo);
  handlers[loo] = [&](Run& run) {
    const auto p = read_sc_panel(run, loo_args);
    const auto cfg = loo_args.config(workers());
    const auto r = robustness::leave_one_out(p, cfg, loo_variance);
    json j = header(run.command);
    j.update(loo_json(r, cfg));
    run.out.write_json("loo.json", j);
    auto o = run.out.open("loo_series.csv");
    write_loo_series(o, r);
  };

  // did
  auto* did_cmd = command(&app, "did", "Difference-in-differences");
  did_cmd->require_subcommand(1);
  std::string did_panel, design = "moderate", estimator = "dr", law = "mammen";
  did::BootstrapConfig boot;
  std::optional<std::size_t> pre_window;
  auto* att = command(did_cmd, "att", "ATT(t) with multiplier-bootstrap bands");
  att->add_option("--panel", did_panel, "Player panel CSV (player,date,outcome) with its .json sidecar")->required();
  att->add_option("--design", design, "Treated group")->capture_default_str()->check(CLI::IsMember({"moderate", "substantial"}));
  att->add_option("--estimator", estimator, "unc or dr")->capture_default_str()->check(CLI::IsMember({"unc", "dr"}));
  att->add_option("--draws", boot.n_draws, "Bootstrap draws")->capture_default_str();
  att->add_option("--seed", boot.seed, "Bootstrap seed")->capture_default_str();
  att->add_option("--law", law, "Multiplier law")->capture_default_str()->check(CLI::IsMember({"mammen", "rademacher"}));
  att->add_option("--level", boot.level, "Confidence level")->capture_default_str()->check(CLI::Range(0.5, 0.9999));
  att->add_option("--pre-window", pre_window, "Placebo days before the base period (default: all)");
  with_out(att);
  handlers[att] = [&](Run& run) {
    run.input(did_panel);
    run.input(sidecar_path(did_panel));
    const auto d = dataio::parse_design(design);
    const auto p = dataio::select_design(dataio::read_player_panel(did_panel), d);
    did::SeriesConfig cfg;
    cfg.estimator = did::parse_estimator(estimator);
    cfg.pre_window = pre_window;
    cfg.bootstrap = boot;
    cfg.bootstrap.law = did::parse_weight_law(law);
    run.seed = boot.seed;
    const auto s = did::att_series(p, cfg);
    json j = header(run.command);
    j.update(att_json(s, d, pre_window));
    run.out.write_json("att.json", j);
    auto o = run.out.open("att_series.csv");
    write_att_series(o, s);
  };

  // decompose
  ScArgs dec_args;
  std::vector<std::string> members;
  auto* decompose = command(&app, "decompose", "Split the treated effect using a composite LGB unit");
  add_sc_options(decompose, dec_args);
  decompose->add_option("--members", members, "Composite members (comma separated)")->required()->delimiter(',');
  with_out(decompose);
  handlers[decompose] = [&](Run& run) {
    const auto p = read_sc_panel(run, dec_args);
    const auto cfg = dec_args.config(workers());
    const auto r = decomp::decompose(p, as_set(members), cfg);
    json j = header(run.command);
    j.update(decomp_json(r, cfg));
    run.out.write_json("decompose.json", j);
    auto o = run.out.open("decomp_series.csv");
    write_decomp_series(o, r);
  };

  // simulate
  std::string kind = "synthetic_control", effect_path = "none";
  simgen::SimConfig sim;
  simgen::PlayerSimConfig psim;
  std::optional<std::size_t> t_pre, clone_of;
  std::optional<double> noise_sd, mu;
  std::optional<std::string> start_date;
  std::uint64_t seed = 1;
  auto* simulate = command(&app, "simulate", "Write a simulated panel with known ground truth");
  simulate->add_option("--kind", kind, "Panel kind")->capture_default_str()->check(CLI::IsMember({"synthetic_control", "players"}));
  simulate->add_option("--seed", seed, "Random seed")->capture_default_str();
  simulate->add_option("--t-pre", t_pre, "Pre-treatment periods");
  simulate->add_option("--noise-sd", noise_sd, "Noise standard deviation");
  simulate->add_option("--mu", mu, "Outcome level");
  simulate->add_option("--start-date", start_date, "First day (YYYY-MM-DD)");
  simulate->add_option("--n-units", sim.n_units, "[synthetic_control] units")->capture_default_str();
  simulate->add_option("--n-periods", sim.n_periods, "[synthetic_control] periods")->capture_default_str();
  simulate->add_option("--factor-rank", sim.factor_rank, "[synthetic_control] latent factors")->capture_default_str();
  simulate->add_option("--effect-path", effect_path, "[synthetic_control] none, constant or ramp")
      ->capture_default_str()
      ->check(CLI::IsMember({"none", "constant", "ramp"}));
  simulate->add_option("--delta", sim.delta, "[synthetic_control] effect size")->capture_default_str();
  simulate->add_option("--treated-index", sim.treated_index, "[synthetic_control] treated unit index")->capture_default_str();
  simulate->add_option("--clone-of", clone_of, "[synthetic_control] treated copies this unit's structure");
  std::vector<std::string> sim_lgb;
  simulate->add_option("--lgb", sim_lgb, "[synthetic_control] units flagged LGB")->delimiter(',');
  simulate->add_option("--n-players", psim.n_players, "[players] players")->capture_default_str();
  simulate->add_option("--n-days", psim.n_days, "[players] days")->capture_default_str();
  simulate->add_option("--treated-share", psim.treated_share, "[players] treated share")->capture_default_str();
  simulate->add_option("--effect", psim.effect, "[players] treatment effect")->capture_default_str();
  simulate->add_option("--player-sd", psim.player_sd, "[players] player effect SD")->capture_default_str();
  simulate->add_option("--day-sd", psim.day_sd, "[players] day effect SD")->capture_default_str();
  simulate->add_option("--play-prob", psim.play_prob, "[players] daily play probability")->capture_default_str();
  with_out(simulate);
  handlers[simulate] = [&](Run& run) {
    run.seed = seed;
    json truth = header(run.command);
    truth["kind"] = kind;
    truth["seed"] = seed;
    if (kind == "synthetic_control") {
      sim.seed = seed;
      sim.effect_path = simgen::parse_effect_path(effect_path);
      sim.treated_clone_of = clone_of;
      if (t_pre) sim.t_pre = *t_pre;
      if (noise_sd) sim.noise_sd = *noise_sd;
      if (mu) sim.mu = *mu;
      if (start_date) sim.start_date = *start_date;
      auto s = simgen::generate(sim);
      for (const auto& u : sim_lgb) {
        if (!s.panel.find(u)) throw ValidationError("--lgb: no unit '" + u + "'");
        if (u == s.panel.treated_unit) throw ValidationError("--lgb: the treated unit cannot be LGB");
        s.panel.lgb_units.insert(u);
      }
      write_panel(s.panel, run.out.path("panel.csv"));
      run.out.path("panel.json");
      truth["treated_unit"] = s.panel.treated_unit;
      truth["t_pre"] = s.panel.t_pre;
      truth["effect_path"] = effect_path;
      truth["delta"] = sim.delta;
      truth["true_effect"] = dated_series(s.panel.times, 0, s.true_effect, "effect");
    } else {
      psim.seed = seed;
      if (t_pre) psim.t_pre = *t_pre;
      if (noise_sd) psim.noise_sd = *noise_sd;
      if (mu) psim.mu = *mu;
      if (start_date) psim.start_date = *start_date;
      const auto s = simgen::generate_players(psim);
      dataio::PlayerPanel pp;
      pp.panel = s.panel;
      for (auto d : s.panel.treated) pp.groups.push_back(d ? dataio::Group::moderate : dataio::Group::control);
      dataio::write_player_panel(pp, run.out.path("players.csv"));
      run.out.path("players.json");
      truth["treated_group"] = "moderate";
      truth["base_date"] = format_day(s.panel.days[s.panel.base_index]);
      truth["effect"] = s.true_effect;
      truth["dropped_without_base"] = s.panel.dropped_without_base;
    }
    run.out.write_json("ground_truth.json", truth);
  };

  auto leaf_of = [&]() {
    CLI::App* leaf = &app;
    for (;;) {
      auto subs = leaf->get_subcommands();
      if (subs.empty()) return leaf;
      leaf = subs.front();
    }
  };

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << leaf_of()->help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << PANELCI_VERSION << '\n';
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << leaf_of()->help();
    return kInvalid;
  }

  CLI::App* leaf = leaf_of();
  auto h = handlers.find(leaf);
  if (h == handlers.end()) {
    err << leaf->help();
    return kInvalid;
  }
  std::string name;
  for (CLI::App* a = leaf; a && a != &app; a = a->get_parent()) name = a->get_name() + (name.empty() ? "" : " " + name);
  try {
    Run run{name, leaf, Artifacts(out_dir), {}, std::nullopt};
    if (config_opt->count() > 0) run.input(config_opt->as<std::string>());
    h->second(run);
    write_manifest(run);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kInvalid;
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kInvalid;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  }
  return kOk;
}

}  // namespace panelci::cli
