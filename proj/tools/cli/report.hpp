#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "panelci/csv.hpp"
#include "panelci/dataio.hpp"
#include "panelci/decomp.hpp"
#include "panelci/did.hpp"
#include "panelci/panel.hpp"
#include "panelci/robustness.hpp"
#include "panelci/scm.hpp"
#include "panelci/simgen.hpp"

namespace panelci::cli {

using nlohmann::json;

/// Files written by one command, all under a single output directory.
class Artifacts {
 public:
  explicit Artifacts(const std::string& dir) : dir_(dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw IoError("cannot create output directory '" + dir + "': " + ec.message());
  }

  /// Registers `name` and returns its path.
  std::string path(const std::string& name) {
    auto p = (dir_ / name).lexically_normal().string();
    files_.push_back(p);
    return p;
  }

  void write_json(const std::string& name, const json& j) {
    std::ofstream out(path(name));
    if (!out) throw IoError("cannot write '" + files_.back() + "'");
    out << j.dump(2) << '\n';
  }

  std::ofstream open(const std::string& name) {
    std::ofstream out(path(name));
    if (!out) throw IoError("cannot write '" + files_.back() + "'");
    return out;
  }

  const std::vector<std::string>& files() const { return files_; }
  std::string manifest_path() const { return (dir_ / "manifest.json").lexically_normal().string(); }

 private:
  std::filesystem::path dir_;
  std::vector<std::string> files_;
};

inline json header(const std::string& command) { return {{"schema_version", kSchemaVersion}, {"command", command}}; }

inline json smoothing_json(const std::optional<SmoothConfig>& s) {
  if (!s) return nullptr;
  return {{"kernel", to_string(s->kernel)}, {"bandwidth", s->bandwidth}, {"boundary", to_string(s->boundary_mode)}};
}

inline json dated_series(const std::vector<Day>& days, std::size_t first, const Eigen::VectorXd& v, const char* key) {
  json a = json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k)
    a.push_back({{"date", format_day(days[first + static_cast<std::size_t>(k)])}, {key, v(k)}});
  return a;
}

inline json fit_json(const scm::SCFit& f, const scm::FitConfig& cfg) {
  json w = json::array();
  for (std::size_t k = 0; k < f.weights.donor_labels.size(); ++k)
    w.push_back({{"unit", f.weights.donor_labels[k]}, {"weight", f.weights.omega(static_cast<Eigen::Index>(k))}});
  return {{"treated_unit", f.treated_unit},
          {"t_pre", f.t_pre},
          {"n_periods", f.times.size()},
          {"treatment_date", format_day(f.times.at(f.t_pre))},
          {"zeta_spec", cfg.zeta.describe()},
          {"zeta", f.weights.zeta},
          {"smoothing", smoothing_json(cfg.smoothing)},
          {"weights", w},
          {"objective", f.weights.objective_value},
          {"kkt_residual", f.weights.kkt_residual},
          {"solver_iterations", f.weights.iterations},
          {"avg_effect", f.avg_effect},
          {"variance", f.variance},
          {"se", std::sqrt(f.variance)},
          {"level", cfg.level},
          {"ci", {f.ci_lo, f.ci_hi}},
          {"pre_rmse", f.pre_rmse},
          {"post_rmse", f.post_rmse},
          {"pre_treatment_mean", f.pre_treatment_mean},
          {"pct_change", f.pct_change},
          {"n_placebo", f.n_placebo},
          {"skipped_placebos", f.skipped_placebos},
          {"effects", dated_series(f.times, f.t_pre, f.effects, "effect")}};
}

/// date, observed, synthetic, gap, is_post
inline void write_fit_series(std::ostream& out, const scm::SCFit& f) {
  out << "date,observed,synthetic,gap,is_post\n";
  for (std::size_t t = 0; t < f.times.size(); ++t) {
    const auto i = static_cast<Eigen::Index>(t);
    out << format_day(f.times[t]) << ',' << csv::number(f.observed(i)) << ',' << csv::number(f.counterfactual(i)) << ','
        << csv::number(f.observed(i) - f.counterfactual(i)) << ',' << (t >= f.t_pre ? 1 : 0) << '\n';
  }
}

inline json placebo_json(const robustness::RmseRatioReport& r) {
  json units = json::array();
  for (const auto& u : r.units)
    units.push_back({{"unit", u.label},
                     {"is_treated", u.is_treated},
                     {"included", u.included},
                     {"pre_rmse", u.pre_rmse},
                     {"post_rmse", u.post_rmse},
                     {"ratio", u.ratio}});
  return {{"treated_rank", r.treated_rank},
          {"n_considered", r.n_considered},
          {"rank_fraction", static_cast<double>(r.treated_rank) / static_cast<double>(r.n_considered)},
          {"min_pre_rmse", r.min_pre_rmse_filter},
          {"skipped", r.skipped},
          {"units", units}};
}

inline void write_placebo_ratios(std::ostream& out, const robustness::RmseRatioReport& r) {
  out << "unit,is_treated,included,pre_rmse,post_rmse,ratio\n";
  for (const auto& u : r.units)
    out << csv::escape(u.label) << ',' << u.is_treated << ',' << u.included << ',' << csv::number(u.pre_rmse) << ','
        << csv::number(u.post_rmse) << ',' << csv::number(u.ratio) << '\n';
}

inline void write_placebo_gaps(std::ostream& out, const robustness::RmseRatioReport& r, const std::vector<Day>& days) {
  out << "unit,date,gap,is_treated\n";
  for (const auto& u : r.units)
    for (Eigen::Index t = 0; t < u.gap.size(); ++t)
      out << csv::escape(u.label) << ',' << format_day(days[static_cast<std::size_t>(t)]) << ','
          << csv::number(u.gap(t)) << ',' << u.is_treated << '\n';
}

inline json backdate_json(const robustness::BackdateResult& b, const scm::FitConfig& cfg) {
  return {{"shift_days", b.shift_days},
          {"shifted_t_pre", b.shifted_t_pre},
          {"holdout_rmse", b.holdout_rmse},
          {"holdout_mean_gap", b.holdout_mean_gap},
          {"post_mean_effect", b.post_mean_effect},
          {"holdout_gaps", dated_series(b.fit.times, b.shifted_t_pre, b.holdout_gaps, "gap")},
          {"fit", fit_json(b.fit, cfg)}};
}

/// date, observed, synthetic, gap, window (pre | holdout | post)
inline void write_backdate_series(std::ostream& out, const robustness::BackdateResult& b) {
  const auto& f = b.fit;
  out << "date,observed,synthetic,gap,window\n";
  for (std::size_t t = 0; t < f.times.size(); ++t) {
    const auto i = static_cast<Eigen::Index>(t);
    const char* w = t < b.shifted_t_pre ? "pre" : t < b.shifted_t_pre + b.shift_days ? "holdout" : "post";
    out << format_day(f.times[t]) << ',' << csv::number(f.observed(i)) << ',' << csv::number(f.counterfactual(i)) << ','
        << csv::number(f.observed(i) - f.counterfactual(i)) << ',' << w << '\n';
  }
}

inline json loo_json(const robustness::LooResult& r, const scm::FitConfig& cfg) {
  json fits = json::array();
  for (const auto& lf : r.fits) {
    json w = json::array();
    for (std::size_t k = 0; k < lf.fit.weights.donor_labels.size(); ++k)
      w.push_back({{"unit", lf.fit.weights.donor_labels[k]}, {"weight", lf.fit.weights.omega(static_cast<Eigen::Index>(k))}});
    fits.push_back({{"dropped", lf.dropped},
                    {"avg_effect", lf.fit.avg_effect},
                    {"pre_rmse", lf.fit.pre_rmse},
                    {"variance", lf.fit.variance},
                    {"ci", {lf.fit.ci_lo, lf.fit.ci_hi}},
                    {"weights", w}});
  }
  return {{"baseline", fit_json(r.baseline, cfg)}, {"leave_one_out", fits}};
}

/// dropped, date, synthetic (dropped = "none" for the baseline)
inline void write_loo_series(std::ostream& out, const robustness::LooResult& r) {
  out << "dropped,date,observed,synthetic\n";
  auto rows = [&](const std::string& label, const scm::SCFit& f) {
    for (std::size_t t = 0; t < f.times.size(); ++t)
      out << csv::escape(label) << ',' << format_day(f.times[t]) << ','
          << csv::number(f.observed(static_cast<Eigen::Index>(t))) << ','
          << csv::number(f.counterfactual(static_cast<Eigen::Index>(t))) << '\n';
  };
  rows("none", r.baseline);
  for (const auto& lf : r.fits) rows(lf.dropped, lf.fit);
}

inline json att_json(const did::AttSeries& s, dataio::Design design, std::optional<std::size_t> pre_window) {
  json days = json::array();
  for (std::size_t k = 0; k < s.days.size(); ++k)
    days.push_back({{"date", format_day(s.days[k])},
                    {"att", s.att[k]},
                    {"se", s.se[k]},
                    {"ci", {s.ci_lo[k], s.ci_hi[k]}},
                    {"band", {s.band_lo[k], s.band_hi[k]}},
                    {"is_pre", static_cast<bool>(s.is_pre[k])},
                    {"estimable", static_cast<bool>(s.estimable[k])},
                    {"n_treated", s.n_treated_day[k]},
                    {"n_control", s.n_control_day[k]},
                    {"trimmed", s.trimmed_day[k]}});
  return {{"design", dataio::to_string(design)},
          {"estimator", did::to_string(s.estimator)},
          {"pre_window", pre_window ? json(*pre_window) : json(nullptr)},
          {"n_treated", s.n_treated},
          {"n_control", s.n_control},
          {"dropped_without_base", s.dropped_without_base},
          {"avg_att", s.avg_att},
          {"avg_se", s.avg_se},
          {"avg_ci", {s.avg_lo, s.avg_hi}},
          {"n_post_days", s.n_post_used},
          {"level", s.bootstrap.level},
          {"pointwise_z", s.z},
          {"sup_t_crit", s.crit},
          {"degenerate", s.degenerate},
          {"bootstrap", {{"n_draws", s.bootstrap.n_draws}, {"weight_law", did::to_string(s.bootstrap.law)}, {"seed", s.bootstrap.seed}}},
          {"warnings", s.warnings},
          {"days", days}};
}

/// day, att, lo, hi, is_pre (lo/hi = simultaneous band), plus pointwise bounds
inline void write_att_series(std::ostream& out, const did::AttSeries& s) {
  out << "day,att,lo,hi,is_pre,ci_lo,ci_hi\n";
  for (std::size_t k = 0; k < s.days.size(); ++k)
    out << format_day(s.days[k]) << ',' << csv::number(s.att[k]) << ',' << csv::number(s.band_lo[k]) << ','
        << csv::number(s.band_hi[k]) << ',' << (s.is_pre[k] ? 1 : 0) << ',' << csv::number(s.ci_lo[k]) << ','
        << csv::number(s.ci_hi[k]) << '\n';
}

inline json decomp_json(const decomp::DecompResult& r, const scm::FitConfig& cfg) {
  json series = json::array();
  for (std::size_t k = 0; k < r.post_days.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    series.push_back({{"date", format_day(r.post_days[k])},
                      {"tau", r.tau_series(i)},
                      {"gamma", r.gamma_series(i)},
                      {"tau_c", r.tau_c_series(i)}});
  }
  return {{"members", r.members},
          {"tau_avg", r.tau_fit.avg_effect},
          {"tau_ci", {r.tau_fit.ci_lo, r.tau_fit.ci_hi}},
          {"gamma_avg", r.gamma_fit.avg_effect},
          {"gamma_variance", r.gamma_fit.variance},
          {"gamma_se", std::sqrt(r.gamma_fit.variance)},
          {"gamma_ci", {r.gamma_fit.ci_lo, r.gamma_fit.ci_hi}},
          {"tau_c_avg", r.tau_c_avg},
          {"tau_c_ci", nullptr},
          {"assumptions", {{"sutva", r.assumptions.sutva}, {"effect_homogeneity", r.assumptions.homogeneity}}},
          {"series", series},
          {"tau_fit", fit_json(r.tau_fit, cfg)},
          {"gamma_fit", fit_json(r.gamma_fit, cfg)}};
}

inline void write_decomp_series(std::ostream& out, const decomp::DecompResult& r) {
  out << "date,tau,gamma,tau_c\n";
  for (std::size_t k = 0; k < r.post_days.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    out << format_day(r.post_days[k]) << ',' << csv::number(r.tau_series(i)) << ',' << csv::number(r.gamma_series(i))
        << ',' << csv::number(r.tau_c_series(i)) << '\n';
  }
}

inline void write_matches(std::ostream& out, const std::vector<dataio::MatchRecord>& records) {
  out << "match_id,date,region,player_id,character,role,win,kills,deaths,assists,gold\n";
  for (const auto& r : records)
    out << csv::escape(r.match_id) << ',' << format_day(r.date) << ',' << r.region << ',' << csv::escape(r.player_id)
        << ',' << csv::escape(r.character) << ',' << r.role << ',' << (r.win ? 1 : 0) << ',' << csv::number(r.kills)
        << ',' << csv::number(r.deaths) << ',' << csv::number(r.assists) << ',' << csv::number(r.gold) << '\n';
}

inline void write_classification(std::ostream& out, const dataio::PlayerLedger& L, const dataio::Classification& c) {
  out << "player_id,prior_user,pre_matches,post_matches,pre_focal_pickrate,post_focal_pickrate,reduction_pct,group\n";
  for (std::size_t i = 0; i < c.players.size(); ++i) {
    const auto& p = c.players[i];
    const auto& s = L.summary[i];
    out << csv::escape(p.player_id) << ',' << (p.prior_user ? 1 : 0) << ',' << s.pre_matches << ',' << s.post_matches
        << ',' << csv::number(s.pre_focal_pickrate) << ',' << csv::number(s.post_focal_pickrate) << ','
        << csv::number(p.reduction_pct) << ',' << dataio::to_string(p.group) << '\n';
  }
}

inline json group_means_json(const dataio::GroupMeans& g) {
  json a = json::array();
  for (const auto& m : g.groups)
    a.push_back({{"group", dataio::to_string(m.group)}, {"n_players", m.n_players}, {"pre", m.pre_mean}, {"post", m.post_mean}});
  return {{"groups", a}, {"warnings", g.warnings}};
}

}  // namespace panelci::cli
