#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <random>
#include <string>

#include <Eigen/Dense>

#include "panelci/dates.hpp"
#include "panelci/did_panel.hpp"
#include "panelci/errors.hpp"
#include "panelci/panel.hpp"

namespace panelci::simgen {

enum class EffectPath { none, constant, ramp };

inline EffectPath parse_effect_path(const std::string& s) {
  if (s == "none") return EffectPath::none;
  if (s == "constant") return EffectPath::constant;
  if (s == "ramp") return EffectPath::ramp;
  throw ValidationError("unknown effect path '" + s + "' (expected none|constant|ramp)");
}

inline std::string to_string(EffectPath p) {
  switch (p) {
    case EffectPath::none: return "none";
    case EffectPath::constant: return "constant";
    case EffectPath::ramp: return "ramp";
  }
  return "";
}

/// Interactive fixed-effects generator:
/// Y_it = mu + lambda_i . F_t + eps_it, plus the effect path on the treated
/// unit after t_pre. Loadings and factors are standard normal.
struct SimConfig {
  std::size_t n_units = 40;
  std::size_t n_periods = 120;
  std::size_t t_pre = 90;
  std::size_t factor_rank = 2;
  double noise_sd = 1.0;
  double mu = 20.0;
  EffectPath effect_path = EffectPath::none;
  double delta = 0.0;
  std::size_t treated_index = 0;
  std::optional<std::size_t> treated_clone_of;  // copy this unit's loadings and noise
  std::uint64_t seed = 1;
  std::string start_date = "2022-01-01";

  void validate() const {
    if (n_units < 2) throw ValidationError("simulation needs at least two units");
    if (t_pre < 1 || t_pre >= n_periods) throw ValidationError("simulation needs 1 <= t_pre < n_periods");
    if (factor_rank > std::min(n_units, t_pre)) throw ValidationError("factor_rank must be <= min(n_units, t_pre)");
    if (!(noise_sd >= 0.0) || !std::isfinite(noise_sd)) throw ValidationError("noise_sd must be >= 0");
    if (treated_index >= n_units) throw ValidationError("treated_index out of range");
    if (treated_clone_of && (*treated_clone_of >= n_units || *treated_clone_of == treated_index))
      throw ValidationError("treated_clone_of must name a different existing unit");
    if (!std::isfinite(delta) || !std::isfinite(mu)) throw ValidationError("mu and delta must be finite");
    parse_day(start_date);
  }
};

struct SimPanel {
  PanelDataset panel;
  Eigen::VectorXd true_effect;  // length T, zero for t <= t_pre
};

inline std::string unit_label(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "unit_%03zu", i);
  return buf;
}

inline SimPanel generate(const SimConfig& cfg) {
  cfg.validate();
  const auto n = static_cast<Eigen::Index>(cfg.n_units);
  const auto T = static_cast<Eigen::Index>(cfg.n_periods);
  const auto r = static_cast<Eigen::Index>(cfg.factor_rank);
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> std_normal(0.0, 1.0);

  Eigen::MatrixXd loadings(n, r), factors(T, r), noise(n, T);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index k = 0; k < r; ++k) loadings(i, k) = std_normal(rng);
  for (Eigen::Index t = 0; t < T; ++t)
    for (Eigen::Index k = 0; k < r; ++k) factors(t, k) = std_normal(rng);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index t = 0; t < T; ++t) noise(i, t) = cfg.noise_sd * std_normal(rng);

  const auto treated = static_cast<Eigen::Index>(cfg.treated_index);
  if (cfg.treated_clone_of) {
    const auto src = static_cast<Eigen::Index>(*cfg.treated_clone_of);
    loadings.row(treated) = loadings.row(src);
    noise.row(treated) = noise.row(src);
  }

  SimPanel out;
  auto& p = out.panel;
  const Day start = parse_day(cfg.start_date);
  for (Eigen::Index t = 0; t < T; ++t) p.times.push_back(start + std::chrono::days{t});
  for (std::size_t i = 0; i < cfg.n_units; ++i) p.units.push_back(unit_label(i));
  p.outcomes = (loadings * factors.transpose() + noise).array() + cfg.mu;
  p.treated_unit = p.units[cfg.treated_index];
  p.t_pre = cfg.t_pre;

  out.true_effect = Eigen::VectorXd::Zero(T);
  const auto t_pre = static_cast<Eigen::Index>(cfg.t_pre);
  const double n_post = static_cast<double>(T - t_pre);
  for (Eigen::Index t = t_pre; t < T; ++t) {
    switch (cfg.effect_path) {
      case EffectPath::none: break;
      case EffectPath::constant: out.true_effect(t) = cfg.delta; break;
      case EffectPath::ramp: out.true_effect(t) = cfg.delta * static_cast<double>(t - t_pre + 1) / n_post; break;
    }
  }
  p.outcomes.row(treated) += out.true_effect.transpose();
  return out;
}

/// Player-level generator for difference-in-differences checks:
/// Y_it = mu + a_i + b_t + effect * D_i * [t > base] + e_it, each player-day
/// observed with probability `play_prob`. Covariates are drawn independently
/// of treatment and outcomes.
struct PlayerSimConfig {
  std::size_t n_players = 400;
  std::size_t n_days = 30;
  std::size_t t_pre = 20;  // pre-treatment days; the base period is day t_pre - 1
  double treated_share = 0.5;
  double effect = 0.0;
  double mu = 50.0;
  double player_sd = 8.0;
  double day_sd = 3.0;
  double noise_sd = 10.0;
  double play_prob = 0.85;
  std::uint64_t seed = 1;
  std::string start_date = "2022-05-01";

  void validate() const {
    if (n_players < 2) throw ValidationError("player simulation needs at least two players");
    if (t_pre < 1 || t_pre >= n_days) throw ValidationError("player simulation needs 1 <= t_pre < n_days");
    if (!(treated_share > 0.0 && treated_share < 1.0)) throw ValidationError("treated_share must be in (0, 1)");
    if (!(play_prob > 0.0 && play_prob <= 1.0)) throw ValidationError("play_prob must be in (0, 1]");
    if (noise_sd < 0.0 || player_sd < 0.0 || day_sd < 0.0) throw ValidationError("scales must be >= 0");
    parse_day(start_date);
  }
};

struct SimPlayers {
  did::DidPanel panel;
  double true_effect = 0.0;
};

inline SimPlayers generate_players(const PlayerSimConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> std_normal(0.0, 1.0);
  std::bernoulli_distribution treat(cfg.treated_share), plays(cfg.play_prob);

  const auto n = static_cast<Eigen::Index>(cfg.n_players);
  const auto T = static_cast<Eigen::Index>(cfg.n_days);
  did::DidPanel p;
  const Day start = parse_day(cfg.start_date);
  for (Eigen::Index t = 0; t < T; ++t) p.days.push_back(start + std::chrono::days{t});
  p.base_index = cfg.t_pre - 1;
  p.covariate_names = {"kills", "deaths", "assists", "gold", "daily_matches"};
  const double cov_mean[] = {6.0, 5.0, 8.0, 11000.0, 6.0};
  const double cov_sd[] = {2.0, 1.5, 3.0, 1500.0, 2.0};

  Eigen::VectorXd day_effect(T);
  for (Eigen::Index t = 0; t < T; ++t) day_effect(t) = cfg.day_sd * std_normal(rng);

  p.outcomes.resize(n, T);
  p.covariates.resize(n, 5);
  for (Eigen::Index i = 0; i < n; ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "player_%05ld", static_cast<long>(i));
    p.players.emplace_back(buf);
    const bool d = treat(rng);
    p.treated.push_back(d ? 1 : 0);
    const double fe = cfg.player_sd * std_normal(rng);
    for (Eigen::Index k = 0; k < 5; ++k) p.covariates(i, k) = cov_mean[k] + cov_sd[k] * std_normal(rng);
    for (Eigen::Index t = 0; t < T; ++t) {
      const double eps = cfg.noise_sd * std_normal(rng);
      const bool seen = plays(rng);
      const double effect = (d && t > static_cast<Eigen::Index>(p.base_index)) ? cfg.effect : 0.0;
      p.outcomes(i, t) = seen ? cfg.mu + fe + day_effect(t) + effect + eps : std::nan("");
    }
  }
  return {did::drop_players_missing_base(p), cfg.effect};
}

}  // namespace panelci::simgen
