#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "panelci/did_panel.hpp"
#include "panelci/errors.hpp"
#include "panelci/stats.hpp"

namespace panelci::did {

enum class Estimator { unconditional, doubly_robust };
enum class WeightLaw { mammen, rademacher };

inline Estimator parse_estimator(const std::string& s) {
  if (s == "unc" || s == "unconditional") return Estimator::unconditional;
  if (s == "dr" || s == "doubly_robust") return Estimator::doubly_robust;
  throw ValidationError("unknown estimator '" + s + "' (expected unc or dr)");
}
inline std::string to_string(Estimator e) { return e == Estimator::unconditional ? "unc" : "dr"; }

inline WeightLaw parse_weight_law(const std::string& s) {
  if (s == "mammen") return WeightLaw::mammen;
  if (s == "rademacher") return WeightLaw::rademacher;
  throw ValidationError("unknown multiplier law '" + s + "' (expected mammen or rademacher)");
}
inline std::string to_string(WeightLaw w) { return w == WeightLaw::mammen ? "mammen" : "rademacher"; }

/// One day's contrast. `contrib` has one entry per panel player and sums to
/// the estimator's first-order deviation from its target (zero for players
/// not in the day's contrast).
struct AttEstimate {
  double att = std::nan("");
  Eigen::VectorXd contrib;
  std::size_t n_treated = 0;
  std::size_t n_control = 0;
  std::size_t trimmed = 0;
  bool estimable = false;
  bool numerical_failure = false;  // propensity fit failed, as opposed to missing data
  std::string reason;
};

struct DrConfig {
  double trim_level = 0.995;
  double ps_cap = 1.0 - 1e-6;
  double tol = 1e-10;
  int max_iter = 100;
};

namespace detail {

struct DayContrast {
  std::vector<std::size_t> rows;  // panel player indices
  Eigen::VectorXd delta;
  Eigen::VectorXd d;
  std::size_t n1 = 0, n0 = 0;
};

inline DayContrast day_contrast(const DidPanel& p, std::size_t t) {
  if (t >= p.n_days()) throw ValidationError("day index outside the panel");
  DayContrast c;
  for (std::size_t i = 0; i < p.n_players(); ++i)
    if (p.observed(i, t) && p.observed(i, p.base_index)) c.rows.push_back(i);
  const auto n = static_cast<Eigen::Index>(c.rows.size());
  c.delta.resize(n);
  c.d.resize(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto i = c.rows[static_cast<std::size_t>(k)];
    c.delta(k) = p.y(i, t) - p.y(i, p.base_index);
    c.d(k) = p.treated[i] ? 1.0 : 0.0;
    (p.treated[i] ? c.n1 : c.n0)++;
  }
  return c;
}

inline Eigen::VectorXd scatter(const DayContrast& c, const Eigen::VectorXd& inf, std::size_t n_players) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_players));
  const double n = static_cast<double>(c.rows.size());
  for (std::size_t k = 0; k < c.rows.size(); ++k)
    out(static_cast<Eigen::Index>(c.rows[k])) = inf(static_cast<Eigen::Index>(k)) / n;
  return out;
}

/// Columns with (numerically) zero spread.
inline bool is_constant(const Eigen::VectorXd& x) {
  const double lo = x.minCoeff(), hi = x.maxCoeff();
  return hi - lo <= 1e-12 * std::max(1.0, std::max(std::abs(lo), std::abs(hi)));
}

/// Greedy rank walk over columns; returns the names of columns that add no
/// rank given the ones before them.
inline std::vector<std::string> collinear_columns(const Eigen::MatrixXd& x, const std::vector<std::string>& names) {
  std::vector<std::string> bad;
  Eigen::MatrixXd kept(x.rows(), 0);
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    Eigen::MatrixXd trial(x.rows(), kept.cols() + 1);
    trial << kept, x.col(j);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(trial);
    qr.setThreshold(1e-10);
    if (qr.rank() == trial.cols())
      kept = std::move(trial);
    else
      bad.push_back(names[static_cast<std::size_t>(j)]);
  }
  return bad;
}

}  // namespace detail

/// Standardizes the covariates, drops constant columns and prepends an
/// intercept. Throws on collinear columns, naming them.
inline Eigen::MatrixXd design_matrix(const Eigen::MatrixXd& x, const std::vector<std::string>& names) {
  std::vector<Eigen::Index> keep;
  for (Eigen::Index j = 0; j < x.cols(); ++j)
    if (x.rows() > 0 && !detail::is_constant(x.col(j))) keep.push_back(j);
  Eigen::MatrixXd z(x.rows(), static_cast<Eigen::Index>(keep.size()) + 1);
  z.col(0).setOnes();
  std::vector<std::string> kept_names;
  for (std::size_t k = 0; k < keep.size(); ++k) {
    const Eigen::VectorXd c = x.col(keep[k]);
    const double m = c.mean();
    const double sd = std::sqrt((c.array() - m).square().mean());
    z.col(static_cast<Eigen::Index>(k) + 1) = (c.array() - m) / sd;
    kept_names.push_back(names[static_cast<std::size_t>(keep[k])]);
  }
  if (z.cols() > 1) {
    auto bad = detail::collinear_columns(z.rightCols(z.cols() - 1), kept_names);
    if (!bad.empty()) {
      std::string msg = "singular covariate design; collinear columns:";
      for (const auto& b : bad) msg += " " + b;
      throw ValidationError(msg);
    }
  }
  return z;
}

struct LogitFit {
  Eigen::VectorXd beta;
  Eigen::VectorXd p;
  Eigen::MatrixXd hessian;  // X' W X
  int iterations = 0;
};

/// Maximum-likelihood logistic regression by Newton-Raphson with step
/// halving. `x` must carry its own intercept column.
inline LogitFit logistic_regression(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double tol = 1e-10,
                                    int max_iter = 100) {
  const auto k = x.cols();
  auto loglik = [&](const Eigen::VectorXd& eta) {
    double ll = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
      const double e = eta(i);
      // log(1 + exp(e)) without overflow
      const double l1p = e > 0 ? e + std::log1p(std::exp(-e)) : std::log1p(std::exp(e));
      ll += y(i) * e - l1p;
    }
    return ll;
  };
  auto sigmoid = [](const Eigen::VectorXd& eta) {
    return Eigen::VectorXd(eta.unaryExpr([](double e) { return 1.0 / (1.0 + std::exp(-e)); }));
  };

  LogitFit f;
  f.beta = Eigen::VectorXd::Zero(k);
  Eigen::VectorXd eta = x * f.beta;
  double ll = loglik(eta);
  for (f.iterations = 0; f.iterations < max_iter; ++f.iterations) {
    f.p = sigmoid(eta);
    const Eigen::VectorXd w = f.p.array() * (1.0 - f.p.array());
    const Eigen::VectorXd grad = x.transpose() * (y - f.p);
    f.hessian = x.transpose() * w.asDiagonal() * x;
    if (grad.lpNorm<Eigen::Infinity>() <= tol * std::max<double>(1.0, static_cast<double>(x.rows()))) break;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(f.hessian);
    if (ldlt.info() != Eigen::Success || ldlt.rcond() < 1e-14)
      throw NumericalError("propensity model: singular information matrix (perfect separation?)");
    const Eigen::VectorXd step = ldlt.solve(grad);
    double s = 1.0;
    Eigen::VectorXd next, next_eta;
    double next_ll = -INFINITY;
    for (int h = 0; h < 40; ++h, s *= 0.5) {
      next = f.beta + s * step;
      next_eta = x * next;
      next_ll = loglik(next_eta);
      if (next_ll >= ll - 1e-12 * std::abs(ll)) break;
    }
    f.beta = next;
    eta = next_eta;
    const bool flat = std::abs(next_ll - ll) <= 1e-15 * std::max(1.0, std::abs(ll));
    ll = next_ll;
    if (flat && s * step.lpNorm<Eigen::Infinity>() < 1e-12) break;
  }
  if (f.iterations >= max_iter) throw NumericalError("propensity model did not converge");
  f.p = sigmoid(eta);
  for (Eigen::Index i = 0; i < f.p.size(); ++i)
    if (f.p(i) < 1e-9 || f.p(i) > 1.0 - 1e-9)
      throw NumericalError("propensity model: fitted probabilities numerically 0 or 1 (separation)");
  const Eigen::VectorXd w = f.p.array() * (1.0 - f.p.array());
  f.hessian = x.transpose() * w.asDiagonal() * x;
  return f;
}

/// Difference of mean outcome changes from the base period, treated minus
/// control, over players observed on both days.
inline AttEstimate att_unconditional(const DidPanel& p, std::size_t t) {
  AttEstimate r;
  const auto c = detail::day_contrast(p, t);
  r.n_treated = c.n1;
  r.n_control = c.n0;
  r.contrib = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p.n_players()));
  if (c.n1 == 0 || c.n0 == 0) {
    r.reason = "not estimable: no treated or no control player observed";
    return r;
  }
  const double n = static_cast<double>(c.rows.size());
  const double p1 = static_cast<double>(c.n1) / n, p0 = static_cast<double>(c.n0) / n;
  double m1 = 0.0, m0 = 0.0;
  for (Eigen::Index k = 0; k < c.d.size(); ++k) (c.d(k) > 0 ? m1 : m0) += c.delta(k);
  m1 /= static_cast<double>(c.n1);
  m0 /= static_cast<double>(c.n0);
  Eigen::VectorXd inf(c.d.size());
  for (Eigen::Index k = 0; k < c.d.size(); ++k)
    inf(k) = c.d(k) > 0 ? (c.delta(k) - m1) / p1 : -(c.delta(k) - m0) / p0;
  r.att = m1 - m0;
  r.contrib = detail::scatter(c, inf, p.n_players());
  r.estimable = true;
  return r;
}

/// Doubly-robust ATT: linear outcome model for the change among controls,
/// logistic propensity score, and the influence function that accounts for
/// estimating both nuisance models.
inline AttEstimate att_doubly_robust(const DidPanel& p, std::size_t t, const DrConfig& cfg = {}) {
  AttEstimate r;
  const auto c = detail::day_contrast(p, t);
  r.n_treated = c.n1;
  r.n_control = c.n0;
  r.contrib = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p.n_players()));
  if (c.n1 == 0 || c.n0 == 0) {
    r.reason = "not estimable: no treated or no control player observed";
    return r;
  }
  const auto n = static_cast<Eigen::Index>(c.rows.size());
  Eigen::MatrixXd xraw(n, p.covariates.cols());
  for (Eigen::Index k = 0; k < n; ++k) xraw.row(k) = p.covariates.row(static_cast<Eigen::Index>(c.rows[static_cast<std::size_t>(k)]));
  const Eigen::MatrixXd x = design_matrix(xraw, p.covariate_names);
  const auto q = x.cols();
  if (static_cast<Eigen::Index>(c.n0) < q + 1) {
    r.reason = "not estimable: fewer control players than covariates + 2";
    return r;
  }

  // outcome regression on controls
  const Eigen::VectorXd w_ols = Eigen::VectorXd::Ones(n) - c.d;
  const Eigen::MatrixXd xtx = x.transpose() * w_ols.asDiagonal() * x;
  Eigen::LDLT<Eigen::MatrixXd> ols(xtx);
  if (ols.info() != Eigen::Success || ols.rcond() < 1e-12) {
    r.reason = "not estimable: control covariate design is singular on this day";
    return r;
  }
  const Eigen::VectorXd beta = ols.solve(x.transpose() * w_ols.asDiagonal() * c.delta);
  const Eigen::VectorXd resid = c.delta - x * beta;

  LogitFit ps;
  try {
    ps = logistic_regression(x, c.d, cfg.tol, cfg.max_iter);
  } catch (const NumericalError& e) {
    r.reason = std::string("not estimable: ") + e.what();
    r.numerical_failure = true;
    return r;
  }
  Eigen::VectorXd pr = ps.p.cwiseMin(cfg.ps_cap);
  Eigen::VectorXd w1(n), w0(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const bool treated = c.d(k) > 0;
    const bool keep = treated || pr(k) < cfg.trim_level;
    if (!keep) ++r.trimmed;
    w1(k) = keep && treated ? 1.0 : 0.0;
    w0(k) = keep && !treated ? pr(k) / (1.0 - pr(k)) : 0.0;
  }
  const double mw1 = w1.mean(), mw0 = w0.mean();
  if (mw0 <= 0.0) {
    r.reason = "not estimable: every control trimmed by the propensity cap";
    return r;
  }
  const Eigen::VectorXd s1 = w1.cwiseProduct(resid), s0 = w0.cwiseProduct(resid);
  const double eta1 = s1.mean() / mw1, eta0 = s0.mean() / mw0;

  const double nn = static_cast<double>(n);
  const Eigen::MatrixXd lin_ols = (w_ols.cwiseProduct(resid)).asDiagonal() * x * (xtx / nn).inverse();
  const Eigen::MatrixXd lin_ps = ((c.d - ps.p).asDiagonal() * x) * (ps.hessian / nn).inverse();

  const Eigen::VectorXd m1 = (w1.asDiagonal() * x).colwise().mean();
  const Eigen::VectorXd inf_treat = (s1 - w1 * eta1 - lin_ols * m1) / mw1;
  const Eigen::VectorXd m2 = ((w0.cwiseProduct(resid.array().matrix() - Eigen::VectorXd::Constant(n, eta0))).asDiagonal() * x)
                                 .colwise()
                                 .mean();
  const Eigen::VectorXd m3 = (w0.asDiagonal() * x).colwise().mean();
  const Eigen::VectorXd inf_ctrl = (s0 - w0 * eta0 + lin_ps * m2 - lin_ols * m3) / mw0;

  r.att = eta1 - eta0;
  r.contrib = detail::scatter(c, inf_treat - inf_ctrl, p.n_players());
  r.estimable = true;
  return r;
}

struct BootstrapConfig {
  std::size_t n_draws = 999;
  WeightLaw law = WeightLaw::mammen;
  std::uint64_t seed = 1;
  double level = 0.95;
};

struct BootstrapResult {
  Eigen::VectorXd se;  // per column
  double crit = std::nan("");
  double z = std::nan("");
  bool degenerate = false;
  std::vector<std::string> warnings;
};

/// Draws one multiplier per player (cluster) and applies it to that player's
/// whole contribution row. `contrib` is players x columns; the first
/// `band_cols` columns enter the sup-t statistic.
inline BootstrapResult multiplier_bootstrap(const Eigen::MatrixXd& contrib, const BootstrapConfig& cfg,
                                            std::optional<Eigen::Index> band_cols = std::nullopt) {
  if (cfg.n_draws < 2) throw ValidationError("bootstrap needs at least 2 draws");
  if (!(cfg.level > 0.0 && cfg.level < 1.0)) throw ValidationError("confidence level must lie in (0, 1)");
  BootstrapResult r;
  if (cfg.n_draws < 100) r.warnings.push_back("fewer than 100 bootstrap draws");
  const auto n = contrib.rows();
  const auto k = contrib.cols();
  const auto B = static_cast<Eigen::Index>(cfg.n_draws);
  const Eigen::Index nb = band_cols.value_or(k);

  std::mt19937_64 rng(cfg.seed);
  const double r5 = std::sqrt(5.0);
  std::bernoulli_distribution mammen_low((r5 + 1.0) / (2.0 * r5)), coin(0.5);
  Eigen::MatrixXd xi(B, n);
  for (Eigen::Index b = 0; b < B; ++b)
    for (Eigen::Index i = 0; i < n; ++i)
      xi(b, i) = cfg.law == WeightLaw::mammen ? (mammen_low(rng) ? (1.0 - r5) / 2.0 : (1.0 + r5) / 2.0)
                                              : (coin(rng) ? 1.0 : -1.0);
  const Eigen::MatrixXd dev = xi * contrib;  // B x k

  const double zq = stats::normal_quantile(0.75) - stats::normal_quantile(0.25);
  r.se.resize(k);
  for (Eigen::Index j = 0; j < k; ++j) {
    std::vector<double> col(dev.col(j).data(), dev.col(j).data() + B);
    r.se(j) = (stats::quantile(col, 0.75) - stats::quantile(col, 0.25)) / zq;
  }
  r.z = stats::two_sided_z(cfg.level);

  std::vector<Eigen::Index> live;
  for (Eigen::Index j = 0; j < nb; ++j)
    if (r.se(j) > 0.0 && std::isfinite(r.se(j))) live.push_back(j);
  if (live.empty()) {
    r.degenerate = true;
    r.warnings.push_back("all bootstrap standard errors are zero; critical value undefined");
    return r;
  }
  std::vector<double> maxt(static_cast<std::size_t>(B));
  for (Eigen::Index b = 0; b < B; ++b) {
    double m = 0.0;
    for (auto j : live) m = std::max(m, std::abs(dev(b, j)) / r.se(j));
    maxt[static_cast<std::size_t>(b)] = m;
  }
  // never narrower than the pointwise interval
  r.crit = std::max(stats::quantile(std::move(maxt), cfg.level), r.z);
  if (static_cast<Eigen::Index>(live.size()) < nb) r.warnings.push_back("zero-variance days: bands degenerate to the point");
  return r;
}

struct SeriesConfig {
  Estimator estimator = Estimator::unconditional;
  std::optional<std::size_t> pre_window;  // pre days before the base; default all
  BootstrapConfig bootstrap;
  DrConfig dr;
};

struct AttSeries {
  std::vector<Day> days;
  std::vector<double> att, se, ci_lo, ci_hi, band_lo, band_hi;
  std::vector<bool> is_pre, estimable;
  std::vector<std::size_t> n_treated_day, n_control_day, trimmed_day;
  double avg_att = std::nan(""), avg_se = std::nan(""), avg_lo = std::nan(""), avg_hi = std::nan("");
  std::size_t n_post_used = 0;
  double crit = std::nan(""), z = std::nan("");
  bool degenerate = false;
  std::size_t n_treated = 0, n_control = 0;
  std::size_t dropped_without_base = 0;
  Estimator estimator = Estimator::unconditional;
  BootstrapConfig bootstrap;
  std::vector<std::string> warnings;
};

/// ATT(t) for every post day plus placebo ATT(t) for pre days, all against the
/// fixed base period, with multiplier-bootstrap SEs and a sup-t band.
inline AttSeries att_series(const DidPanel& p, const SeriesConfig& cfg = {}) {
  p.validate();
  if (p.base_index + 1 >= p.n_days()) throw ValidationError("DiD panel has no post-treatment days");
  if (cfg.estimator == Estimator::doubly_robust) (void)design_matrix(p.covariates, p.covariate_names);

  AttSeries s;
  s.estimator = cfg.estimator;
  s.bootstrap = cfg.bootstrap;
  s.dropped_without_base = p.dropped_without_base;
  for (auto d : p.treated) (d ? s.n_treated : s.n_control)++;

  const std::size_t first =
      cfg.pre_window ? p.base_index - std::min(*cfg.pre_window, p.base_index) : 0;
  const std::size_t K = p.n_days() - first;
  Eigen::MatrixXd contrib = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(p.n_players()), static_cast<Eigen::Index>(K) + 1);
  Eigen::VectorXd avg_contrib = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p.n_players()));
  double avg_sum = 0.0;
  std::string post_failure;
  for (std::size_t t = first; t < p.n_days(); ++t) {
    AttEstimate e;
    if (cfg.estimator == Estimator::unconditional) {
      e = att_unconditional(p, t);
    } else {
      // the full-sample design passed above; a day's subsample can still lose rank
      try {
        e = att_doubly_robust(p, t, cfg.dr);
      } catch (const ValidationError& err) {
        e.contrib = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p.n_players()));
        e.reason = std::string("not estimable: ") + err.what();
      }
    }
    s.days.push_back(p.days[t]);
    s.att.push_back(e.att);
    s.is_pre.push_back(t <= p.base_index);
    s.estimable.push_back(e.estimable);
    s.n_treated_day.push_back(e.n_treated);
    s.n_control_day.push_back(e.n_control);
    s.trimmed_day.push_back(e.trimmed);
    if (!e.estimable) {
      if (e.numerical_failure && t > p.base_index && post_failure.empty()) post_failure = e.reason;
      s.warnings.push_back(format_day(p.days[t]) + ": " + e.reason);
      continue;
    }
    contrib.col(static_cast<Eigen::Index>(t - first)) = e.contrib;
    if (t > p.base_index) {
      avg_contrib += e.contrib;
      avg_sum += e.att;
      ++s.n_post_used;
    }
    if (e.trimmed > 0)
      s.warnings.push_back(format_day(p.days[t]) + ": " + std::to_string(e.trimmed) + " controls trimmed by propensity");
  }
  if (s.n_post_used == 0 && !post_failure.empty())
    throw NumericalError("no post-treatment day is estimable; " + post_failure);
  if (s.n_post_used > 0) {
    s.avg_att = avg_sum / static_cast<double>(s.n_post_used);
    contrib.col(static_cast<Eigen::Index>(K)) = avg_contrib / static_cast<double>(s.n_post_used);
  } else {
    s.warnings.push_back("no estimable post-treatment day; avg_att undefined");
  }

  auto bs = multiplier_bootstrap(contrib, cfg.bootstrap, static_cast<Eigen::Index>(K));
  s.crit = bs.crit;
  s.z = bs.z;
  s.degenerate = bs.degenerate;
  s.warnings.insert(s.warnings.end(), bs.warnings.begin(), bs.warnings.end());
  const double c = bs.degenerate ? 0.0 : bs.crit;
  for (std::size_t k = 0; k < K; ++k) {
    const double se = s.estimable[k] ? bs.se(static_cast<Eigen::Index>(k)) : std::nan("");
    s.se.push_back(se);
    s.ci_lo.push_back(s.att[k] - bs.z * se);
    s.ci_hi.push_back(s.att[k] + bs.z * se);
    s.band_lo.push_back(s.att[k] - c * se);
    s.band_hi.push_back(s.att[k] + c * se);
  }
  if (s.n_post_used > 0) {
    s.avg_se = bs.se(static_cast<Eigen::Index>(K));
    s.avg_lo = s.avg_att - bs.z * s.avg_se;
    s.avg_hi = s.avg_att + bs.z * s.avg_se;
  }
  return s;
}

}  // namespace panelci::did
