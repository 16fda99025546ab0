#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "panelci/errors.hpp"

namespace panelci {

struct SimplexQpOptions {
  double tol = 1e-8;
  std::size_t max_iter = 100000;
};

struct SimplexQpResult {
  Eigen::VectorXd omega;
  double objective = 0.0;
  double kkt_residual = 0.0;
  std::size_t iterations = 0;
};

/// l(w) = ||A'w - y||^2 + ridge * ||w||^2, with A donors x periods.
inline double ridge_objective(const Eigen::MatrixXd& donors, const Eigen::VectorXd& target, double ridge,
                              const Eigen::VectorXd& omega) {
  const Eigen::VectorXd r = donors.transpose() * omega - target;
  return r.squaredNorm() + ridge * omega.squaredNorm();
}

/// First-order optimality gap on the simplex for gradient `grad` at `omega`.
///
/// With mu the mean gradient over the support, the residual is the largest
/// of |g_i - mu| on the support and (mu - g_i)+ off it, divided by `scale`.
inline double simplex_kkt_residual(const Eigen::VectorXd& grad, const Eigen::VectorXd& omega, double scale) {
  double mu = 0.0;
  int support = 0;
  for (Eigen::Index i = 0; i < omega.size(); ++i)
    if (omega(i) > 0.0) {
      mu += grad(i);
      ++support;
    }
  if (support == 0) return std::numeric_limits<double>::infinity();
  mu /= support;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < omega.size(); ++i) {
    const double gap = omega(i) > 0.0 ? std::abs(grad(i) - mu) : std::max(0.0, mu - grad(i));
    worst = std::max(worst, gap);
  }
  return worst / scale;
}

namespace detail {

// Gradient scale used to make the KKT tolerance unit-free.
inline double qp_scale(const Eigen::MatrixXd& hessian) { return std::max(1.0, hessian.diagonal().cwiseAbs().maxCoeff()); }

// Solves [Q_FF 1; 1' 0][x; nu] = [rhs; s] in the minimum-norm sense.
inline Eigen::VectorXd solve_face(const Eigen::MatrixXd& hessian, const std::vector<Eigen::Index>& free,
                                  const Eigen::VectorXd& rhs, double sum) {
  const auto m = static_cast<Eigen::Index>(free.size());
  Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(m + 1, m + 1);
  for (Eigen::Index a = 0; a < m; ++a) {
    for (Eigen::Index b = 0; b < m; ++b) kkt(a, b) = hessian(free[a], free[b]);
    kkt(a, m) = 1.0;
    kkt(m, a) = 1.0;
  }
  Eigen::VectorXd b(m + 1);
  b.head(m) = rhs;
  b(m) = sum;
  Eigen::VectorXd x = kkt.completeOrthogonalDecomposition().solve(b);
  // One step of iterative refinement; the face systems can be badly scaled.
  x += kkt.completeOrthogonalDecomposition().solve(b - kkt * x);
  return x.head(m);
}

}  // namespace detail

/// Minimises ||A'w - y||^2 + ridge ||w||^2 over the unit simplex with a
/// primal active-set method.
///
/// Each iteration solves the equality-constrained problem on the current
/// face exactly, so the iterate lands on the face minimiser instead of
/// creeping towards it. Singular faces (duplicate donors, ridge = 0) are
/// handled through minimum-norm solves.
inline SimplexQpResult solve_simplex_ridge(const Eigen::MatrixXd& donors, const Eigen::VectorXd& target, double ridge,
                                           const SimplexQpOptions& opts = {}) {
  const Eigen::Index n = donors.rows();
  if (n < 1) throw ValidationError("simplex QP needs at least one donor");
  if (donors.cols() != target.size()) throw ValidationError("donor and target period counts differ");
  if (!donors.allFinite() || !target.allFinite()) throw ValidationError("simplex QP input has non-finite values");
  if (ridge < 0.0) throw ValidationError("ridge penalty must be non-negative");

  const Eigen::MatrixXd hessian =
      2.0 * (donors * donors.transpose() + ridge * Eigen::MatrixXd::Identity(n, n));
  const Eigen::VectorXd linear = -2.0 * donors * target;
  const double scale = detail::qp_scale(hessian);

  SimplexQpResult res;
  res.omega = Eigen::VectorXd::Zero(n);
  if (n == 1) {
    res.omega(0) = 1.0;
    res.objective = ridge_objective(donors, target, ridge, res.omega);
    return res;
  }

  // Start at the best vertex.
  Eigen::Index start = 0;
  double best_vertex = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double v = 0.5 * hessian(i, i) + linear(i);
    if (v < best_vertex) {
      best_vertex = v;
      start = i;
    }
  }
  Eigen::VectorXd w = Eigen::VectorXd::Zero(n);
  w(start) = 1.0;
  std::vector<bool> is_free(static_cast<std::size_t>(n), false);
  is_free[static_cast<std::size_t>(start)] = true;
  bool on_face_minimum = true;  // a single vertex is trivially its face's minimiser

  auto free_list = [&] {
    std::vector<Eigen::Index> f;
    for (Eigen::Index i = 0; i < n; ++i)
      if (is_free[static_cast<std::size_t>(i)]) f.push_back(i);
    return f;
  };

  std::size_t iter = 0;
  bool converged = false;
  for (; iter < opts.max_iter; ++iter) {
    const Eigen::VectorXd grad = hessian * w + linear;
    const auto free = free_list();
    if (on_face_minimum) {
      double mu = 0.0;
      for (auto i : free) mu += grad(i);
      mu /= static_cast<double>(free.size());
      Eigen::Index enter = -1;
      double most_negative = -opts.tol * scale;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (is_free[static_cast<std::size_t>(i)]) continue;
        const double multiplier = grad(i) - mu;
        if (multiplier < most_negative) {
          most_negative = multiplier;
          enter = i;
        }
      }
      if (enter < 0) {
        converged = true;
        break;
      }
      is_free[static_cast<std::size_t>(enter)] = true;
      on_face_minimum = false;
      continue;
    }

    Eigen::VectorXd g_free(static_cast<Eigen::Index>(free.size()));
    for (std::size_t a = 0; a < free.size(); ++a) g_free(static_cast<Eigen::Index>(a)) = -grad(free[a]);
    const Eigen::VectorXd step = detail::solve_face(hessian, free, g_free, 0.0);

    double alpha = 1.0;
    Eigen::Index blocking = -1;
    for (std::size_t a = 0; a < free.size(); ++a) {
      const double p = step(static_cast<Eigen::Index>(a));
      if (p < 0.0) {
        const double ratio = w(free[a]) / -p;
        if (ratio < alpha) {
          alpha = ratio;
          blocking = free[a];
        }
      }
    }
    for (std::size_t a = 0; a < free.size(); ++a) w(free[a]) += alpha * step(static_cast<Eigen::Index>(a));
    if (blocking >= 0) {
      w(blocking) = 0.0;
      is_free[static_cast<std::size_t>(blocking)] = false;
      for (Eigen::Index i = 0; i < n; ++i) w(i) = std::max(w(i), 0.0);
    } else {
      on_face_minimum = true;
    }
  }

  // Polish the final face: solve for the weights directly rather than
  // through accumulated steps.
  {
    const auto free = free_list();
    Eigen::VectorXd rhs(static_cast<Eigen::Index>(free.size()));
    for (std::size_t a = 0; a < free.size(); ++a) rhs(static_cast<Eigen::Index>(a)) = -linear(free[a]);
    const Eigen::VectorXd direct = detail::solve_face(hessian, free, rhs, 1.0);
    if ((direct.array() >= 0.0).all()) {
      Eigen::VectorXd candidate = Eigen::VectorXd::Zero(n);
      for (std::size_t a = 0; a < free.size(); ++a) candidate(free[a]) = direct(static_cast<Eigen::Index>(a));
      if (ridge_objective(donors, target, ridge, candidate) <= ridge_objective(donors, target, ridge, w))
        w = candidate;
    }
  }
  for (Eigen::Index i = 0; i < n; ++i) w(i) = std::max(w(i), 0.0);
  w /= w.sum();

  res.omega = w;
  res.iterations = iter;
  res.objective = ridge_objective(donors, target, ridge, w);
  res.kkt_residual = simplex_kkt_residual(hessian * w + linear, w, scale);
  if (!converged || res.kkt_residual > opts.tol)
    throw ConvergenceError("simplex QP did not reach KKT tolerance " + std::to_string(opts.tol) + " within " +
                               std::to_string(opts.max_iter) + " iterations (residual " +
                               std::to_string(res.kkt_residual) + ")",
                           w, res.kkt_residual);
  return res;
}

}  // namespace panelci
