#pragma once

/// \file estimators.hpp
/// \brief Element-wise residual error estimator and derived quantities.
///
///   eta(T) = |T| * || d/dt F(., y_T) + grad_y F(., y_T) y_T' - y_T'' ||_{L2(T)}
///
/// i.e. |T| times the L2 norm of the time derivative of the residual, measured
/// in the problem's residual weight.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "cpg_solver.hpp"
#include "ode_problem.hpp"
#include "quadrature.hpp"

namespace cpgts {

struct LocalEstimates {
  std::vector<double> eta;      // per interval, >= 0
  std::vector<double> lengths;  // |T| per interval

  std::size_t size() const { return eta.size(); }

  double total_squared() const {
    double s = 0.0;
    for (double e : eta) s += e * e;
    return s;
  }
  double total() const { return std::sqrt(total_squared()); }

  std::vector<double> squared() const {
    std::vector<double> out(eta.size());
    for (std::size_t i = 0; i < eta.size(); ++i) out[i] = eta[i] * eta[i];
    return out;
  }
};

/// Gauss rule used for the estimator's L2(T) integrals at degree p.
inline QuadRule estimator_rule(int degree) {
  return build_rule(QuadFamily::GaussLegendre, (2 * degree + 3 + 1) / 2 + 1);
}

/// Integrand of the estimator at t: d/dt F + grad_y F y' - y''.
inline Vec estimator_integrand(const OdeProblem& problem, const SplineSolution& y, std::size_t i, double s) {
  const double t = y.mesh().left(i) + s * y.mesh().length(i);
  const Vec v = y.local(i, s, 0);
  const Vec d1 = y.local(i, s, 1);
  const Vec d2 = y.local(i, s, 2);
  return problem.time_partial(t, v) + problem.apply_jacobian(t, v, d1) - d2;
}

inline LocalEstimates estimate(const OdeProblem& problem, const SplineSolution& y, const QuadRule& norm_rule) {
  const TimeMesh& mesh = y.mesh();
  LocalEstimates out;
  out.eta.resize(mesh.size());
  out.lengths.resize(mesh.size());
  for (std::size_t i = 0; i < mesh.size(); ++i) {
    const double h = mesh.length(i);
    double acc = 0.0;
    for (std::size_t q = 0; q < norm_rule.size(); ++q)
      acc += norm_rule.weights[q] * problem.weight.squared_norm(estimator_integrand(problem, y, i, norm_rule.nodes[q]));
    out.eta[i] = h * std::sqrt(h * acc);
    out.lengths[i] = h;
  }
  return out;
}

inline LocalEstimates estimate(const OdeProblem& problem, const SplineSolution& y) {
  return estimate(problem, y, estimator_rule(y.degree()));
}

/// eta~(T_i)^2 = eta(T_i)^2 / (1 + sum_{j<=i} eta(T_j)^2). Only meant for marking.
inline LocalEstimates confidence_modify(const LocalEstimates& est) {
  LocalEstimates out = est;
  double prefix = 0.0;
  for (std::size_t i = 0; i < est.size(); ++i) {
    const double e2 = est.eta[i] * est.eta[i];
    prefix += e2;
    out.eta[i] = std::sqrt(e2 / (1.0 + prefix));
  }
  return out;
}

/// |T|^{1/2} eta(T).
inline std::vector<double> linf_indicator(const LocalEstimates& est) {
  std::vector<double> out(est.size());
  for (std::size_t i = 0; i < est.size(); ++i) out[i] = std::sqrt(est.lengths[i]) * est.eta[i];
  return out;
}

/// C_rel with C_rel^2 = C_pc^2 (2 L^2 e^{2 L (t_end - t0)} (t_end - t0)^2 + 2), C_pc^2 = t_end - t0.
inline double reliability_constant(double lipschitz, double t0, double t_end) {
  if (lipschitz < 0.0) throw std::invalid_argument("reliability_constant: L1 must be nonnegative");
  if (!(t_end > t0)) throw std::invalid_argument("reliability_constant: need t_end > t0");
  const double len = t_end - t0;
  const double growth = std::exp(2.0 * lipschitz * len);
  return std::sqrt(len * (2.0 * lipschitz * lipschitz * growth * len * len + 2.0));
}

/// e^{L (t_end - t0)} max_T |T|^{1/2} eta(T): bound on the max-norm error.
inline double linf_bound(const LocalEstimates& est, double lipschitz, double t0, double t_end) {
  if (lipschitz < 0.0) throw std::invalid_argument("linf_bound: L1 must be nonnegative");
  double worst = 0.0;
  for (double v : linf_indicator(est)) worst = std::max(worst, v);
  if (worst == 0.0) return 0.0;
  return std::exp(lipschitz * (t_end - t0)) * worst;
}

inline nlohmann::json to_json(const LocalEstimates& est) { return nlohmann::json(est.eta); }

}  // namespace cpgts
