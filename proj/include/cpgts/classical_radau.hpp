#pragma once

/// \file classical_radau.hpp
/// \brief Radau IIA with classical embedded-error step-size control.
///
/// The stage equations are those of the cPG scheme with a right Radau rule.
/// The embedded solution y^ = y0 + h (g0 f(t0, y0) + sum_i b^_i f(Y_i)) has
/// order s; its defect against y1 is filtered by (I - h g0 J)^{-1}, g0 being
/// the real eigenvalue of the Butcher matrix when s is odd.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <sstream>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "cpg_solver.hpp"
#include "ode_problem.hpp"
#include "quadrature.hpp"
#include "time_mesh.hpp"

namespace cpgts {

struct ClassicalConfig {
  double rtol = 1e-6;
  double atol = 1e-6;
  int stages = 3;
  double safety = 0.9;
  double fac_min = 0.2;
  double fac_max = 5.0;
  double initial_step = 0.0;  // <= 0: automatic
  std::size_t max_steps = 10'000'000;
  NewtonConfig newton;
};

struct ClassicalResult {
  SplineSolution solution;  // accepted steps, collocation polynomial on each
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t newton_failures = 0;
};

/// Embedded-pair data of the s-stage Radau IIA method.
struct RadauEmbedding {
  std::vector<double> c;
  Mat a;
  double gamma0 = 0.0;
  Vec e;  // b^_i - b_i

  explicit RadauEmbedding(int s) {
    const QuadRule rule = build_rule(QuadFamily::RadauRight, s);
    c = rule.nodes;
    const LagrangeBasis l(c);
    const QuadRule g = build_rule(QuadFamily::GaussLegendre, std::max(1, s));
    a = Mat::Zero(s, s);
    for (int i = 0; i < s; ++i)
      for (int j = 0; j < s; ++j)
        for (std::size_t q = 0; q < g.size(); ++q) a(i, j) += c[i] * g.weights[q] * l.value(j, c[i] * g.nodes[q]);

    const Eigen::VectorXcd ev = Eigen::EigenSolver<Mat>(a).eigenvalues();
    bool found = false;
    for (Eigen::Index k = 0; k < ev.size(); ++k)
      if (std::abs(ev(k).imag()) < 1e-12 * std::abs(ev(k))) {
        gamma0 = ev(k).real();
        found = true;
      }
    // even s: no real eigenvalue, use |det A|^{1/s}
    if (!found) gamma0 = std::pow(std::abs(a.determinant()), 1.0 / s);

    // sum_i e_i c_i^{k-1} = -g0 [k = 1], k = 1..s
    Mat v(s, s);
    for (int k = 0; k < s; ++k)
      for (int i = 0; i < s; ++i) v(k, i) = std::pow(c[i], k);
    Vec rhs = Vec::Zero(s);
    rhs(0) = -gamma0;
    e = v.fullPivLu().solve(rhs);
  }
};

namespace detail {

inline double scaled_norm(const Vec& err, const Vec& y0, const Vec& y1, double rtol, double atol) {
  double acc = 0.0;
  for (Eigen::Index k = 0; k < err.size(); ++k) {
    const double sc = atol + rtol * std::max(std::abs(y0(k)), std::abs(y1(k)));
    acc += (err(k) / sc) * (err(k) / sc);
  }
  return std::sqrt(acc / static_cast<double>(err.size()));
}

}  // namespace detail

inline ClassicalResult classical_radau(const OdeProblem& problem, const ClassicalConfig& cfg) {
  if (cfg.stages < 1) throw std::invalid_argument("classical_radau: need at least one stage");
  if (!(cfg.rtol >= 0.0 && cfg.atol >= 0.0 && cfg.rtol + cfg.atol > 0.0))
    throw std::invalid_argument("classical_radau: tolerances must be nonnegative and not both zero");
  const int s = cfg.stages;
  const CpgScheme scheme(build_rule(QuadFamily::RadauRight, s));
  const RadauEmbedding emb(s);
  const double horizon = problem.horizon();
  const double h_min = 1e-14 * horizon;
  const int d = problem.dim;

  Vec y = problem.y0;
  double t = problem.t0;
  Vec f0 = problem.f(t, y);

  double h = cfg.initial_step;
  if (!(h > 0.0)) {
    const double d0 = detail::scaled_norm(y, y, y, cfg.rtol, cfg.atol);
    const double d1 = detail::scaled_norm(f0, y, y, cfg.rtol, cfg.atol);
    h = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 * horizon : 0.01 * d0 / d1;
    h = std::min(h, horizon);
  }

  std::vector<double> bp{t};
  std::vector<Mat> steps;
  ClassicalResult out{SplineSolution(TimeMesh::make_initial(problem.t0, problem.t_end, 1), scheme.basis,
                                     Mat::Zero(d, s + 1))};
  bool last_rejected = false;

  while (t < problem.t_end) {
    if (out.accepted + out.rejected >= cfg.max_steps) throw std::runtime_error("classical_radau: step limit reached");
    if (h < h_min) {
      std::ostringstream msg;
      msg << "classical_radau: step size underflow (h = " << h << ") at t = " << t;
      throw std::runtime_error(msg.str());
    }
    const double remaining = problem.t_end - t;
    bool hits_end = false;
    if (h >= remaining * (1.0 - 1e-12)) {
      h = remaining;
      hits_end = true;
    }

    IntervalNewton rep;
    const Mat nodes = solve_step(problem, scheme, t, h, y, cfg.newton, rep);
    if (!rep.converged) {
      ++out.newton_failures;
      ++out.rejected;
      h *= 0.5;
      last_rejected = true;
      continue;
    }

    const Vec y1 = nodes.col(s);
    Vec defect = emb.gamma0 * f0;
    for (int i = 0; i < s; ++i) defect += emb.e(i) * problem.f(t + emb.c[i] * h, nodes.col(i + 1));
    defect *= h;
    const Mat filter = Mat::Identity(d, d) - h * emb.gamma0 * problem.jac_y(t, y);
    Vec err = filter.partialPivLu().solve(defect);
    double en = detail::scaled_norm(err, y, y1, cfg.rtol, cfg.atol);
    if (!std::isfinite(en)) en = 1e10;

    double fac = cfg.safety * std::pow(std::max(en, 1e-10), -1.0 / (s + 1));
    fac = std::clamp(fac, cfg.fac_min, last_rejected ? 1.0 : cfg.fac_max);

    if (en <= 1.0) {
      ++out.accepted;
      t = hits_end ? problem.t_end : t + h;
      bp.push_back(t);
      steps.push_back(nodes);
      y = y1;
      f0 = problem.f(t, y);
      last_rejected = false;
    } else {
      ++out.rejected;
      last_rejected = true;
    }
    h *= fac;
  }

  Mat nodal(d, static_cast<Eigen::Index>(steps.size() * (s + 1)));
  for (std::size_t i = 0; i < steps.size(); ++i) nodal.middleCols(static_cast<Eigen::Index>(i * (s + 1)), s + 1) = steps[i];
  out.solution = SplineSolution(TimeMesh::from_breakpoints(std::move(bp)), scheme.basis, std::move(nodal));
  return out;
}

}  // namespace cpgts
