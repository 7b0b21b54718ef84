#pragma once

/// \file cpg_solver.hpp
/// \brief Continuous Petrov-Galerkin time stepping induced by a quadrature rule.
///
/// On each interval T = [a, b] the discrete solution is the polynomial that
/// interpolates the inherited left value at s = 0 and the unknown values at
/// the quadrature nodes with s > 0 (reference coordinate s = (t - a)/|T|).
/// The degree p therefore equals the number of such nodes: m - 1 for Lobatto
/// rules (trapezoid, Simpson, ...) and m for Radau and Gauss rules, where the
/// scheme reduces to Radau IIA / Gauss collocation.
///
/// The equations are the quadrature approximation of
///   int_T (y' - F(t, y)) v dt = 0,   v in P^{p-1}(T),
/// with v running over the Lagrange polynomials of the nodes s > 0. Each
/// interval is solved by Newton's method with the analytic Jacobian.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "ode_problem.hpp"
#include "quadrature.hpp"
#include "time_mesh.hpp"

namespace cpgts {

/// Reference-interval operators of the time-stepping scheme for one rule.
struct CpgScheme {
  QuadRule rule;
  int degree = 0;
  std::shared_ptr<const LagrangeBasis> basis;  // interpolation nodes: 0, then nodes > 0
  std::vector<int> quad_to_interp;             // interpolation index of each quadrature node
  Mat stiff;                                   // p x (p+1): sum_k w_k v_j(s_k) l_i'(s_k)
  Mat load;                                    // p x m:     w_k v_j(s_k)

  explicit CpgScheme(QuadRule r) : rule(std::move(r)) {
    std::vector<double> interp{0.0};
    std::vector<double> positive;
    for (double s : rule.nodes)
      if (s > 0.0) positive.push_back(s);
    interp.insert(interp.end(), positive.begin(), positive.end());
    degree = static_cast<int>(positive.size());
    if (degree < 1) throw std::invalid_argument("CpgScheme: rule has no node in (0,1]");
    basis = std::make_shared<const LagrangeBasis>(interp);
    const LagrangeBasis test(positive);

    const int m = static_cast<int>(rule.size());
    const int p = degree;
    quad_to_interp.resize(m);
    for (int k = 0; k < m; ++k)
      quad_to_interp[k] = rule.nodes[k] == 0.0 ? 0 : static_cast<int>(std::find(interp.begin(), interp.end(), rule.nodes[k]) - interp.begin());

    load = Mat::Zero(p, m);
    stiff = Mat::Zero(p, p + 1);
    for (int j = 0; j < p; ++j)
      for (int k = 0; k < m; ++k) {
        const double wv = rule.weights[k] * test.value(j, rule.nodes[k]);
        load(j, k) = wv;
        for (int i = 0; i <= p; ++i) stiff(j, i) += wv * basis->derivative(i, rule.nodes[k]);
      }
  }
};

struct NewtonConfig {
  int max_iter = 25;
  double abs_tol = 1e-12;
  double rel_tol = 1e-10;
  bool damping = false;
  /// When an undamped solve fails, retry once with step halving.
  bool retry_with_damping = true;
};

struct IntervalNewton {
  int iterations = 0;
  bool converged = false;
  bool damped = false;
  bool singular = false;
  double residual = 0.0;   // final residual norm, in units of y'
  double tolerance = 0.0;  // abs_tol + rel_tol * scale used for this interval
};

struct NewtonReport {
  std::vector<IntervalNewton> intervals;

  std::size_t failures() const {
    return static_cast<std::size_t>(std::count_if(intervals.begin(), intervals.end(), [](const IntervalNewton& r) { return !r.converged; }));
  }
  std::vector<std::size_t> failed_intervals() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < intervals.size(); ++i)
      if (!intervals[i].converged) out.push_back(i);
    return out;
  }
  bool all_converged() const { return failures() == 0; }
};

/// Continuous piecewise polynomial of degree p over a time mesh, stored as
/// nodal values on every interval.
class SplineSolution {
 public:
  SplineSolution(TimeMesh mesh, std::shared_ptr<const LagrangeBasis> basis, Mat nodal)
      : mesh_(std::move(mesh)), basis_(std::move(basis)), nodal_(std::move(nodal)) {
    if (nodal_.cols() != static_cast<Eigen::Index>(mesh_.size() * basis_->size()))
      throw std::invalid_argument("SplineSolution: nodal value count does not match mesh");
  }

  int dim() const { return static_cast<int>(nodal_.rows()); }
  int degree() const { return static_cast<int>(basis_->size()) - 1; }
  const TimeMesh& mesh() const { return mesh_; }
  const LagrangeBasis& basis() const { return *basis_; }
  std::shared_ptr<const LagrangeBasis> basis_ptr() const { return basis_; }
  const Mat& nodal() const { return nodal_; }

  /// Columns of nodal values on interval i.
  auto interval_nodes(std::size_t i) const {
    return nodal_.middleCols(static_cast<Eigen::Index>(i * basis_->size()), static_cast<Eigen::Index>(basis_->size()));
  }

  /// d-th time derivative on interval i at reference coordinate s in [0,1].
  Vec local(std::size_t i, double s, int d = 0) const {
    const auto y = interval_nodes(i);
    Vec out = Vec::Zero(dim());
    for (std::size_t k = 0; k < basis_->size(); ++k) out += basis_->eval(k, s, d) * y.col(static_cast<Eigen::Index>(k));
    if (d > 0) out /= std::pow(mesh_.length(i), d);
    return out;
  }

  Vec value(double t) const { return at(t, 0); }
  Vec deriv1(double t) const { return at(t, 1); }
  Vec deriv2(double t) const { return at(t, 2); }

  Vec at(double t, int d) const {
    const std::size_t i = mesh_.locate(t);
    return local(i, (t - mesh_.left(i)) / mesh_.length(i), d);
  }

 private:
  TimeMesh mesh_;
  std::shared_ptr<const LagrangeBasis> basis_;
  Mat nodal_;
};

struct SolveResult {
  SplineSolution solution;
  NewtonReport report;
};

namespace detail {

class IntervalSolver {
 public:
  IntervalSolver(const OdeProblem& problem, const CpgScheme& scheme, const NewtonConfig& cfg)
      : problem_(problem), scheme_(scheme), cfg_(cfg), d_(problem.dim), p_(scheme.degree) {
    if (problem_.linear) linear_jac_ = problem_.jac_y(problem_.t0, problem_.y0);
    stiff_norm_ = scheme_.stiff.cwiseAbs().rowwise().sum().maxCoeff() * p_;
  }

  /// Returns the d x (p+1) nodal values on [a, a+h] starting from y_left.
  /// `predictor`, if given, holds initial values for the p unknown nodes.
  Mat solve(double a, double h, const Vec& y_left, IntervalNewton& rep, const Mat* predictor = nullptr) {
    Vec guess(p_ * d_);
    for (int i = 0; i < p_; ++i) guess.segment(i * d_, d_) = y_left;

    Vec x = guess;
    if (predictor && predictor->allFinite())
      for (int i = 0; i < p_; ++i) x.segment(i * d_, d_) = predictor->col(i);
    if (problem_.linear) {
      rep = solve_linear(a, h, y_left, x);
    } else {
      rep = newton(a, h, y_left, x, cfg_.damping);
      if (!rep.converged && cfg_.retry_with_damping) {
        Vec x2 = guess;
        IntervalNewton rep2 = newton(a, h, y_left, x2, true);
        rep2.iterations += rep.iterations;
        if (rep2.converged || !x.allFinite()) {
          rep = rep2;
          x = x2;
        }
      }
    }
    if (!x.allFinite()) x = guess;

    Mat nodes(d_, p_ + 1);
    nodes.col(0) = y_left;
    for (int i = 0; i < p_; ++i) nodes.col(i + 1) = x.segment(i * d_, d_);
    return nodes;
  }

 private:
  struct Eval {
    Vec g;
    double norm = 0.0;
    double tol = 0.0;
  };

  Vec node_value(const Vec& y_left, const Vec& x, int interp) const {
    return interp == 0 ? y_left : Vec(x.segment((interp - 1) * d_, d_));
  }

  Eval residual(double a, double h, const Vec& y_left, const Vec& x) const {
    const QuadRule& r = scheme_.rule;
    const int m = static_cast<int>(r.size());
    Eval ev;
    ev.g = Vec::Zero(p_ * d_);
    double scale = 0.0;
    for (int j = 0; j < p_; ++j) {
      Vec acc = scheme_.stiff(j, 0) * y_left;
      for (int i = 1; i <= p_; ++i) acc += scheme_.stiff(j, i) * x.segment((i - 1) * d_, d_);
      ev.g.segment(j * d_, d_) = acc / h;
    }
    for (int k = 0; k < m; ++k) {
      const Vec fk = problem_.f(a + r.nodes[k] * h, node_value(y_left, x, scheme_.quad_to_interp[k]));
      scale = std::max(scale, fk.lpNorm<Eigen::Infinity>());
      for (int j = 0; j < p_; ++j) ev.g.segment(j * d_, d_) -= scheme_.load(j, k) * fk;
    }
    // the derivative term has the same size as F at a solution; include it
    // so that a poor iterate is not judged against a tiny tolerance
    for (int k = 0; k < m; ++k) {
      Vec dk = Vec::Zero(d_);
      for (int i = 0; i <= p_; ++i) dk += scheme_.basis->derivative(i, r.nodes[k]) * node_value(y_left, x, i);
      scale = std::max(scale, dk.lpNorm<Eigen::Infinity>() / h);
    }
    // sum over test functions per component bounds |int_T R dt| / |T|
    Vec colsum = Vec::Zero(d_);
    for (int j = 0; j < p_; ++j) colsum += ev.g.segment(j * d_, d_).cwiseAbs();
    ev.norm = colsum.allFinite() ? colsum.maxCoeff() : std::numeric_limits<double>::infinity();
    // rounding in (1/h) stiff * Y sets a floor that rel_tol cannot beat on short intervals
    const double ymax = std::max(y_left.lpNorm<Eigen::Infinity>(), x.lpNorm<Eigen::Infinity>());
    const double floor = 16.0 * std::numeric_limits<double>::epsilon() * stiff_norm_ * ymax / h;
    ev.tol = cfg_.abs_tol + cfg_.rel_tol * scale + (std::isfinite(floor) ? floor : 0.0);
    return ev;
  }

  Mat jacobian(double a, double h, const Vec& y_left, const Vec& x, bool constant) const {
    const QuadRule& r = scheme_.rule;
    const int m = static_cast<int>(r.size());
    Mat jac = Mat::Zero(p_ * d_, p_ * d_);
    for (int j = 0; j < p_; ++j)
      for (int i = 1; i <= p_; ++i)
        jac.block(j * d_, (i - 1) * d_, d_, d_).diagonal().array() += scheme_.stiff(j, i) / h;
    for (int k = 0; k < m; ++k) {
      const int i = scheme_.quad_to_interp[k];
      if (i == 0) continue;
      const Mat jk = constant ? linear_jac_ : problem_.jac_y(a + r.nodes[k] * h, node_value(y_left, x, i));
      for (int j = 0; j < p_; ++j) jac.block(j * d_, (i - 1) * d_, d_, d_) -= scheme_.load(j, k) * jk;
    }
    return jac;
  }

  IntervalNewton solve_linear(double a, double h, const Vec& y_left, Vec& x) {
    auto it = lu_cache_.find(h);
    if (it == lu_cache_.end()) it = lu_cache_.emplace(h, Eigen::PartialPivLU<Mat>(jacobian(a, h, y_left, x, true))).first;
    const auto& lu = it->second;
    IntervalNewton rep;
    rep.iterations = 1;
    Eval ev = residual(a, h, y_left, x);
    x -= lu.solve(ev.g);
    ev = residual(a, h, y_left, x);
    for (int refine = 0; refine < 2 && !(ev.norm <= ev.tol); ++refine) {
      x -= lu.solve(ev.g);
      ev = residual(a, h, y_left, x);
    }
    rep.converged = ev.norm <= ev.tol;
    rep.residual = ev.norm;
    rep.tolerance = ev.tol;
    return rep;
  }

  IntervalNewton newton(double a, double h, const Vec& y_left, Vec& x, bool damped) {
    IntervalNewton rep;
    rep.damped = damped;
    Eval ev = residual(a, h, y_left, x);
    for (int it = 0;; ++it) {
      rep.residual = ev.norm;
      rep.tolerance = ev.tol;
      rep.iterations = it;
      if (ev.norm <= ev.tol) {
        rep.converged = true;
        return rep;
      }
      if (it == cfg_.max_iter || !std::isfinite(ev.norm)) return rep;
      Eigen::PartialPivLU<Mat> lu(jacobian(a, h, y_left, x, false));
      const double rc = lu.rcond();
      if (!(rc > 1e-16)) {
        rep.singular = true;
        return rep;
      }
      const Vec dx = lu.solve(ev.g);
      if (!damped) {
        x -= dx;
        ev = residual(a, h, y_left, x);
        continue;
      }
      double lambda = 1.0;
      Vec trial = x - dx;
      Eval ev_trial = residual(a, h, y_left, trial);
      while (!(ev_trial.norm < (1.0 - 0.25 * lambda) * ev.norm) && lambda > 1.0 / 1024.0) {
        lambda *= 0.5;
        trial = x - lambda * dx;
        ev_trial = residual(a, h, y_left, trial);
      }
      x = trial;
      ev = ev_trial;
    }
  }

  const OdeProblem& problem_;
  const CpgScheme& scheme_;
  NewtonConfig cfg_;
  int d_, p_;
  double stiff_norm_ = 0.0;
  Mat linear_jac_;
  std::map<double, Eigen::PartialPivLU<Mat>> lu_cache_;
};

}  // namespace detail

/// Solves interval by interval, left to right. Newton failures are recorded
/// in the report and the solve continues from the last iterate.
inline SolveResult solve(const OdeProblem& problem, const TimeMesh& mesh, const CpgScheme& scheme,
                         const NewtonConfig& newton = {}) {
  if (problem.y0.size() != problem.dim) throw std::invalid_argument("solve: y0 has wrong dimension");
  if (mesh.t0() != problem.t0 || mesh.t_end() != problem.t_end)
    throw std::invalid_argument("solve: mesh does not span the problem horizon");
  const int p = scheme.degree;
  const std::size_t n = mesh.size();
  Mat nodal(problem.dim, static_cast<Eigen::Index>(n * (p + 1)));
  NewtonReport report;
  report.intervals.resize(n);
  detail::IntervalSolver solver(problem, scheme, newton);
  Vec left = problem.y0;
  Mat predictor(problem.dim, p);
  for (std::size_t i = 0; i < n; ++i) {
    // continue the previous polynomial into the new interval as Newton start
    const bool extrapolate = !problem.linear && i > 0 && mesh.length(i) <= 2.0 * mesh.length(i - 1);
    if (extrapolate) {
      const double ratio = mesh.length(i) / mesh.length(i - 1);
      const auto prev = nodal.middleCols(static_cast<Eigen::Index>((i - 1) * (p + 1)), p + 1);
      for (int k = 1; k <= p; ++k) {
        const double s = 1.0 + scheme.basis->nodes()[k] * ratio;
        predictor.col(k - 1).setZero();
        for (int q = 0; q <= p; ++q) predictor.col(k - 1) += scheme.basis->value(q, s) * prev.col(q);
      }
    }
    const Mat y = solver.solve(mesh.left(i), mesh.length(i), left, report.intervals[i], extrapolate ? &predictor : nullptr);
    nodal.middleCols(static_cast<Eigen::Index>(i * (p + 1)), p + 1) = y;
    if (scheme.rule.nodes.back() == 1.0) {
      left = y.col(p);
    } else {
      left = Vec::Zero(problem.dim);
      for (int k = 0; k <= p; ++k) left += scheme.basis->value(k, 1.0) * y.col(k);
    }
  }
  return {SplineSolution(mesh, scheme.basis, std::move(nodal)), std::move(report)};
}

inline SolveResult solve(const OdeProblem& problem, const TimeMesh& mesh, const QuadRule& rule,
                         const NewtonConfig& newton = {}) {
  return solve(problem, mesh, CpgScheme(rule), newton);
}

/// One interval of the scheme, exposed for step-size controllers that build
/// their mesh on the fly.
inline Mat solve_step(const OdeProblem& problem, const CpgScheme& scheme, double a, double h, const Vec& y_left,
                      const NewtonConfig& newton, IntervalNewton& report) {
  detail::IntervalSolver solver(problem, scheme, newton);
  return solver.solve(a, h, y_left, report);
}

/// R(t) = y_T'(t) - F(t, y_T(t)).
inline Vec residual(const OdeProblem& problem, const SplineSolution& y, double t) {
  return y.deriv1(t) - problem.f(t, y.value(t));
}

}  // namespace cpgts
