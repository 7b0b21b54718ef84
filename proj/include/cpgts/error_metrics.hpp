#pragma once

/// \file error_metrics.hpp
/// \brief H1-seminorm and sampled max-norm errors against a reference.

#include <algorithm>
#include <cmath>
#include <functional>
#include <iterator>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "cpg_solver.hpp"
#include "ode_problem.hpp"

namespace cpgts {

/// Either a closed-form solution or a discrete solution on a finer mesh.
class ReferenceSolution {
 public:
  static ReferenceSolution analytic(std::function<Vec(double)> value, std::function<Vec(double)> derivative,
                                    double t0, double t_end, std::string provenance = "analytic") {
    ReferenceSolution r;
    r.value_ = std::move(value);
    r.derivative_ = std::move(derivative);
    r.t0_ = t0;
    r.t_end_ = t_end;
    r.provenance_ = std::move(provenance);
    return r;
  }

  static ReferenceSolution analytic(const OdeProblem& problem) {
    if (!problem.exact || !problem.exact_derivative)
      throw std::invalid_argument("ReferenceSolution: problem '" + problem.name + "' has no closed-form solution");
    return analytic(problem.exact, problem.exact_derivative, problem.t0, problem.t_end);
  }

  static ReferenceSolution from_spline(SplineSolution s, std::string provenance, double tolerance) {
    ReferenceSolution r;
    r.t0_ = s.mesh().t0();
    r.t_end_ = s.mesh().t_end();
    r.spline_ = std::move(s);
    r.provenance_ = std::move(provenance);
    r.tolerance_ = tolerance;
    return r;
  }

  Vec value(double t) const { return spline_ ? spline_->value(t) : value_(t); }
  Vec derivative(double t) const { return spline_ ? spline_->deriv1(t) : derivative_(t); }
  const SplineSolution* spline() const { return spline_ ? &*spline_ : nullptr; }
  double t0() const { return t0_; }
  double t_end() const { return t_end_; }
  double tolerance() const { return tolerance_; }
  const std::string& provenance() const { return provenance_; }

 private:
  ReferenceSolution() = default;

  std::function<Vec(double)> value_, derivative_;
  std::optional<SplineSolution> spline_;
  double t0_ = 0.0, t_end_ = 0.0;
  double tolerance_ = 0.0;
  std::string provenance_;
};

namespace detail {

inline std::vector<double> union_breakpoints(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> u;
  u.reserve(a.size() + b.size());
  std::merge(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(u));
  const double tol = 1e-14 * (u.back() - u.front());
  std::vector<double> out{u.front()};
  for (double t : u)
    if (t - out.back() > tol) out.push_back(t);
  out.back() = u.back();
  return out;
}

inline void check_horizon(const SplineSolution& a, const ReferenceSolution& ref) {
  const double len = a.mesh().t_end() - a.mesh().t0();
  if (std::abs(a.mesh().t0() - ref.t0()) > 1e-12 * len || std::abs(a.mesh().t_end() - ref.t_end()) > 1e-12 * len)
    throw std::invalid_argument("error metric: horizons of solution and reference differ");
}

}  // namespace detail

/// || (y_ref - y_T)' ||_{L2(t0, t_end)} in the given weight, integrated on
/// the union of both meshes (exact for two splines).
inline double h1_error(const SplineSolution& a, const ReferenceSolution& ref,
                       const NormWeight& weight = NormWeight::identity()) {
  detail::check_horizon(a, ref);
  std::vector<double> bp;
  int points;
  if (const SplineSolution* s = ref.spline()) {
    bp = detail::union_breakpoints(a.mesh().breakpoints(), s->mesh().breakpoints());
    points = std::max(a.degree(), s->degree()) + 1;
  } else {
    bp = a.mesh().breakpoints();
    points = a.degree() + 6;
  }
  const QuadRule g = build_rule(QuadFamily::GaussLegendre, points);
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < bp.size(); ++i) {
    const double lo = bp[i], len = bp[i + 1] - bp[i];
    for (std::size_t q = 0; q < g.size(); ++q) {
      const double t = lo + g.nodes[q] * len;
      acc += g.weights[q] * len * weight.squared_norm(ref.derivative(t) - a.deriv1(t));
    }
  }
  return std::sqrt(acc);
}

/// max_k |y_ref(t0 + k step) - y_T(t0 + k step)|, Euclidean norm, t_end included.
inline double linf_sampled(const SplineSolution& a, const ReferenceSolution& ref, double step = 0.1) {
  if (!(step > 0.0)) throw std::invalid_argument("linf_sampled: step must be positive");
  detail::check_horizon(a, ref);
  const double t0 = a.mesh().t0(), t_end = a.mesh().t_end();
  const double slack = 1e-12 * (t_end - t0);
  double worst = 0.0;
  double last = t0;
  for (long k = 0;; ++k) {
    double t = t0 + static_cast<double>(k) * step;
    if (t > t_end + slack) break;
    t = std::min(t, t_end);
    worst = std::max(worst, (ref.value(t) - a.value(t)).norm());
    last = t;
  }
  if (last < t_end - slack) worst = std::max(worst, (ref.value(t_end) - a.value(t_end)).norm());
  return worst;
}

}  // namespace cpgts
