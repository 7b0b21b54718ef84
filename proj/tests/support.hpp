#pragma once

// Independent oracles shared by the unit tests and the acceptance binary.

#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include <cpgts/cpg_solver.hpp>
#include <cpgts/ode_problem.hpp>

namespace oracle {

using cpgts::Mat;
using cpgts::Vec;

/// Relative mismatch between jac_y(t,y) v and a central difference of f.
inline double jacobian_fd_error(const cpgts::OdeProblem& p, double t, const Vec& y, const Vec& v, double h = 1e-6) {
  const Vec fd = (p.f(t, y + h * v) - p.f(t, y - h * v)) / (2.0 * h);
  const Vec jv = p.jac_y(t, y) * v;
  return (fd - jv).norm() / std::max(1.0, jv.norm());
}

inline double jvp_error(const cpgts::OdeProblem& p, double t, const Vec& y, const Vec& v) {
  if (!p.jvp) return 0.0;
  const Vec a = p.jvp(t, y, v), b = p.jac_y(t, y) * v;
  return (a - b).norm() / std::max(1.0, b.norm());
}

inline double time_partial_fd_error(const cpgts::OdeProblem& p, double t, const Vec& y, double h = 1e-6) {
  const Vec fd = (p.f(t + h, y) - p.f(t - h, y)) / (2.0 * h);
  const Vec ft = p.time_partial(t, y);
  return (fd - ft).norm() / std::max(1.0, ft.norm());
}

/// One step of an implicit Runge-Kutta method for y' = lambda y, from the
/// Butcher tableau: y1 = y0 (1 + h lambda b^T (I - h lambda A)^{-1} 1).
inline double rk_linear_step(const Mat& a, const Vec& b, double lambda, double h, double y0) {
  const int s = static_cast<int>(b.size());
  const Mat sys = Mat::Identity(s, s) - h * lambda * a;
  const Vec k = sys.fullPivLu().solve(Vec::Ones(s));
  return y0 * (1.0 + h * lambda * b.dot(k));
}

inline void crank_nicolson(Mat& a, Vec& b) {
  a.resize(2, 2);
  a << 0.0, 0.0, 0.5, 0.5;
  b.resize(2);
  b << 0.5, 0.5;
}

inline void lobatto_iiia3(Mat& a, Vec& b) {
  a.resize(3, 3);
  a << 0.0, 0.0, 0.0, 5.0 / 24, 1.0 / 3, -1.0 / 24, 1.0 / 6, 2.0 / 3, 1.0 / 6;
  b.resize(3);
  b << 1.0 / 6, 2.0 / 3, 1.0 / 6;
}

inline void radau_iia2(Mat& a, Vec& b) {
  a.resize(2, 2);
  a << 5.0 / 12, -1.0 / 12, 3.0 / 4, 1.0 / 4;
  b.resize(2);
  b << 3.0 / 4, 1.0 / 4;
}

/// Continuous spline on `mesh` with random nodal values in [-amp, amp].
inline cpgts::SplineSolution random_spline(const cpgts::TimeMesh& mesh, int degree, int dim, std::mt19937_64& rng,
                                           double amp = 1.0) {
  std::vector<double> nodes(degree + 1);
  for (int k = 0; k <= degree; ++k) nodes[k] = static_cast<double>(k) / degree;
  auto basis = std::make_shared<const cpgts::LagrangeBasis>(nodes);
  std::uniform_real_distribution<double> u(-amp, amp);
  Mat nodal(dim, static_cast<Eigen::Index>(mesh.size() * (degree + 1)));
  Vec left(dim);
  for (int c = 0; c < dim; ++c) left(c) = u(rng);
  for (std::size_t i = 0; i < mesh.size(); ++i) {
    const auto off = static_cast<Eigen::Index>(i * (degree + 1));
    nodal.col(off) = left;
    for (int k = 1; k <= degree; ++k)
      for (int c = 0; c < dim; ++c) nodal(c, off + k) = u(rng);
    left = nodal.col(off + degree);
  }
  return {mesh, basis, nodal};
}

inline Vec random_vec(int dim, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vec v(dim);
  for (int c = 0; c < dim; ++c) v(c) = u(rng);
  return v;
}

}  // namespace oracle
