#pragma once

/// \file heat.hpp
/// \brief P1 finite-element semi-discretization of the (non)linear heat
/// equation on the unit square with homogeneous Dirichlet conditions.
///
/// The unit square is split into n x n squares, each cut along its main
/// diagonal into two right triangles. Boundary nodes are eliminated, so the
/// reduced mass matrix M and stiffness matrix A act on the (n-1)^2 interior
/// nodes. The linear problem is M y' = -A y, the nonlinear one M y' = -N(y)
/// with N from the weak form of div((1 + exp(-|grad u|^2)) grad u).

#include <array>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Sparse>

#include "ode_problem.hpp"

namespace cpgts {

struct HeatElement {
  std::array<int, 3> node{};      // global node numbers
  std::array<int, 3> interior{};  // reduced index, -1 on the boundary
  double area = 0.0;
  std::array<Eigen::Vector2d, 3> grad;  // gradients of the barycentric basis
};

class HeatSemiDiscretization {
 public:
  using SpMat = Eigen::SparseMatrix<double>;

  explicit HeatSemiDiscretization(int n) : n_(n), h_(1.0 / n) {
    if (n < 2) throw std::invalid_argument("assemble_heat: mesh has no interior nodes");
    const int nn = (n + 1) * (n + 1);
    d_ = (n - 1) * (n - 1);
    std::vector<int> red(nn, -1);
    for (int j = 1; j < n; ++j)
      for (int i = 1; i < n; ++i) red[j * (n + 1) + i] = (j - 1) * (n - 1) + (i - 1);

    auto gid = [n](int i, int j) { return j * (n + 1) + i; };
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        const int v00 = gid(i, j), v10 = gid(i + 1, j), v01 = gid(i, j + 1), v11 = gid(i + 1, j + 1);
        for (auto tri : {std::array<int, 3>{v00, v10, v11}, std::array<int, 3>{v00, v11, v01}})
          elements_.push_back(make_element(tri, red));
      }

    std::vector<Eigen::Triplet<double>> tm, ta;
    mass_ = Mat::Zero(d_, d_);
    stiffness_ = Mat::Zero(d_, d_);
    load_ = Vec::Zero(d_);
    for (const HeatElement& e : elements_) {
      for (int a = 0; a < 3; ++a) {
        if (e.interior[a] >= 0) load_(e.interior[a]) += e.area / 3.0;
        for (int b = 0; b < 3; ++b) {
          const double m = e.area / 12.0 * (a == b ? 2.0 : 1.0);
          const double k = e.area * e.grad[a].dot(e.grad[b]);
          tm.emplace_back(e.node[a], e.node[b], m);
          ta.emplace_back(e.node[a], e.node[b], k);
          if (e.interior[a] >= 0 && e.interior[b] >= 0) {
            mass_(e.interior[a], e.interior[b]) += m;
            stiffness_(e.interior[a], e.interior[b]) += k;
          }
        }
      }
    }
    full_mass_.resize(nn, nn);
    full_stiffness_.resize(nn, nn);
    full_mass_.setFromTriplets(tm.begin(), tm.end());
    full_stiffness_.setFromTriplets(ta.begin(), ta.end());

    mass_llt_ = std::make_shared<Eigen::LLT<Mat>>(mass_);
    if (mass_llt_->info() != Eigen::Success) throw std::runtime_error("heat: mass matrix not SPD");
    stiffness_llt_ = std::make_shared<Eigen::LLT<Mat>>(stiffness_);
    if (stiffness_llt_->info() != Eigen::Success) throw std::runtime_error("heat: stiffness matrix not SPD");
  }

  int cells_per_side() const { return n_; }
  double h() const { return h_; }
  int dim() const { return d_; }
  const Mat& mass() const { return mass_; }
  const Mat& stiffness() const { return stiffness_; }
  const SpMat& full_mass() const { return full_mass_; }
  const SpMat& full_stiffness() const { return full_stiffness_; }
  const Vec& load() const { return load_; }
  const std::vector<HeatElement>& elements() const { return elements_; }

  Vec solve_mass(const Vec& b) const { return mass_llt_->solve(b); }
  Mat solve_mass(const Mat& b) const { return mass_llt_->solve(b); }

  /// L2 projection of u0 = 1 onto the interior P1 space.
  Vec projection_of_one() const { return solve_mass(load_); }

  /// Weak form of div((1 + exp(-|grad u|^2)) grad u), one-point rule per
  /// triangle (exact: grad u is constant on each element).
  Vec nonlinear_operator(const Vec& y) const {
    Vec out = Vec::Zero(d_);
    for (const HeatElement& e : elements_) {
      const Eigen::Vector2d gu = gradient(e, y);
      const double c = 1.0 + std::exp(-gu.squaredNorm());
      for (int a = 0; a < 3; ++a)
        if (e.interior[a] >= 0) out(e.interior[a]) += e.area * c * gu.dot(e.grad[a]);
    }
    return out;
  }

  Mat nonlinear_jacobian(const Vec& y) const {
    Mat out = Mat::Zero(d_, d_);
    for (const HeatElement& e : elements_) {
      const Eigen::Vector2d gu = gradient(e, y);
      const double ex = std::exp(-gu.squaredNorm());
      for (int a = 0; a < 3; ++a) {
        if (e.interior[a] < 0) continue;
        for (int b = 0; b < 3; ++b) {
          if (e.interior[b] < 0) continue;
          out(e.interior[a], e.interior[b]) +=
              e.area * ((1.0 + ex) * e.grad[a].dot(e.grad[b]) - 2.0 * ex * gu.dot(e.grad[a]) * gu.dot(e.grad[b]));
        }
      }
    }
    return out;
  }

  Vec nonlinear_jvp(const Vec& y, const Vec& v) const {
    Vec out = Vec::Zero(d_);
    for (const HeatElement& e : elements_) {
      const Eigen::Vector2d gu = gradient(e, y);
      const Eigen::Vector2d gv = gradient(e, v);
      const double ex = std::exp(-gu.squaredNorm());
      const Eigen::Vector2d flux = (1.0 + ex) * gv - 2.0 * ex * gu.dot(gv) * gu;
      for (int a = 0; a < 3; ++a)
        if (e.interior[a] >= 0) out(e.interior[a]) += e.area * flux.dot(e.grad[a]);
    }
    return out;
  }

  /// sup |A M^{-1} w| / |w|, i.e. the spectral norm of M^{-1}A, by power iteration.
  double operator_norm() const {
    const Mat k = solve_mass(stiffness_);
    Vec v = Vec::Ones(d_).normalized();
    double sigma = 0.0;
    for (int it = 0; it < 1000; ++it) {
      Vec w = k.transpose() * (k * v);
      const double nw = w.norm();
      const double next = std::sqrt(nw);
      v = w / nw;
      if (std::abs(next - sigma) <= 1e-12 * next) {
        sigma = next;
        break;
      }
      sigma = next;
    }
    return sigma;
  }

 private:
  HeatElement make_element(const std::array<int, 3>& tri, const std::vector<int>& red) const {
    HeatElement e;
    e.node = tri;
    Eigen::Vector2d p[3];
    for (int a = 0; a < 3; ++a) {
      e.interior[a] = red[tri[a]];
      p[a] = {(tri[a] % (n_ + 1)) * h_, (tri[a] / (n_ + 1)) * h_};
    }
    Eigen::Matrix2d b;
    b.col(0) = p[1] - p[0];
    b.col(1) = p[2] - p[0];
    e.area = 0.5 * std::abs(b.determinant());
    const Eigen::Matrix2d binvt = b.inverse().transpose();
    e.grad[1] = binvt.col(0);
    e.grad[2] = binvt.col(1);
    e.grad[0] = -e.grad[1] - e.grad[2];
    return e;
  }

  Eigen::Vector2d gradient(const HeatElement& e, const Vec& y) const {
    Eigen::Vector2d g = Eigen::Vector2d::Zero();
    for (int a = 0; a < 3; ++a)
      if (e.interior[a] >= 0) g += y(e.interior[a]) * e.grad[a];
    return g;
  }

  int n_;
  double h_;
  int d_ = 0;
  std::vector<HeatElement> elements_;
  Mat mass_, stiffness_;
  Vec load_;
  SpMat full_mass_, full_stiffness_;
  std::shared_ptr<Eigen::LLT<Mat>> mass_llt_, stiffness_llt_;
};

struct HeatProblem {
  OdeProblem problem;
  std::shared_ptr<const HeatSemiDiscretization> disc;
};

/// Semi-discrete heat problem with cells of size 1/n, n = round(1/h_target).
/// The residual weight defaults to the h^(2-d)-scaled M.M norm.
inline HeatProblem assemble_heat(double h_target, bool nonlinear, double t_end = 1.0,
                                 NormWeight::Kind weight = NormWeight::Kind::MassSquared) {
  if (!(h_target > 0.0)) throw std::invalid_argument("assemble_heat: h must be positive");
  const int n = static_cast<int>(std::lround(1.0 / h_target));
  auto disc = std::make_shared<const HeatSemiDiscretization>(n);

  OdeProblem p;
  p.name = nonlinear ? "heat-nonlinear" : "heat-linear";
  p.dim = disc->dim();
  p.t0 = 0.0;
  p.t_end = t_end;
  p.y0 = disc->projection_of_one();
  p.f_t = [d = p.dim](double, const Vec&) -> Vec { return Vec::Zero(d); };
  switch (weight) {
    case NormWeight::Kind::Identity: p.weight = NormWeight::identity(); break;
    case NormWeight::Kind::MassSquared: p.weight = NormWeight::mass_squared(disc->mass(), disc->h(), 2); break;
    case NormWeight::Kind::DualNorm: p.weight = NormWeight::dual_norm(disc->mass(), disc->stiffness()); break;
  }

  if (!nonlinear) {
    auto k = std::make_shared<const Mat>(disc->solve_mass(disc->stiffness()));
    p.f = [k](double, const Vec& y) -> Vec { return -(*k * y); };
    p.jac_y = [k](double, const Vec&) -> Mat { return -*k; };
    p.jvp = [k](double, const Vec&, const Vec& v) -> Vec { return -(*k * v); };
    p.linear = true;
    p.lipschitz = disc->operator_norm();
    p.lipschitz_global = true;
  } else {
    p.f = [disc](double, const Vec& y) -> Vec { return -disc->solve_mass(disc->nonlinear_operator(y)); };
    p.jac_y = [disc](double, const Vec& y) -> Mat { return -disc->solve_mass(disc->nonlinear_jacobian(y)); };
    p.jvp = [disc](double, const Vec& y, const Vec& v) -> Vec {
      return -disc->solve_mass(disc->nonlinear_jvp(y, v));
    };
    // The flux derivative has eigenvalues in (0, 2]; 2|M^{-1}A| is reported as
    // a bound for output labelling only, it is not a proven global constant.
    p.lipschitz = 2.0 * disc->operator_norm();
    p.lipschitz_global = false;
  }
  return {std::move(p), std::move(disc)};
}

}  // namespace cpgts
