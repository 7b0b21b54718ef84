#pragma once

/// \file ode_problem.hpp
/// \brief Problem contract for y' = F(t, y), y(t0) = y0.

#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>

#include "types.hpp"

namespace cpgts {

/// Inner product used for residual and error norms on R^d.
///  - Identity:    |v|^2 = v.v
///  - MassSquared: |v|^2 = h^(2-d_space) Mv.Mv
///  - DualNorm:    |v|^2 = A^{-1}Mv.Mv   (discrete H^{-1} norm)
class NormWeight {
 public:
  enum class Kind { Identity, MassSquared, DualNorm };

  NormWeight() = default;

  static NormWeight identity() { return {}; }

  static NormWeight mass_squared(Mat mass, double h, int space_dim) {
    NormWeight w;
    w.kind_ = Kind::MassSquared;
    w.mass_ = std::make_shared<const Mat>(std::move(mass));
    w.scale_ = std::pow(h, 2.0 - space_dim);
    w.h_ = h;
    w.space_dim_ = space_dim;
    return w;
  }

  static NormWeight dual_norm(Mat mass, Mat stiffness) {
    NormWeight w;
    w.kind_ = Kind::DualNorm;
    auto llt = std::make_shared<Eigen::LLT<Mat>>(stiffness);
    if (llt->info() != Eigen::Success) throw std::invalid_argument("NormWeight: stiffness matrix is not SPD");
    w.mass_ = std::make_shared<const Mat>(std::move(mass));
    w.stiffness_llt_ = std::move(llt);
    return w;
  }

  Kind kind() const { return kind_; }
  double h() const { return h_; }
  int space_dim() const { return space_dim_; }

  double squared_norm(const Vec& v) const {
    switch (kind_) {
      case Kind::Identity: return v.squaredNorm();
      case Kind::MassSquared: return scale_ * (*mass_ * v).squaredNorm();
      case Kind::DualNorm: {
        const Vec mv = *mass_ * v;
        return mv.dot(stiffness_llt_->solve(mv));
      }
    }
    return 0.0;
  }

  double norm(const Vec& v) const { return std::sqrt(squared_norm(v)); }

 private:
  Kind kind_ = Kind::Identity;
  std::shared_ptr<const Mat> mass_;
  std::shared_ptr<const Eigen::LLT<Mat>> stiffness_llt_;
  double scale_ = 1.0;
  double h_ = 0.0;
  int space_dim_ = 0;
};

/// y' = f(t, y) on [t0, t_end] with analytic derivatives.
///
/// `jvp`, when present, must equal jac_y(t, y) * v; large problems supply it
/// to avoid forming the Jacobian. `linear` promises f(t, y) = J y + g(t) with a
/// constant J, which lets the solver replace Newton by one linear solve.
struct OdeProblem {
  std::string name;
  int dim = 0;
  double t0 = 0.0;
  double t_end = 1.0;
  Vec y0;

  std::function<Vec(double, const Vec&)> f;
  std::function<Mat(double, const Vec&)> jac_y;
  std::function<Vec(double, const Vec&)> f_t;
  std::function<Vec(double, const Vec&, const Vec&)> jvp;

  /// Lipschitz constant of f in y. `lipschitz_global` is false when the value
  /// is only a bound over an a-priori box (polynomial nonlinearities).
  std::optional<double> lipschitz;
  bool lipschitz_global = false;

  bool linear = false;
  NormWeight weight;

  /// Closed-form solution and its derivative, when known.
  std::function<Vec(double)> exact;
  std::function<Vec(double)> exact_derivative;

  Vec apply_jacobian(double t, const Vec& y, const Vec& v) const {
    if (jvp) return jvp(t, y, v);
    return jac_y(t, y) * v;
  }

  Vec time_partial(double t, const Vec& y) const {
    if (f_t) return f_t(t, y);
    return Vec::Zero(dim);
  }

  double horizon() const { return t_end - t0; }
};

}  // namespace cpgts
