#pragma once

/// \file problems.hpp
/// \brief Benchmark problems and the name-keyed registry used by the CLI.

#include <cmath>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "heat.hpp"
#include "ode_problem.hpp"

namespace cpgts {

/// y' = lambda y, y(t0) = y0, exact solution y0 exp(lambda (t - t0)).
inline OdeProblem linear_test(double lambda, double y0 = 1.0, double t0 = 0.0, double t_end = 1.0) {
  OdeProblem p;
  p.name = "linear";
  p.dim = 1;
  p.t0 = t0;
  p.t_end = t_end;
  p.y0 = Vec::Constant(1, y0);
  p.f = [lambda](double, const Vec& y) -> Vec { return lambda * y; };
  p.jac_y = [lambda](double, const Vec&) -> Mat { return Mat::Constant(1, 1, lambda); };
  p.f_t = [](double, const Vec&) -> Vec { return Vec::Zero(1); };
  p.lipschitz = std::abs(lambda);
  p.lipschitz_global = true;
  p.linear = true;
  p.exact = [=](double t) -> Vec { return Vec::Constant(1, y0 * std::exp(lambda * (t - t0))); };
  p.exact_derivative = [=](double t) -> Vec { return Vec::Constant(1, lambda * y0 * std::exp(lambda * (t - t0))); };
  return p;
}

/// y' = 0.
inline OdeProblem zero_problem(Vec y0, double t0 = 0.0, double t_end = 1.0) {
  OdeProblem p;
  p.name = "zero";
  p.dim = static_cast<int>(y0.size());
  p.t0 = t0;
  p.t_end = t_end;
  p.y0 = y0;
  const int d = p.dim;
  p.f = [d](double, const Vec&) -> Vec { return Vec::Zero(d); };
  p.jac_y = [d](double, const Vec&) -> Mat { return Mat::Zero(d, d); };
  p.f_t = [d](double, const Vec&) -> Vec { return Vec::Zero(d); };
  p.lipschitz = 0.0;
  p.lipschitz_global = true;
  p.linear = true;
  p.exact = [y0](double) -> Vec { return y0; };
  p.exact_derivative = [d](double) -> Vec { return Vec::Zero(d); };
  return p;
}

/// y' = 1 (scalar); the solution is a polynomial inside every ansatz space.
inline OdeProblem unit_rate_problem(double y0 = 0.0, double t0 = 0.0, double t_end = 1.0) {
  OdeProblem p;
  p.name = "unit-rate";
  p.dim = 1;
  p.t0 = t0;
  p.t_end = t_end;
  p.y0 = Vec::Constant(1, y0);
  p.f = [](double, const Vec&) -> Vec { return Vec::Ones(1); };
  p.jac_y = [](double, const Vec&) -> Mat { return Mat::Zero(1, 1); };
  p.f_t = [](double, const Vec&) -> Vec { return Vec::Zero(1); };
  p.lipschitz = 0.0;
  p.lipschitz_global = true;
  p.linear = true;
  p.exact = [=](double t) -> Vec { return Vec::Constant(1, y0 + (t - t0)); };
  p.exact_derivative = [](double) -> Vec { return Vec::Ones(1); };
  return p;
}

/// x' = y, y' = mu (1 - x^2) y - x.
inline OdeProblem van_der_pol(double mu, double t_end = 20.0, double x0 = 1.0, double y0 = 1.0) {
  if (!(mu > 0.0)) throw std::invalid_argument("van_der_pol: mu must be positive");
  OdeProblem p;
  p.name = "vdp";
  p.dim = 2;
  p.t0 = 0.0;
  p.t_end = t_end;
  p.y0 = Vec(2);
  p.y0 << x0, y0;
  p.f = [mu](double, const Vec& u) -> Vec {
    Vec r(2);
    r << u(1), mu * (1.0 - u(0) * u(0)) * u(1) - u(0);
    return r;
  };
  p.jac_y = [mu](double, const Vec& u) -> Mat {
    Mat j(2, 2);
    j << 0.0, 1.0, -2.0 * mu * u(0) * u(1) - 1.0, mu * (1.0 - u(0) * u(0));
    return j;
  };
  p.f_t = [](double, const Vec&) -> Vec { return Vec::Zero(2); };
  // Frobenius bound of the Jacobian over the box |x| <= 2.5, |y| <= 2.5 (mu + 1);
  // the limit cycle stays inside it, but there is no global constant.
  const double bx = 2.5, by = 2.5 * (mu + 1.0);
  const double a = 2.0 * mu * bx * by + 1.0, b = mu * std::max(1.0, bx * bx - 1.0);
  p.lipschitz = std::sqrt(1.0 + a * a + b * b);
  p.lipschitz_global = false;
  return p;
}

/// x' = y, eps y' = (1 - x^2) y - x. With `stretch`, time is rescaled by
/// 1/eps: the right-hand side is multiplied by eps and the horizon by 1/eps.
/// The default initial state (2, -0.66) lies close to the slow manifold.
inline OdeProblem van_der_pol_eps(double eps, bool stretch = false, double t_end = 3.0, double x0 = 2.0,
                                  double y0 = -0.66) {
  if (!(eps > 0.0)) throw std::invalid_argument("van_der_pol_eps: eps must be positive");
  const double s = stretch ? eps : 1.0;
  OdeProblem p;
  p.name = "vdp-eps";
  p.dim = 2;
  p.t0 = 0.0;
  p.t_end = stretch ? t_end / eps : t_end;
  p.y0 = Vec(2);
  p.y0 << x0, y0;
  p.f = [eps, s](double, const Vec& u) -> Vec {
    Vec r(2);
    r << s * u(1), s * ((1.0 - u(0) * u(0)) * u(1) - u(0)) / eps;
    return r;
  };
  p.jac_y = [eps, s](double, const Vec& u) -> Mat {
    Mat j(2, 2);
    j << 0.0, s, s * (-2.0 * u(0) * u(1) - 1.0) / eps, s * (1.0 - u(0) * u(0)) / eps;
    return j;
  };
  p.f_t = [](double, const Vec&) -> Vec { return Vec::Zero(2); };
  const double bx = 2.5, by = 2.5 / std::sqrt(eps) + 2.5;
  const double a = s * (2.0 * bx * by + 1.0) / eps, b = s * std::max(1.0, bx * bx - 1.0) / eps;
  p.lipschitz = std::sqrt(s * s + a * a + b * b);
  p.lipschitz_global = false;
  return p;
}

/// x' = alpha x - beta x y, y' = -gamma y + delta x y.
inline OdeProblem predator_prey(double alpha = 1.1, double beta = 0.4, double gamma = 0.4, double delta = 0.1,
                                double t_end = 20.0, double x0 = 10.0, double y0 = 10.0) {
  if (!(alpha > 0 && beta > 0 && gamma > 0 && delta > 0))
    throw std::invalid_argument("predator_prey: parameters must be positive");
  OdeProblem p;
  p.name = "predator-prey";
  p.dim = 2;
  p.t0 = 0.0;
  p.t_end = t_end;
  p.y0 = Vec(2);
  p.y0 << x0, y0;
  p.f = [=](double, const Vec& u) -> Vec {
    Vec r(2);
    r << alpha * u(0) - beta * u(0) * u(1), -gamma * u(1) + delta * u(0) * u(1);
    return r;
  };
  p.jac_y = [=](double, const Vec& u) -> Mat {
    Mat j(2, 2);
    j << alpha - beta * u(1), -beta * u(0), delta * u(1), delta * u(0) - gamma;
    return j;
  };
  p.f_t = [](double, const Vec&) -> Vec { return Vec::Zero(2); };
  // populations stay within [0, 40] for the default data
  const double box = 40.0;
  const double a = alpha + beta * box, b = delta * box + gamma;
  p.lipschitz = std::sqrt(a * a + 2.0 * (beta * box) * (beta * box) + b * b);
  p.lipschitz_global = false;
  return p;
}

/// Builds a problem by registry name with optional parameter overrides:
///   linear          lambda, y0, t0, t_end
///   vdp             mu, t_end, x0, y0
///   vdp-eps         eps, stretch, t_end, x0, y0
///   predator-prey   alpha, beta, gamma, delta, t_end, x0, y0
///   heat-linear     h, t_end, weight ("mass" | "dual" | "identity")
///   heat-nonlinear  h, t_end, weight
///   zero, unit-rate t_end
inline OdeProblem make_problem(const std::string& name, const nlohmann::json& params = nlohmann::json::object()) {
  auto get = [&](const char* key, double dflt) { return params.contains(key) ? params.at(key).get<double>() : dflt; };
  if (name == "linear") return linear_test(get("lambda", -1.0), get("y0", 1.0), get("t0", 0.0), get("t_end", 1.0));
  if (name == "vdp") return van_der_pol(get("mu", 10.0), get("t_end", 20.0), get("x0", 1.0), get("y0", 1.0));
  if (name == "vdp-eps") {
    const bool stretch = params.contains("stretch") && params.at("stretch").get<bool>();
    return van_der_pol_eps(get("eps", 1e-6), stretch, get("t_end", 3.0), get("x0", 2.0), get("y0", -0.66));
  }
  if (name == "predator-prey")
    return predator_prey(get("alpha", 1.1), get("beta", 0.4), get("gamma", 0.4), get("delta", 0.1),
                         get("t_end", 20.0), get("x0", 10.0), get("y0", 10.0));
  if (name == "heat-linear" || name == "heat-nonlinear") {
    NormWeight::Kind kind = NormWeight::Kind::MassSquared;
    if (params.contains("weight")) {
      const auto w = params.at("weight").get<std::string>();
      if (w == "dual") kind = NormWeight::Kind::DualNorm;
      else if (w == "identity") kind = NormWeight::Kind::Identity;
      else if (w != "mass") throw std::invalid_argument("unknown heat weight '" + w + "'");
    }
    return assemble_heat(get("h", 0.1), name == "heat-nonlinear", get("t_end", 1.0), kind).problem;
  }
  if (name == "zero") return zero_problem(Vec::Constant(1, get("y0", 1.0)), 0.0, get("t_end", 1.0));
  if (name == "unit-rate") return unit_rate_problem(get("y0", 0.0), 0.0, get("t_end", 1.0));
  throw std::invalid_argument("unknown problem '" + name + "'");
}

}  // namespace cpgts
