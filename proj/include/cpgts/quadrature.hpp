#pragma once

/// \file quadrature.hpp
/// \brief Quadrature rules and Lagrange bases on the reference interval [0,1].
///
/// The choice of rule selects the time-stepping scheme (trapezoid, Simpson,
/// Radau, ...). Rules with up to three points use closed forms; larger rules
/// are computed by Newton iteration on the Legendre-polynomial conditions that
/// define them and are then checked against their exactness degree.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace cpgts {

enum class QuadFamily { GaussLegendre, Lobatto, RadauRight };

inline std::string_view to_string(QuadFamily f) {
  switch (f) {
    case QuadFamily::GaussLegendre: return "gauss";
    case QuadFamily::Lobatto: return "lobatto";
    case QuadFamily::RadauRight: return "radau";
  }
  return "?";
}

struct QuadRule {
  QuadFamily family = QuadFamily::GaussLegendre;
  std::vector<double> nodes;    // strictly increasing, in [0,1]
  std::vector<double> weights;  // positive, sum to 1
  int exactness_degree = 0;

  std::size_t size() const { return nodes.size(); }
};

namespace detail {

struct LegendreValue {
  double p, dp;
};

// P_n(x) and P_n'(x) by the three-term recurrence.
inline LegendreValue legendre(int n, double x) {
  if (n == 0) return {1.0, 0.0};
  double p0 = 1.0, p1 = x, d0 = 0.0, d1 = 1.0;
  for (int k = 1; k < n; ++k) {
    const double p2 = ((2 * k + 1) * x * p1 - k * p0) / (k + 1);
    const double d2 = d0 + (2 * k + 1) * p1;
    p0 = p1;
    p1 = p2;
    d0 = d1;
    d1 = d2;
  }
  return {p1, d1};
}

template <class Fn>
double newton_root(Fn&& fn, double x) {
  for (int it = 0; it < 100; ++it) {
    auto [g, dg] = fn(x);
    const double dx = g / dg;
    x -= dx;
    if (std::abs(dx) < 1e-16) break;
  }
  return x;
}

inline int exactness_for(QuadFamily f, int m) {
  switch (f) {
    case QuadFamily::GaussLegendre: return 2 * m - 1;
    case QuadFamily::Lobatto: return 2 * m - 3;
    case QuadFamily::RadauRight: return 2 * m - 2;
  }
  return 0;
}

// Nodes/weights on [-1,1] for m >= 4 (Gauss, Lobatto) or m >= 4 (Radau).
inline std::pair<std::vector<double>, std::vector<double>> computed_rule(QuadFamily f, int m) {
  std::vector<double> x, w;
  const double pi = std::numbers::pi;
  switch (f) {
    case QuadFamily::GaussLegendre:
      for (int k = 1; k <= m; ++k) {
        const double r = newton_root([&](double s) {
          auto v = legendre(m, s);
          return std::pair{v.p, v.dp};
        }, std::cos(pi * (k - 0.25) / (m + 0.5)));
        const double dp = legendre(m, r).dp;
        x.push_back(r);
        w.push_back(2.0 / ((1.0 - r * r) * dp * dp));
      }
      break;
    case QuadFamily::Lobatto: {
      const int n = m - 1;
      x.push_back(-1.0);
      w.push_back(2.0 / (m * (m - 1.0)));
      for (int k = 1; k <= m - 2; ++k) {
        // interior nodes are the roots of P'_{m-1}; P'' from Legendre's equation
        const double r = newton_root([&](double s) {
          auto v = legendre(n, s);
          const double d2 = (2.0 * s * v.dp - n * (n + 1.0) * v.p) / (1.0 - s * s);
          return std::pair{v.dp, d2};
        }, std::cos(pi * k / (m - 1.0)));
        const double pn = legendre(n, r).p;
        x.push_back(r);
        w.push_back(2.0 / (m * (m - 1.0) * pn * pn));
      }
      x.push_back(1.0);
      w.push_back(2.0 / (m * (m - 1.0)));
      break;
    }
    case QuadFamily::RadauRight:
      // roots of P_{m-1} - P_m; x = 1 is one of them
      for (int k = 1; k <= m - 1; ++k) {
        const double r = newton_root([&](double s) {
          auto a = legendre(m - 1, s);
          auto b = legendre(m, s);
          return std::pair{a.p - b.p, a.dp - b.dp};
        }, std::cos(2.0 * pi * k / (2.0 * m - 1.0)));
        const double pm1 = legendre(m - 1, r).p;
        x.push_back(r);
        w.push_back((1.0 + r) / (m * m * pm1 * pm1));
      }
      x.push_back(1.0);
      w.push_back(2.0 / (m * m));
      break;
  }
  std::vector<std::size_t> order(x.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> xs, ws;
  for (std::size_t i : order) {
    xs.push_back(x[i]);
    ws.push_back(w[i]);
  }
  return {xs, ws};
}

}  // namespace detail

/// Largest |sum_k w_k s_k^j - 1/(j+1)| over j = 0..degree.
inline double monomial_defect(const QuadRule& rule, int degree) {
  double worst = 0.0;
  for (int j = 0; j <= degree; ++j) {
    double acc = 0.0;
    for (std::size_t k = 0; k < rule.size(); ++k) acc += rule.weights[k] * std::pow(rule.nodes[k], j);
    worst = std::max(worst, std::abs(acc - 1.0 / (j + 1)));
  }
  return worst;
}

inline QuadRule build_rule(QuadFamily family, int m) {
  const int min_m = family == QuadFamily::GaussLegendre ? 1 : 2;
  if (m < min_m || m > 24)
    throw std::invalid_argument("build_rule: unsupported point count " + std::to_string(m) + " for " +
                                std::string(to_string(family)));
  QuadRule r;
  r.family = family;
  r.exactness_degree = detail::exactness_for(family, m);
  const double s3 = std::sqrt(3.0), s6 = std::sqrt(6.0), s15 = std::sqrt(15.0);
  if (family == QuadFamily::GaussLegendre && m <= 3) {
    if (m == 1) r.nodes = {0.5}, r.weights = {1.0};
    if (m == 2) r.nodes = {0.5 - 0.5 / s3, 0.5 + 0.5 / s3}, r.weights = {0.5, 0.5};
    if (m == 3) r.nodes = {0.5 - s15 / 10.0, 0.5, 0.5 + s15 / 10.0}, r.weights = {5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0};
  } else if (family == QuadFamily::Lobatto && m <= 3) {
    if (m == 2) r.nodes = {0.0, 1.0}, r.weights = {0.5, 0.5};
    if (m == 3) r.nodes = {0.0, 0.5, 1.0}, r.weights = {1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0};
  } else if (family == QuadFamily::RadauRight && m <= 3) {
    if (m == 2) r.nodes = {1.0 / 3.0, 1.0}, r.weights = {0.75, 0.25};
    if (m == 3)
      r.nodes = {(4.0 - s6) / 10.0, (4.0 + s6) / 10.0, 1.0},
      r.weights = {(16.0 - s6) / 36.0, (16.0 + s6) / 36.0, 1.0 / 9.0};
  } else {
    auto [x, w] = detail::computed_rule(family, m);
    for (std::size_t k = 0; k < x.size(); ++k) {
      r.nodes.push_back(0.5 * (x[k] + 1.0));
      r.weights.push_back(0.5 * w[k]);
    }
    // endpoints exactly
    if (family != QuadFamily::GaussLegendre) r.nodes.back() = 1.0;
    if (family == QuadFamily::Lobatto) r.nodes.front() = 0.0;
    if (monomial_defect(r, r.exactness_degree) > 1e-13)
      throw std::logic_error("build_rule: computed rule fails its exactness check");
  }
  return r;
}

/// Gauss-Legendre rule with enough points to integrate degree `degree` exactly.
inline QuadRule gauss_for_degree(int degree) { return build_rule(QuadFamily::GaussLegendre, std::max(1, (degree + 2) / 2)); }

/// (b-a) * sum_k w_k f(a + s_k (b-a)). Works for scalar and Eigen-vector integrands.
template <class F>
auto integrate(const QuadRule& rule, double a, double b, F&& f) {
  const double h = b - a;
  auto acc = (rule.weights[0] * h) * f(a + rule.nodes[0] * h);
  for (std::size_t k = 1; k < rule.size(); ++k) acc += (rule.weights[k] * h) * f(a + rule.nodes[k] * h);
  return acc;
}

/// Lagrange polynomials through a node set, evaluated in product form.
class LagrangeBasis {
 public:
  LagrangeBasis() = default;
  explicit LagrangeBasis(std::vector<double> nodes) : nodes_(std::move(nodes)) {
    const std::size_t n = nodes_.size();
    if (n == 0) throw std::invalid_argument("LagrangeBasis: empty node set");
    scale_.assign(n, 1.0);
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t j = 0; j < n; ++j) {
        if (j == k) continue;
        const double denom = nodes_[k] - nodes_[j];
        if (denom == 0.0) throw std::invalid_argument("LagrangeBasis: repeated node");
        scale_[k] /= denom;
      }
  }

  std::size_t size() const { return nodes_.size(); }
  const std::vector<double>& nodes() const { return nodes_; }

  double value(std::size_t k, double s) const { return eval(k, s, 0); }
  double derivative(std::size_t k, double s) const { return eval(k, s, 1); }
  double second_derivative(std::size_t k, double s) const { return eval(k, s, 2); }

  /// d-th derivative of l_k at s.
  double eval(std::size_t k, double s, int d) const {
    if (d < 0) throw std::invalid_argument("LagrangeBasis: negative derivative order");
    if (static_cast<std::size_t>(d) >= nodes_.size()) return 0.0;
    if (d > max_order) throw std::invalid_argument("LagrangeBasis: derivative order too high");
    // der[r] holds the r-th derivative of the running product prod (s - x_j)
    double der[max_order + 1] = {1.0};
    for (int r = 1; r <= d; ++r) der[r] = 0.0;
    for (std::size_t j = 0; j < nodes_.size(); ++j) {
      if (j == k) continue;
      const double x = s - nodes_[j];
      for (int r = d; r >= 1; --r) der[r] = x * der[r] + r * der[r - 1];
      der[0] *= x;
    }
    return scale_[k] * der[d];
  }

  static constexpr int max_order = 8;

 private:
  std::vector<double> nodes_;
  std::vector<double> scale_;
};

}  // namespace cpgts
