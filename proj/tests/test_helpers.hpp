#pragma once

#include "liouville/fields.hpp"
#include "liouville/group.hpp"

#include <random>
#include <vector>

namespace liouville::testing {

inline Expr ex(const std::string& text, int dim, bool allow_time = false) {
  return parse_expression(text, dim, allow_time);
}

inline Operator euclidean_laplacian(int n) {
  std::vector<std::vector<Expr>> A(static_cast<std::size_t>(n),
                                   std::vector<Expr>(static_cast<std::size_t>(n), Expr::constant(0)));
  for (int i = 0; i < n; ++i) A[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)] = Expr::constant(1);
  std::vector<Expr> b(static_cast<std::size_t>(n), Expr::constant(0));
  return Operator(n, std::move(A), std::move(b));
}

/// Sub-Laplacian X^2 + Y^2 with X = d1 - (x2/2) d3, Y = d2 + (x1/2) d3,
/// written in divergence form (the fields are divergence free).
inline Operator heisenberg_sublaplacian() {
  std::vector<std::vector<Expr>> A{
      {ex("1", 3), ex("0", 3), ex("-x2/2", 3)},
      {ex("0", 3), ex("1", 3), ex("x1/2", 3)},
      {ex("-x2/2", 3), ex("x1/2", 3), ex("(x1^2 + x2^2)/4", 3)},
  };
  std::vector<Expr> b{ex("0", 3), ex("0", 3), ex("0", 3)};
  return Operator(3, std::move(A), std::move(b));
}

inline GroupLaw heisenberg_group() {
  std::vector<Expr> compose{
      ex("x1 + x4", 6),
      ex("x2 + x5", 6),
      ex("x3 + x6 + (x1*x5 - x2*x4)/2", 6),
  };
  std::vector<Expr> inverse{ex("-x1", 3), ex("-x2", 3), ex("-x3", 3)};
  return make_symbolic_law(3, std::move(compose), std::move(inverse));
}

inline GroupLaw euclidean_group(int n) {
  std::vector<Expr> compose, inverse;
  for (int k = 1; k <= n; ++k) {
    compose.push_back(Expr::var(k) + Expr::var(k + n));
    inverse.push_back(Expr::neg(Expr::var(k)));
  }
  return make_symbolic_law(n, std::move(compose), std::move(inverse));
}

/// Degenerate Ornstein-Uhlenbeck operator on R^2 x R_t with saddle drift:
/// d11 + (x1 - x2/2) d1 + (x1/2 - x2) d2 - dt.
inline Operator degenerate_ou_operator() {
  std::vector<std::vector<Expr>> A{
      {ex("1", 3), ex("0", 3), ex("0", 3)},
      {ex("0", 3), ex("0", 3), ex("0", 3)},
      {ex("0", 3), ex("0", 3), ex("0", 3)},
  };
  std::vector<Expr> b{ex("x1 - x2/2", 3), ex("x1/2 - x2", 3), ex("-1", 3)};
  return Operator(3, std::move(A), std::move(b), /*time_flag=*/true);
}

/// Hypoelliptic but not elliptic: d11 + cos(x1) d2 + sin(x1) d3.
inline Operator mumford_operator() {
  std::vector<std::vector<Expr>> A{
      {ex("1", 3), ex("0", 3), ex("0", 3)},
      {ex("0", 3), ex("0", 3), ex("0", 3)},
      {ex("0", 3), ex("0", 3), ex("0", 3)},
  };
  std::vector<Expr> b{ex("0", 3), ex("cos(x1)", 3), ex("sin(x1)", 3)};
  return Operator(3, std::move(A), std::move(b));
}

inline std::vector<Eigen::VectorXd> random_points(int n, int count, double radius, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-radius, radius);
  std::vector<Eigen::VectorXd> pts;
  for (int i = 0; i < count; ++i) {
    Eigen::VectorXd p(n);
    for (int k = 0; k < n; ++k) p[k] = u(rng);
    pts.push_back(std::move(p));
  }
  return pts;
}

}  // namespace liouville::testing
