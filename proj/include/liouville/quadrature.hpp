#pragma once

#include <Eigen/Dense>

#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace liouville {

/// Raised when an iterative numeric procedure fails to reach its tolerance.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Gauss-Legendre nodes and weights on [-1, 1]; cached per order.
const std::pair<std::vector<double>, std::vector<double>>& gauss_legendre(int order);

struct Box {
  Eigen::VectorXd lo, hi;
  int dim() const { return static_cast<int>(lo.size()); }
  double volume() const;
  static Box cube(int dim, double lo, double hi);
};

using Integrand = std::function<double(std::span<const double>)>;

/// Tensor Gauss-Legendre rule of the given order over the box.
double integrate_fixed(const Integrand& f, const Box& box, int order);

struct QuadratureOptions {
  double rel_tol = 1e-4;
  double abs_tol = 0.0;
  long max_evals = 20'000'000;
  int coarse_order = 3;
  int fine_order = 5;
};

/// Adaptive bisection with an embedded coarse/fine Gauss pair; splits the
/// widest edge of the worst box first. Deterministic. Throws NumericalError
/// when the budget is exhausted before the tolerance is met.
double integrate_adaptive(const Integrand& f, const Box& box, const QuadratureOptions& opts = {},
                          const std::string& what = "integral");

/// A tensor rule frozen over a box: nodes and weights precomputed once so
/// many evaluations against different kernels share the same geometry.
struct FrozenRule {
  std::vector<Eigen::VectorXd> nodes;
  std::vector<double> weights;
  static FrozenRule tensor(const Box& box, int order);
  /// Splits the box into cells^dim subcells with a rule per cell.
  static FrozenRule composite(const Box& box, int order, int cells);
};

/// 1D adaptive Gauss pair on [a, b].
double integrate_adaptive_1d(const std::function<double(double)>& f, double a, double b,
                             double rel_tol, double abs_tol, const std::string& what = "integral");

}  // namespace liouville
