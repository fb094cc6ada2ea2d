#pragma once

#include "liouville/fields.hpp"

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace liouville {

/// Group law on R^n with identity at the origin. Symbolic laws carry compose
/// expressions in 2n variables (left factor x1..xn, right factor
/// x_{n+1}..x_{2n}) and optionally inverse expressions in n variables; a
/// numeric fallback path (closures) covers laws with no usable symbolic form.
struct GroupLaw {
  int dim = 0;
  std::vector<Expr> compose;  // empty for closure-only laws
  std::vector<Expr> inverse;  // empty: numeric Newton inversion

  using ComposeFn = std::function<void(std::span<const double>, std::span<const double>, std::span<double>)>;
  using InverseFn = std::function<bool(std::span<const double>, std::span<double>)>;
  ComposeFn compose_fn;
  InverseFn inverse_fn;  // returns false on divergence

  // compiled mirrors of the symbolic expressions (hot loops)
  std::shared_ptr<const std::vector<CompiledExpr>> compose_compiled;
  std::shared_ptr<const std::vector<CompiledExpr>> inverse_compiled;

  bool symbolic() const { return !compose.empty(); }
  bool polynomial() const;

  Eigen::VectorXd compose_at(std::span<const double> a, std::span<const double> b) const;
  /// Inverse of x: symbolic when available, else damped Newton on
  /// compose(x, z) = 0 from z = -x. Throws NumericalError on divergence.
  Eigen::VectorXd inverse_at(std::span<const double> x) const;
};

GroupLaw make_symbolic_law(int dim, std::vector<Expr> compose, std::vector<Expr> inverse = {});
GroupLaw make_closure_law(int dim, GroupLaw::ComposeFn compose, GroupLaw::InverseFn inverse);

struct AxiomCheck {
  std::string name;
  bool exact = false;   // proved as a polynomial identity
  double residual = 0;  // worst sampled residual (0 for exact passes)
  bool pass = false;
};

struct GroupReport {
  std::vector<AxiomCheck> checks;
  bool all_pass = false;
  std::string note;
};

/// Identity, inverse and associativity. Polynomial laws are checked as exact
/// polynomial identities; otherwise residuals are sampled (200 random
/// triples, tolerance 1e-9). Smoothness of the law is assumed, not verified.
GroupReport verify_axioms(const GroupLaw& G, unsigned seed = 2024);

struct InvarianceResult {
  double worst_residual = 0.0;
  bool exact = false;
  bool pass = false;
  std::string method;       // "exact" | "sampled" | "fd-sampled"
  std::string worst_basis;  // rendering of the worst test function
  std::string basis_note;
};

/// Left-invariance residual r(x,y) = L_y[u(x o y)] - (Lu)(x o y) over a test
/// basis (default: all monomials of degree <= 3). Exact zero required for
/// polynomial data; otherwise max |r| sampled over 200 (x,y) pairs,
/// pass iff residual <= tol.
InvarianceResult invariance_residual(const Operator& L, const GroupLaw& G,
                                     std::vector<Expr> test_basis = {}, double tol = 1e-8,
                                     unsigned seed = 2024);

/// Jacobian determinants of y -> x o y and y -> y o x must both be
/// identically 1 (exact for polynomial laws, sampled at 1e-9 otherwise).
GroupReport unimodularity_check(const GroupLaw& G, unsigned seed = 2024);

/// inverse(y) o x, the kernel geometry point of a group convolution.
Eigen::VectorXd conv_point(const GroupLaw& G, std::span<const double> y, std::span<const double> x);

/// All monomials over dim variables with total degree <= max_degree.
std::vector<Expr> monomial_basis(int dim, int max_degree);

}  // namespace liouville
