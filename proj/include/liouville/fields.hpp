#pragma once

#include "liouville/expr.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace liouville {

struct DimensionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// First-order differential operator sum_k coeffs[k] * d/dx_k.
struct VectorField {
  int dim = 0;
  std::vector<Expr> coeffs;

  VectorField() = default;
  VectorField(int dimension, std::vector<Expr> c);

  bool is_zero() const;
  Eigen::VectorXd at(std::span<const double> point) const;
  /// Directional derivative X(u).
  Expr apply(const Expr& u) const;
};

int field_compare(const VectorField& a, const VectorField& b);

/// [X,Y]_k = sum_j X_j d_j Y_k - Y_j d_j X_k, simplified componentwise.
VectorField lie_bracket(const VectorField& X, const VectorField& Y);

/// Second-order operator div(A grad) + <b, grad>. When time_flag is set the
/// last coordinate is the time variable and b already carries the -d/dt slot,
/// so every algebraic path treats the operator uniformly.
class Operator {
public:
  Operator(int dim, std::vector<std::vector<Expr>> A, std::vector<Expr> b, bool time_flag = false);

  int dim() const { return dim_; }
  bool time_flag() const { return time_flag_; }
  const std::vector<std::vector<Expr>>& A() const { return A_; }
  const std::vector<Expr>& b() const { return b_; }
  const Expr& A(int i, int j) const { return A_[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]; }

  /// A(x) as a numeric matrix.
  Eigen::MatrixXd A_at(std::span<const double> point) const;
  Eigen::VectorXd b_at(std::span<const double> point) const;

  /// True when every coefficient of A and b is polynomial.
  bool polynomial_coefficients() const;

private:
  int dim_;
  std::vector<std::vector<Expr>> A_;
  std::vector<Expr> b_;
  bool time_flag_;
};

// Variables of u beyond the operator dimension are inert parameters
// (derivatives are only taken in x1..x_dim).
Expr apply_operator(const Operator& L, const Expr& u);
Expr apply_adjoint(const Operator& L, const Expr& phi);
Expr a_gradient_sq(const Operator& L, const Expr& u);

/// L(F(u)) - [F'(u) L u + F''(u) <A grad u, grad u>] for univariate polynomial
/// F (in x1); identically zero by the chain rule, returned for exact checking.
Expr chain_rule_residual(const Operator& L, const Expr& F, const Expr& u);

/// Fields X_j built from the columns of A (zero columns dropped).
std::vector<VectorField> column_fields(const Operator& L);
/// The drift field X_0 = sum b_k d_k.
VectorField drift_field(const Operator& L);
/// column_fields plus the drift when nonzero: the natural bracket generators.
std::vector<VectorField> hormander_generators(const Operator& L);

struct HormanderReport {
  int dim = 0;
  int max_depth = 0;
  int generated_fields = 0;
  std::vector<int> ranks;             // per sample point
  std::vector<int> deficient_points;  // indices into the sample set
  bool full_rank = false;
  std::string note;  // rank is sampled pointwise; density over the domain is not certified
};

/// Generates iterated brackets up to word length max_depth (inputs have
/// length 1), deduplicates structurally, and reports the numerical rank of
/// the evaluated fields at each sample point (singular values > 1e-8 * max).
HormanderReport hormander_check(const std::vector<VectorField>& fields,
                                const std::vector<Eigen::VectorXd>& points, int max_depth);

/// Hypothesis checks on the coefficients: A symmetric (structural), A(x) PSD
/// at sampled points, trace A(0) > 0.
struct OperatorHypothesisReport {
  bool symmetric = false;
  bool psd_sampled = false;
  double min_eigenvalue = 0.0;
  double trace_at_origin = 0.0;
  bool trace_positive = false;
  bool all_pass() const { return symmetric && psd_sampled && trace_positive; }
};
OperatorHypothesisReport operator_hypothesis_report(const Operator& L, int samples = 100,
                                                    unsigned seed = 2024);

}  // namespace liouville
