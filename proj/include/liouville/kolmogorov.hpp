#pragma once

#include "liouville/fields.hpp"
#include "liouville/group.hpp"
#include "liouville/rational.hpp"

#include <Eigen/Dense>

#include <complex>
#include <optional>
#include <string>
#include <vector>

namespace liouville {

/// Constant-matrix operator div(A grad) + <Bx, grad> - d/dt on R^n x R_t.
/// Entries are kept as exact rationals (decimal input is finite, hence exact)
/// alongside the double mirrors used by numerics.
struct KolmogorovSpec {
  int n = 0;
  std::vector<std::vector<Rational>> A_rat, B_rat;
  Eigen::MatrixXd A, B;

  KolmogorovSpec(int n, std::vector<std::vector<Rational>> A_rat,
                 std::vector<std::vector<Rational>> B_rat);

  Rational trace_B() const;  // exact
  /// Smallest nilpotency index k with B^k = 0 (exact), or 0 when B is not nilpotent.
  int nilpotency_index() const;
};

/// exp(-s B): exact truncated series for nilpotent B, scaling-and-squaring
/// Taylor otherwise.
Eigen::MatrixXd matrix_exp(const Eigen::MatrixXd& B, double s);

/// C(t) = int_0^t exp(-sB) A exp(-sB)^T ds by adaptive Gauss-Legendre,
/// per-entry absolute tolerance abs_tol.
Eigen::MatrixXd gram(const KolmogorovSpec& spec, double t, double abs_tol = 1e-10);

struct Classification {
  bool ipo_positive = false;     // C(t) > 0 at the witness times
  int kalman_rank = 0;           // rank [A, BA, ..., B^{n-1}A]
  bool tests_agree = false;
  std::optional<bool> hypoelliptic;  // empty when the two tests disagree
  bool unimodular = false;           // trace B == 0 (exact)
  bool linf_liouville = false;       // all Re(eigenvalue) <= 1e-10
  bool boundary_case = false;        // the decision rides on the tolerance
  std::vector<std::complex<double>> eigenvalues;
  std::vector<double> witness_t;
  std::string diagnostic;
};

Classification classify(const KolmogorovSpec& spec);

/// The operator on R^{n+1} (time last, carried in the drift slot).
Operator build_operator(const KolmogorovSpec& spec);

enum class GroupLawPath { Polynomial, EntireSymbolic, NumericClosure };

struct BuiltGroup {
  GroupLaw law;
  GroupLawPath path;
  std::string note;
};

/// Composition (x,t) o (x',t') = (x' + exp(-t'B) x, t + t'). Nilpotent B
/// gives an exact polynomial law; diagonalizable B an exact exp/sin/cos
/// symbolic law (float coefficients from the spectral decomposition);
/// defective B falls back to numeric closures (sampled verification only).
BuiltGroup build_group(const KolmogorovSpec& spec);

}  // namespace liouville
