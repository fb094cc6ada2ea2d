#pragma once

#include "liouville/dilation.hpp"
#include "liouville/fields.hpp"
#include "liouville/group.hpp"
#include "liouville/quadrature.hpp"
#include "liouville/rational.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace liouville {

using PointFn = std::function<double(std::span<const double>)>;

// Built-in geometries backing the packaged fundamental solutions.
Operator euclidean_operator(int n);
GroupLaw euclidean_group_law(int n);
Operator heisenberg_operator();
GroupLaw heisenberg_group_law();

/// Fundamental solution bundle: a calibrated kernel evaluator together with
/// the group/dilation geometry it convolves against.
struct FundamentalSolution {
  int dim = 0;
  PointFn evaluator;   // includes the normalization constant
  GroupLaw group;
  Dilation dilation;
  Rational Q;
  double constant = 0.0;  // the calibrated c
  Operator op;            // the operator it inverts

  double operator()(std::span<const double> x) const { return evaluator(x); }
  double norm(std::span<const double> x) const { return dilation.homogeneous_norm(x); }
};

/// c_n |x|^{2-n} on R^n (n >= 3), c_n calibrated against a reference bump.
FundamentalSolution gamma_euclidean(int n);

/// c rho^{-2} with rho^4 = (x1^2+x2^2)^2 + 16 x3^2 for the sub-Laplacian
/// X^2 + Y^2, X = d1 - (x2/2) d3, Y = d2 + (x1/2) d3; Q = 4, sigma = (1,1,2).
/// The kernel identity L Gamma = 0 away from 0, positivity and homogeneity
/// are re-verified by the test suite rather than assumed.
FundamentalSolution gamma_heisenberg();

/// c = -phi(0) / int Gamma_unit(x) (L* phi)(x) dx for an internal reference
/// bump phi with phi(0) = 1; the hom-norm ball of radius `excision` around 0
/// is excised (the singularity is integrable for Q > 2). Relative quadrature
/// tolerance rel_tol. Throws NumericalError on non-convergence or a vanishing
/// denominator (wrong homogeneity).
double calibrate(const PointFn& gamma_unit, const Operator& L, const Dilation& d,
                 double support_radius = 2.0, double rel_tol = 1e-4, double excision = 1e-3);

/// Smooth function with compact support in the Euclidean ball of the given
/// radius; value 1 at the origin.
struct BumpFunction {
  int dim;
  double radius;
  double scale = 1.0;                 // multiplies the profile
  Expr expression() const;            // symbolic form (for L* phi)
  double operator()(std::span<const double> x) const;
  double mass(double rel_tol = 1e-6) const;  // integral over the support
};

/// f with declared compact support in the Euclidean ball |x| <= radius.
struct SupportedFunction {
  int dim;
  double radius;
  PointFn f;
};

struct ConvolutionOptions {
  double rel_tol = 1e-4;
  double excision = 1e-3;
  int far_order = 8;       // frozen tensor rule order for nonsingular geometry
  double far_factor = 2.0; // |x| >= far_factor * radius uses the frozen rule
};

/// Group convolution (Gamma * f)(x) = int Gamma(y^{-1} o x) f(y) dy over the
/// support of f. When x is far from the support the integrand is smooth and a
/// frozen tensor rule is used; otherwise adaptive quadrature with a smooth
/// excision of the singular point.
double convolve(const FundamentalSolution& gamma, const SupportedFunction& f,
                std::span<const double> x, const ConvolutionOptions& opts = {});

struct CounterexampleParams {
  double p = 2.0;
  double M = 2.0;        // annulus ratio
  int annuli = 8;        // K
  long samples = 100000; // Monte Carlo samples per annulus
  std::uint64_t seed = 20240817;
  int sign_check_points = 6;
  std::optional<Eigen::VectorXd> cone_axis;  // optional cone restriction
  double cone_cos = 0.0;                     // cos of the half-angle
};

struct CounterexampleReport {
  double Q = 0, p = 0, p_star = 0, M = 0;
  std::vector<double> annulus_lp;  // S_k = int_{M^k <= |x| < M^{k+1}} |u|^p
  double measured_ratio = 0;
  double theoretical_ratio = 0;
  std::string verdict;  // "divergent" | "convergent" | "inconclusive"
  std::uint64_t seed = 0;
  long samples = 0;
  bool u_nonpositive = false;
  double worst_sign_violation = 0;
  bool lu_matches_f = false;
  double lu_residual_rel = 0;
  std::optional<double> cone_ratio;
};

/// u = -Gamma * f: checks u <= 0 and L u ~ f by finite differences of the
/// quadrature values, measures annulus L^p sums in dilation-adapted
/// coordinates (shared Monte Carlo shell samples, seeded), and compares the
/// fitted geometric ratio with M^{Q + p(2-Q)}. Divergent iff ratio >= 0.95,
/// convergent iff <= 0.9, else inconclusive.
CounterexampleReport counterexample(const FundamentalSolution& gamma, const SupportedFunction& f,
                                    const CounterexampleParams& params);

/// Group mollification u_eps(x) = int u(y o x) J_eps(y) dy with the standard
/// normalized bump J_eps supported in |y| < eps (mass normalized to 1e-6).
double mollify(const PointFn& u, const GroupLaw& G, double eps, std::span<const double> x,
               double rel_tol = 1e-6);

/// Smooth cutoffs phi_m = 1 on |x| <= m, 0 outside |x| >= m+1, monotone in m.
struct CutoffSequence {
  double operator()(int m, std::span<const double> x) const;
};

/// Composition profiles F used to push subsolutions into L^1.
struct Gadget {
  enum class Kind {
    SqrtShiftPower,      // (sqrt(1+t^2) - 1)^p, p >= 1, convex off 0
    ShiftedConcavePower, // (1+t)^p - 1 on t >= 0, 0 < p < 1, concave
    QuarticJunctionPower,// 0 for t <= 0, ((1+t^4)^{1/4} - 1)^p for t > 0; C^2 at 0
    PrimitiveOfFunction, // F(t) = int_0^t f(s) ds for a user f
  };
  Kind kind;
  double p = 1.0;
  Expr f;  // PrimitiveOfFunction only (univariate in x1)

  static Gadget sqrt_shift_power(double p);
  static Gadget shifted_concave_power(double p);
  static Gadget quartic_junction_power(double p);
  static Gadget primitive_of(Expr f);
};

struct GadgetValues {
  double F, dF, d2F;
};

/// Closed-form value and first two derivatives (quadrature for the primitive
/// variant's value). Throws std::domain_error outside the variant's domain.
GadgetValues gadget_eval(const Gadget& g, double t);

}  // namespace liouville
