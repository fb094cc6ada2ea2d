#pragma once

#include "liouville/fields.hpp"
#include "liouville/group.hpp"
#include "liouville/rational.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace liouville {

/// Anisotropic dilation family x -> (lambda^{s1} x1, ..., lambda^{sn} xn)
/// with exact rational exponents 1 <= s1 <= ... <= sn.
class Dilation {
public:
  explicit Dilation(std::vector<Rational> sigma);

  int dim() const { return static_cast<int>(sigma_.size()); }
  const std::vector<Rational>& sigma() const { return sigma_; }
  /// Homogeneous dimension s1 + ... + sn, exact.
  Rational Q() const;

  Eigen::VectorXd apply(double lambda, std::span<const double> x) const;

  /// The gauge sum_j |x_j|^{1/s_j}; 1-homogeneous under the dilation.
  double homogeneous_norm(std::span<const double> x) const;

  /// Appends the parabolic exponent 2 for a time coordinate: Q grows by 2.
  Dilation heat_lift() const;

private:
  std::vector<Rational> sigma_;
  std::vector<double> sigma_d_, inv_sigma_d_;
};

struct DilationCheck {
  bool exact = false;
  double residual = 0.0;
  bool pass = false;
  std::string note;
};

/// delta_lambda(x o y) = delta_lambda(x) o delta_lambda(y): an exact
/// polynomial identity in (x, y, lambda) when the law is polynomial and the
/// exponents are integers; otherwise sampled over 200 pairs and
/// lambda in {1/2, 1, 2, 5} at tolerance 1e-9.
DilationCheck automorphism_check(const Dilation& d, const GroupLaw& G, unsigned seed = 2024);

/// Finds m with L[u o delta] = lambda^m (Lu) o delta across the degree-<=3
/// monomial basis; empty when no single degree fits.
std::optional<Rational> homogeneity_degree(const Operator& L, const Dilation& d, unsigned seed = 2024);

/// 1 + 2/(Q-2), exact. Requires Q >= 3.
Rational sharp_exponent(const Rational& Q);

}  // namespace liouville
