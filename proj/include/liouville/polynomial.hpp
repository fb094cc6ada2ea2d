#pragma once

#include "liouville/expr.hpp"
#include "liouville/rational.hpp"

#include <map>
#include <optional>
#include <vector>

namespace liouville {

/// Multivariate polynomial with exact rational coefficients, the normal form
/// backing exact identity checks and polynomial simplification.
class Polynomial {
public:
  /// Exponent vector; trailing zeros trimmed, so the key is canonical.
  using Mono = std::vector<std::uint32_t>;

  Polynomial() = default;

  static Polynomial zero() { return {}; }
  static Polynomial constant(Rational c);
  static Polynomial variable(int index); // 1-based

  /// Normalizes an expression tree into a polynomial; empty when the tree
  /// contains float constants, transcendental nodes with nonconstant
  /// arguments, negative powers, or nonconstant divisors.
  static std::optional<Polynomial> from_expr(const Expr& e);

  Polynomial operator+(const Polynomial& o) const;
  Polynomial operator-(const Polynomial& o) const;
  Polynomial operator*(const Polynomial& o) const;
  Polynomial pow(unsigned k) const;
  Polynomial scaled(const Rational& c) const;
  Polynomial partial(int var) const;

  /// Substitutes replacement[i-1] for variable i (identity beyond the map).
  Polynomial compose(const std::vector<Polynomial>& replacement) const;

  bool is_zero() const { return terms_.empty(); }
  bool is_constant() const;
  Rational constant_value() const; // 0 for the zero polynomial
  long total_degree() const;       // 0 for constants and the zero polynomial
  int max_var() const;

  /// Degree in one variable.
  long degree_in(int var) const;

  bool operator==(const Polynomial& o) const { return terms_ == o.terms_; }

  /// Canonical expression: terms in graded-lex order, exact coefficients.
  Expr to_expr() const;

  const std::map<Mono, Rational>& terms() const { return terms_; }

private:
  void insert(const Mono& m, const Rational& c);
  std::map<Mono, Rational> terms_;
};

}  // namespace liouville
