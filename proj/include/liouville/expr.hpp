#pragma once

#include "liouville/rational.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace liouville {

enum class ExprKind : std::uint8_t {
  Const,      // exact rational
  FloatConst, // double, entered through decimal literals
  Var,        // 1-based coordinate index
  Add,
  Mul,
  Neg,
  Div,
  IntPow,  // integer exponent, any sign
  RealPow, // exact rational exponent
  Sin,
  Cos,
  Exp,
  Sqrt,
};

/// Immutable expression tree with value semantics (cheap shared handles).
/// All symbolic operations (diff, simplify, substitute) are pure.
class Expr {
public:
  Expr(); // the zero constant

  static Expr constant(Rational r);
  static Expr constant(long n);
  static Expr floating(double v);
  static Expr var(int index); // 1-based
  static Expr add(std::vector<Expr> terms);
  static Expr mul(std::vector<Expr> factors);
  static Expr neg(Expr e);
  static Expr div(Expr num, Expr den);
  static Expr int_pow(Expr base, long k);
  static Expr real_pow(Expr base, Rational q);
  static Expr sin(Expr e);
  static Expr cos(Expr e);
  static Expr exp(Expr e);
  static Expr sqrt(Expr e);

  ExprKind kind() const;
  const Rational& rational_value() const; // Const
  double float_value() const;             // FloatConst
  int var_index() const;                   // Var
  const std::vector<Expr>& children() const;
  long int_exponent() const;               // IntPow
  const Rational& real_exponent() const;   // RealPow

  bool is_const() const;
  bool is_zero() const; // structural: Const(0)
  bool is_one() const;  // structural: Const(1)

  /// Highest variable index appearing in the tree (0 when constant).
  int max_var() const;

  /// Shared-structure identity, used as a fast path in comparisons.
  bool same_node(const Expr& other) const { return node_ == other.node_; }

private:
  struct Node;
  explicit Expr(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
  static Expr make(Node n);
  std::shared_ptr<const Node> node_;
  friend int struct_compare(const Expr&, const Expr&);
};

/// Total structural order (kind, payload, children lexicographically).
int struct_compare(const Expr& a, const Expr& b);
bool struct_equal(const Expr& a, const Expr& b);

struct ExprLess {
  bool operator()(const Expr& a, const Expr& b) const { return struct_compare(a, b) < 0; }
};

/// Evaluates at a point; point[i-1] is the value of variable i.
/// Throws EvalError when a variable index exceeds the point dimension.
double eval(const Expr& e, std::span<const double> point);

/// Exact symbolic derivative with respect to variable `var`; result is simplified.
Expr diff(const Expr& e, int var);

/// Canonical simplification: flattening, exact constant folding, like-term
/// collection (full multivariate normal form on polynomial data),
/// sin^2+cos^2 -> 1. Idempotent.
Expr simplify(const Expr& e);

/// Total degree when the expression normalizes to a polynomial with rational
/// coefficients; empty otherwise.
std::optional<long> polynomial_degree(const Expr& e);

/// Replaces variable i by replacement[i-1]. Variables beyond the map are kept.
Expr substitute(const Expr& e, const std::vector<Expr>& replacement);

/// Shifts every variable index by `offset` (for embedding into larger spaces).
Expr shift_vars(const Expr& e, int offset);

/// Round-trippable text form: eval(parse(render(e))) == eval(e).
std::string render(const Expr& e);

struct ParseError : std::runtime_error {
  std::size_t position;
  ParseError(std::size_t pos, const std::string& msg)
      : std::runtime_error(msg + " (at position " + std::to_string(pos) + ")"), position(pos) {}
};

struct EvalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Parses the expression grammar: variables x1..x<dim> (and `t` when
/// allow_time, mapped to index dim+1), rational and decimal literals,
/// `+ - * / ^`, sin/cos/exp/sqrt, parentheses. `^` binds tighter than unary
/// minus and takes a literal (possibly parenthesized, signed, rational)
/// exponent.
Expr parse_expression(std::string_view text, int dim, bool allow_time = false);

// Convenience builders (unsimplified nodes; call simplify at API boundaries).
Expr operator+(const Expr& a, const Expr& b);
Expr operator-(const Expr& a, const Expr& b);
Expr operator-(const Expr& a);
Expr operator*(const Expr& a, const Expr& b);
Expr operator/(const Expr& a, const Expr& b);

/// Flat SSA-style program for fast repeated numeric evaluation; structurally
/// equal subtrees are computed once (common-subexpression elimination).
class CompiledExpr {
public:
  CompiledExpr() = default;
  explicit CompiledExpr(const Expr& e);
  double operator()(std::span<const double> point) const;
  int max_var() const { return max_var_; }
  std::size_t size() const { return program_.size(); }

private:
  enum class Op : std::uint8_t { Const, Var, Add, Mul, Neg, Div, Pow, Sin, Cos, Exp, Sqrt };
  struct Ins {
    Op op;
    int a = -1, b = -1;  // operand slots
    double value = 0.0;  // Const value or Pow exponent
    int var = 0;
  };
  std::vector<Ins> program_;
  int root_ = -1;
  int max_var_ = 0;
};

}  // namespace liouville
