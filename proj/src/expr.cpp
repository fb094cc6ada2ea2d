#include "liouville/expr.hpp"

#include "liouville/polynomial.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <stdexcept>

namespace liouville {

struct Expr::Node {
  ExprKind kind = ExprKind::Const;
  Rational rat;        // Const value, RealPow exponent
  double fval = 0.0;   // FloatConst
  int var = 0;         // Var index (1-based)
  long ipow = 0;       // IntPow exponent
  std::vector<Expr> kids;
  int max_var = 0;
};

Expr Expr::make(Node n) {
  int m = n.var;
  for (const auto& k : n.kids) m = std::max(m, k.max_var());
  n.max_var = m;
  return Expr(std::make_shared<const Node>(std::move(n)));
}

namespace {
const Rational kZero(0);
}  // namespace

Expr::Expr() : node_(make({}).node_) {}

Expr Expr::constant(Rational r) {
  Node n;
  n.kind = ExprKind::Const;
  n.rat = std::move(r);
  return make(std::move(n));
}

Expr Expr::constant(long v) { return constant(Rational(v)); }

Expr Expr::floating(double v) {
  Node n;
  n.kind = ExprKind::FloatConst;
  n.fval = v;
  return make(std::move(n));
}

Expr Expr::var(int index) {
  if (index < 1) throw std::invalid_argument("variable index must be positive");
  Node n;
  n.kind = ExprKind::Var;
  n.var = index;
  return make(std::move(n));
}

Expr Expr::add(std::vector<Expr> terms) {
  if (terms.empty()) return constant(0);
  if (terms.size() == 1) return terms[0];
  Node n;
  n.kind = ExprKind::Add;
  n.kids = std::move(terms);
  return make(std::move(n));
}

Expr Expr::mul(std::vector<Expr> factors) {
  if (factors.empty()) return constant(1);
  if (factors.size() == 1) return factors[0];
  Node n;
  n.kind = ExprKind::Mul;
  n.kids = std::move(factors);
  return make(std::move(n));
}

Expr Expr::neg(Expr e) {
  Node n;
  n.kind = ExprKind::Neg;
  n.kids = {std::move(e)};
  return make(std::move(n));
}

Expr Expr::div(Expr num, Expr den) {
  Node n;
  n.kind = ExprKind::Div;
  n.kids = {std::move(num), std::move(den)};
  return make(std::move(n));
}

Expr Expr::int_pow(Expr base, long k) {
  Node n;
  n.kind = ExprKind::IntPow;
  n.ipow = k;
  n.kids = {std::move(base)};
  return make(std::move(n));
}

Expr Expr::real_pow(Expr base, Rational q) {
  Node n;
  n.kind = ExprKind::RealPow;
  n.rat = std::move(q);
  n.kids = {std::move(base)};
  return make(std::move(n));
}

#define LIOUVILLE_UNARY(NAME, KIND)            \
  Expr Expr::NAME(Expr e) {                    \
    Node n;                                    \
    n.kind = ExprKind::KIND;                   \
    n.kids = {std::move(e)};                   \
    return make(std::move(n));      \
  }
LIOUVILLE_UNARY(sin, Sin)
LIOUVILLE_UNARY(cos, Cos)
LIOUVILLE_UNARY(exp, Exp)
LIOUVILLE_UNARY(sqrt, Sqrt)
#undef LIOUVILLE_UNARY

ExprKind Expr::kind() const { return node_->kind; }
const Rational& Expr::rational_value() const { return node_->rat; }
double Expr::float_value() const { return node_->fval; }
int Expr::var_index() const { return node_->var; }
const std::vector<Expr>& Expr::children() const { return node_->kids; }
long Expr::int_exponent() const { return node_->ipow; }
const Rational& Expr::real_exponent() const { return node_->rat; }
int Expr::max_var() const { return node_->max_var; }

bool Expr::is_const() const { return node_->kind == ExprKind::Const; }
bool Expr::is_zero() const { return node_->kind == ExprKind::Const && node_->rat == kZero; }
bool Expr::is_one() const { return node_->kind == ExprKind::Const && node_->rat == 1; }

int struct_compare(const Expr& a, const Expr& b) {
  if (a.node_ == b.node_) return 0;
  if (a.kind() != b.kind()) return a.kind() < b.kind() ? -1 : 1;
  switch (a.kind()) {
    case ExprKind::Const:
      if (a.rational_value() == b.rational_value()) return 0;
      return a.rational_value() < b.rational_value() ? -1 : 1;
    case ExprKind::FloatConst:
      if (a.float_value() == b.float_value()) return 0;
      return a.float_value() < b.float_value() ? -1 : 1;
    case ExprKind::Var:
      if (a.var_index() == b.var_index()) return 0;
      return a.var_index() < b.var_index() ? -1 : 1;
    case ExprKind::IntPow:
      if (a.int_exponent() != b.int_exponent()) return a.int_exponent() < b.int_exponent() ? -1 : 1;
      break;
    case ExprKind::RealPow:
      if (!(a.real_exponent() == b.real_exponent()))
        return a.real_exponent() < b.real_exponent() ? -1 : 1;
      break;
    default:
      break;
  }
  const auto& ka = a.children();
  const auto& kb = b.children();
  if (ka.size() != kb.size()) return ka.size() < kb.size() ? -1 : 1;
  for (std::size_t i = 0; i < ka.size(); ++i) {
    int c = struct_compare(ka[i], kb[i]);
    if (c != 0) return c;
  }
  return 0;
}

bool struct_equal(const Expr& a, const Expr& b) { return struct_compare(a, b) == 0; }

double eval(const Expr& e, std::span<const double> point) {
  switch (e.kind()) {
    case ExprKind::Const:
      return to_double(e.rational_value());
    case ExprKind::FloatConst:
      return e.float_value();
    case ExprKind::Var: {
      int i = e.var_index();
      if (i > static_cast<int>(point.size()))
        throw EvalError("variable x" + std::to_string(i) + " outside point of dimension " +
                        std::to_string(point.size()));
      return point[static_cast<std::size_t>(i) - 1];
    }
    case ExprKind::Add: {
      double s = 0;
      for (const auto& k : e.children()) s += eval(k, point);
      return s;
    }
    case ExprKind::Mul: {
      double p = 1;
      for (const auto& k : e.children()) p *= eval(k, point);
      return p;
    }
    case ExprKind::Neg:
      return -eval(e.children()[0], point);
    case ExprKind::Div:
      return eval(e.children()[0], point) / eval(e.children()[1], point);
    case ExprKind::IntPow:
      return std::pow(eval(e.children()[0], point), static_cast<double>(e.int_exponent()));
    case ExprKind::RealPow:
      return std::pow(eval(e.children()[0], point), to_double(e.real_exponent()));
    case ExprKind::Sin:
      return std::sin(eval(e.children()[0], point));
    case ExprKind::Cos:
      return std::cos(eval(e.children()[0], point));
    case ExprKind::Exp:
      return std::exp(eval(e.children()[0], point));
    case ExprKind::Sqrt:
      return std::sqrt(eval(e.children()[0], point));
  }
  throw EvalError("corrupt expression node");
}

// ---------------------------------------------------------------------------
// Differentiation
// ---------------------------------------------------------------------------

namespace {
Expr diff_raw(const Expr& e, int var);

Expr diff_mul(const std::vector<Expr>& fs, int var) {
  std::vector<Expr> terms;
  for (std::size_t i = 0; i < fs.size(); ++i) {
    std::vector<Expr> factors;
    for (std::size_t j = 0; j < fs.size(); ++j)
      factors.push_back(i == j ? diff_raw(fs[j], var) : fs[j]);
    terms.push_back(Expr::mul(std::move(factors)));
  }
  return Expr::add(std::move(terms));
}

Expr diff_raw(const Expr& e, int var) {
  switch (e.kind()) {
    case ExprKind::Const:
    case ExprKind::FloatConst:
      return Expr::constant(0);
    case ExprKind::Var:
      return Expr::constant(e.var_index() == var ? 1 : 0);
    case ExprKind::Add: {
      std::vector<Expr> kids;
      for (const auto& k : e.children()) kids.push_back(diff_raw(k, var));
      return Expr::add(std::move(kids));
    }
    case ExprKind::Mul:
      return diff_mul(e.children(), var);
    case ExprKind::Neg:
      return Expr::neg(diff_raw(e.children()[0], var));
    case ExprKind::Div: {
      const Expr& u = e.children()[0];
      const Expr& v = e.children()[1];
      Expr num = diff_raw(u, var) * v - u * diff_raw(v, var);
      return Expr::div(num, Expr::int_pow(v, 2));
    }
    case ExprKind::IntPow: {
      const Expr& b = e.children()[0];
      long k = e.int_exponent();
      if (k == 0) return Expr::constant(0);
      return Expr::constant(k) * Expr::int_pow(b, k - 1) * diff_raw(b, var);
    }
    case ExprKind::RealPow: {
      const Expr& b = e.children()[0];
      const Rational& q = e.real_exponent();
      return Expr::constant(q) * Expr::real_pow(b, Rational(q - 1)) * diff_raw(b, var);
    }
    case ExprKind::Sin:
      return Expr::cos(e.children()[0]) * diff_raw(e.children()[0], var);
    case ExprKind::Cos:
      return Expr::neg(Expr::sin(e.children()[0])) * diff_raw(e.children()[0], var);
    case ExprKind::Exp:
      return Expr::exp(e.children()[0]) * diff_raw(e.children()[0], var);
    case ExprKind::Sqrt: {
      const Expr& b = e.children()[0];
      return Expr::div(diff_raw(b, var), Expr::constant(2) * Expr::sqrt(b));
    }
  }
  throw std::logic_error("corrupt expression node");
}

}  // namespace

Expr diff(const Expr& e, int var) { return simplify(diff_raw(e, var)); }

// ---------------------------------------------------------------------------
// Simplification
// ---------------------------------------------------------------------------

namespace {

// Numeric value that stays exact until a float joins in.
struct NumVal {
  bool exact = true;
  Rational r{1};
  double f = 1.0;

  static NumVal rational(Rational v) { return {true, std::move(v), 0.0}; }
  static NumVal floating(double v) { return {false, Rational(0), v}; }

  double as_double() const { return exact ? to_double(r) : f; }
  bool is_zero() const { return exact ? r == 0 : f == 0.0; }
  bool is_one() const { return exact ? r == 1 : f == 1.0; }

  NumVal& operator*=(const NumVal& o) {
    if (exact && o.exact) {
      r *= o.r;
    } else {
      f = as_double() * o.as_double();
      exact = false;
    }
    return *this;
  }
  NumVal& operator+=(const NumVal& o) {
    if (exact && o.exact) {
      r += o.r;
    } else {
      f = as_double() + o.as_double();
      exact = false;
    }
    return *this;
  }
  Expr to_expr() const { return exact ? Expr::constant(r) : Expr::floating(f); }
};

bool is_numeric(const Expr& e) {
  return e.kind() == ExprKind::Const || e.kind() == ExprKind::FloatConst;
}

NumVal numeric_value(const Expr& e) {
  return e.kind() == ExprKind::Const ? NumVal::rational(e.rational_value())
                                     : NumVal::floating(e.float_value());
}

Expr simplify_impl(const Expr& e);

Expr simplify_child(const Expr& e) {
  if (auto p = Polynomial::from_expr(e)) return p->to_expr();
  Expr s = simplify_impl(e);
  // folding may have removed every transcendental part; re-canonicalize so
  // all routes to a polynomial agree structurally
  if (auto p = Polynomial::from_expr(s)) return p->to_expr();
  return s;
}

// (coefficient, core) decomposition of a canonical term.
std::pair<NumVal, Expr> split_coeff(const Expr& term) {
  if (is_numeric(term)) return {numeric_value(term), Expr::constant(1)};
  if (term.kind() == ExprKind::Mul) {
    const auto& kids = term.children();
    if (!kids.empty() && is_numeric(kids[0])) {
      std::vector<Expr> rest(kids.begin() + 1, kids.end());
      return {numeric_value(kids[0]), Expr::mul(std::move(rest))};
    }
  }
  return {NumVal::rational(Rational(1)), term};
}

Expr rebuild_term(const NumVal& coeff, const Expr& core) {
  if (coeff.is_zero()) return Expr::constant(0);
  if (core.is_one()) return coeff.to_expr();
  if (coeff.is_one()) return core;
  std::vector<Expr> factors{coeff.to_expr()};
  if (core.kind() == ExprKind::Mul)
    for (const auto& k : core.children()) factors.push_back(k);
  else
    factors.push_back(core);
  return Expr::mul(std::move(factors));
}

// Matches IntPow(sin/cos(a), 2); returns the argument.
std::optional<Expr> squared_trig_arg(const Expr& core, ExprKind fn) {
  if (core.kind() != ExprKind::IntPow || core.int_exponent() != 2) return std::nullopt;
  const Expr& base = core.children()[0];
  if (base.kind() != fn) return std::nullopt;
  return base.children()[0];
}

Expr simplify_add(const std::vector<Expr>& kids_in) {
  std::vector<Expr> flat;
  for (const auto& kid : kids_in) {
    Expr k = simplify_child(kid);
    if (k.kind() == ExprKind::Add)
      for (const auto& g : k.children()) flat.push_back(g);
    else
      flat.push_back(k);
  }

  std::map<Expr, NumVal, ExprLess> groups;
  for (const auto& term : flat) {
    auto [coeff, core] = split_coeff(term);
    auto it = groups.find(core);
    if (it == groups.end())
      groups.emplace(core, coeff);
    else
      it->second += coeff;
  }

  // sin^2 + cos^2 pairs fold into the constant slot.
  std::vector<std::pair<Expr, NumVal>> trig_fixups;
  for (auto it = groups.begin(); it != groups.end();) {
    auto arg = squared_trig_arg(it->first, ExprKind::Cos);
    if (!arg) {
      ++it;
      continue;
    }
    Expr sin_core = Expr::int_pow(Expr::sin(*arg), 2);
    auto sin_it = groups.find(sin_core);
    if (sin_it == groups.end()) {
      ++it;
      continue;
    }
    NumVal ccos = it->second;
    NumVal neg = ccos;
    neg *= NumVal::rational(Rational(-1));
    sin_it->second += neg;          // sin^2 coefficient -= cos^2 coefficient
    trig_fixups.emplace_back(Expr::constant(1), ccos);  // constant += cos^2 coefficient
    it = groups.erase(it);
  }
  for (auto& [core, val] : trig_fixups) {
    auto it = groups.find(core);
    if (it == groups.end())
      groups.emplace(core, val);
    else
      it->second += val;
  }

  std::vector<Expr> terms;
  for (const auto& [core, coeff] : groups) {
    if (coeff.is_zero()) continue;
    terms.push_back(rebuild_term(coeff, core));
  }
  if (terms.empty()) return Expr::constant(0);
  return Expr::add(std::move(terms));
}

Expr simplify_int_pow(const Expr& base_in, long k);
Expr simplify_real_pow(const Expr& base_in, const Rational& q);
Expr simplify_div(const Expr& num_in, const Expr& den_in);

Expr simplify_mul(const std::vector<Expr>& kids_in) {
  std::vector<Expr> num_factors;
  std::vector<Expr> den_factors;
  for (const auto& kid : kids_in) {
    Expr k = simplify_child(kid);
    if (k.kind() == ExprKind::Mul) {
      for (const auto& g : k.children()) {
        if (g.kind() == ExprKind::Div) {
          num_factors.push_back(g.children()[0]);
          den_factors.push_back(g.children()[1]);
        } else {
          num_factors.push_back(g);
        }
      }
    } else if (k.kind() == ExprKind::Div) {
      num_factors.push_back(k.children()[0]);
      den_factors.push_back(k.children()[1]);
    } else {
      num_factors.push_back(k);
    }
  }

  if (!den_factors.empty()) {
    Expr num = simplify_child(Expr::mul(std::move(num_factors)));
    Expr den = simplify_child(Expr::mul(std::move(den_factors)));
    return simplify_div(num, den);
  }

  NumVal coeff = NumVal::rational(Rational(1));
  // base -> accumulated rational exponent
  std::map<Expr, Rational, ExprLess> powers;
  for (const auto& f : num_factors) {
    if (is_numeric(f)) {
      coeff *= numeric_value(f);
      continue;
    }
    Expr base = f;
    Rational expnt(1);
    if (f.kind() == ExprKind::IntPow) {
      base = f.children()[0];
      expnt = Rational(f.int_exponent());
    } else if (f.kind() == ExprKind::RealPow) {
      base = f.children()[0];
      expnt = f.real_exponent();
    }
    auto it = powers.find(base);
    if (it == powers.end())
      powers.emplace(base, expnt);
    else
      it->second += expnt;
  }

  if (coeff.is_zero()) return Expr::constant(0);

  std::vector<Expr> factors;
  bool needs_refold = false;
  for (const auto& [base, expnt] : powers) {
    if (expnt == 0) continue;
    Expr f = is_integer(expnt)
                 ? simplify_int_pow(base, static_cast<long>(liouville::numerator(expnt)))
                 : simplify_real_pow(base, expnt);
    if (is_numeric(f)) {
      coeff *= numeric_value(f);
      continue;
    }
    if (f.kind() == ExprKind::Mul || f.kind() == ExprKind::Div) needs_refold = true;
    factors.push_back(f);
  }

  if (needs_refold) {
    // A distributed power re-entered the product; flatten once more.
    factors.push_back(coeff.to_expr());
    return simplify_child(Expr::mul(std::move(factors)));
  }

  std::sort(factors.begin(), factors.end(),
            [](const Expr& a, const Expr& b) { return struct_compare(a, b) < 0; });
  if (factors.empty()) return coeff.to_expr();
  if (!coeff.is_one()) factors.insert(factors.begin(), coeff.to_expr());
  return Expr::mul(std::move(factors));
}

Expr simplify_int_pow(const Expr& base_in, long k) {
  Expr base = simplify_child(base_in);
  if (k == 0) return Expr::constant(1);
  if (k == 1) return base;
  if (base.kind() == ExprKind::Const) {
    const Rational& c = base.rational_value();
    if (c != 0 || k > 0) {
      Rational out(1);
      Rational b = k > 0 ? c : Rational(1) / c;
      for (long i = 0; i < std::labs(k); ++i) out *= b;
      return Expr::constant(out);
    }
  }
  if (base.kind() == ExprKind::FloatConst)
    return Expr::floating(std::pow(base.float_value(), static_cast<double>(k)));
  if (base.kind() == ExprKind::IntPow)
    return simplify_int_pow(base.children()[0], base.int_exponent() * k);
  if (base.kind() == ExprKind::RealPow)
    return simplify_real_pow(base.children()[0], Rational(base.real_exponent() * k));
  if (base.kind() == ExprKind::Mul) {
    std::vector<Expr> factors;
    for (const auto& f : base.children()) factors.push_back(Expr::int_pow(f, k));
    return simplify_child(Expr::mul(std::move(factors)));
  }
  if (base.kind() == ExprKind::Div) {
    const Expr& n = base.children()[0];
    const Expr& d = base.children()[1];
    if (k > 0) return simplify_div(simplify_int_pow(n, k), simplify_int_pow(d, k));
    return simplify_div(simplify_int_pow(d, -k), simplify_int_pow(n, -k));
  }
  return Expr::int_pow(base, k);
}

Expr simplify_real_pow(const Expr& base_in, const Rational& q) {
  if (is_integer(q)) return simplify_int_pow(base_in, static_cast<long>(numerator(q)));
  Expr base = simplify_child(base_in);
  if (base.kind() == ExprKind::Const) {
    if (auto whole = exact_root(base.rational_value(), static_cast<unsigned>(denominator(q)))) {
      BigInt num = numerator(q);
      bool neg = num < 0;
      if (neg) num = -num;
      Rational out(1);
      for (BigInt i = 0; i < num; ++i) out *= *whole;
      if (neg) {
        if (out == 0) return Expr::real_pow(base, q);
        out = Rational(1) / out;
      }
      return Expr::constant(out);
    }
    return Expr::real_pow(base, q);
  }
  if (base.kind() == ExprKind::FloatConst)
    return Expr::floating(std::pow(base.float_value(), to_double(q)));
  // (b^p)^q with fractional p is only formed for positive bases, so exponents combine.
  if (base.kind() == ExprKind::RealPow)
    return simplify_real_pow(base.children()[0], Rational(base.real_exponent() * q));
  return Expr::real_pow(base, q);
}

Expr simplify_div(const Expr& num_in, const Expr& den_in) {
  Expr num = simplify_child(num_in);
  Expr den = simplify_child(den_in);
  if (num.is_zero()) return Expr::constant(0);
  if (is_numeric(den)) {
    NumVal d = numeric_value(den);
    if (!d.is_zero()) {
      NumVal inv = d.exact ? NumVal::rational(Rational(1) / d.r) : NumVal::floating(1.0 / d.f);
      return simplify_child(Expr::mul({inv.to_expr(), num}));
    }
  }
  if (num.kind() == ExprKind::Div)
    return simplify_div(num.children()[0], Expr::mul({num.children()[1], den}));
  if (den.kind() == ExprKind::Div)
    return simplify_div(Expr::mul({num, den.children()[1]}), den.children()[0]);
  if (struct_equal(num, den)) return Expr::constant(1);
  return Expr::div(num, den);
}

Expr simplify_impl(const Expr& e) {
  switch (e.kind()) {
    case ExprKind::Const:
    case ExprKind::FloatConst:
    case ExprKind::Var:
      return e;
    case ExprKind::Add:
      return simplify_add(e.children());
    case ExprKind::Mul:
      return simplify_mul(e.children());
    case ExprKind::Neg:
      return simplify_mul({Expr::constant(-1), e.children()[0]});
    case ExprKind::Div:
      return simplify_div(e.children()[0], e.children()[1]);
    case ExprKind::IntPow:
      return simplify_int_pow(e.children()[0], e.int_exponent());
    case ExprKind::RealPow:
      return simplify_real_pow(e.children()[0], e.real_exponent());
    case ExprKind::Sqrt:
      return simplify_real_pow(e.children()[0], Rational(1, 2));
    case ExprKind::Sin:
    case ExprKind::Cos:
    case ExprKind::Exp: {
      Expr arg = simplify_child(e.children()[0]);
      if (arg.kind() == ExprKind::FloatConst) {
        double a = arg.float_value();
        double v = e.kind() == ExprKind::Sin ? std::sin(a)
                   : e.kind() == ExprKind::Cos ? std::cos(a)
                                                : std::exp(a);
        return Expr::floating(v);
      }
      if (arg.is_zero())
        return e.kind() == ExprKind::Sin ? Expr::constant(0) : Expr::constant(1);
      switch (e.kind()) {
        case ExprKind::Sin:
          return Expr::sin(arg);
        case ExprKind::Cos:
          return Expr::cos(arg);
        default:
          return Expr::exp(arg);
      }
    }
  }
  throw std::logic_error("corrupt expression node");
}

}  // namespace

Expr simplify(const Expr& e) { return simplify_child(e); }

std::optional<long> polynomial_degree(const Expr& e) {
  auto p = Polynomial::from_expr(e);
  if (!p) return std::nullopt;
  return p->total_degree();
}

// ---------------------------------------------------------------------------
// Substitution, variable shifts
// ---------------------------------------------------------------------------

namespace {

Expr rebuild_with(const Expr& e, std::vector<Expr> kids) {
  switch (e.kind()) {
    case ExprKind::Add:
      return Expr::add(std::move(kids));
    case ExprKind::Mul:
      return Expr::mul(std::move(kids));
    case ExprKind::Neg:
      return Expr::neg(std::move(kids[0]));
    case ExprKind::Div:
      return Expr::div(std::move(kids[0]), std::move(kids[1]));
    case ExprKind::IntPow:
      return Expr::int_pow(std::move(kids[0]), e.int_exponent());
    case ExprKind::RealPow:
      return Expr::real_pow(std::move(kids[0]), e.real_exponent());
    case ExprKind::Sin:
      return Expr::sin(std::move(kids[0]));
    case ExprKind::Cos:
      return Expr::cos(std::move(kids[0]));
    case ExprKind::Exp:
      return Expr::exp(std::move(kids[0]));
    case ExprKind::Sqrt:
      return Expr::sqrt(std::move(kids[0]));
    default:
      return e;
  }
}

}  // namespace

Expr substitute(const Expr& e, const std::vector<Expr>& replacement) {
  if (e.kind() == ExprKind::Var) {
    int i = e.var_index();
    if (i <= static_cast<int>(replacement.size())) return replacement[static_cast<std::size_t>(i) - 1];
    return e;
  }
  if (e.children().empty()) return e;
  std::vector<Expr> kids;
  kids.reserve(e.children().size());
  for (const auto& k : e.children()) kids.push_back(substitute(k, replacement));
  return rebuild_with(e, std::move(kids));
}

Expr shift_vars(const Expr& e, int offset) {
  if (e.kind() == ExprKind::Var) return Expr::var(e.var_index() + offset);
  if (e.children().empty()) return e;
  std::vector<Expr> kids;
  kids.reserve(e.children().size());
  for (const auto& k : e.children()) kids.push_back(shift_vars(k, offset));
  return rebuild_with(e, std::move(kids));
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

namespace {

std::string render_float(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  std::string s(buf);
  // ensure it re-lexes as a decimal literal, not an integer
  if (s.find_first_of(".eE") == std::string::npos) s += ".0";
  return s;
}

}  // namespace

std::string render(const Expr& e) {
  switch (e.kind()) {
    case ExprKind::Const: {
      const Rational& r = e.rational_value();
      std::string s = rational_to_string(r);
      if (r < 0 || !is_integer(r)) return "(" + s + ")";
      return s;
    }
    case ExprKind::FloatConst: {
      double v = e.float_value();
      std::string s = render_float(v);
      if (v < 0) return "(" + s + ")";
      return s;
    }
    case ExprKind::Var:
      return "x" + std::to_string(e.var_index());
    case ExprKind::Add: {
      std::string s;
      for (std::size_t i = 0; i < e.children().size(); ++i) {
        if (i) s += " + ";
        s += render(e.children()[i]);
      }
      return "(" + s + ")";
    }
    case ExprKind::Mul: {
      std::string s;
      for (std::size_t i = 0; i < e.children().size(); ++i) {
        if (i) s += "*";
        s += render(e.children()[i]);
      }
      return "(" + s + ")";
    }
    case ExprKind::Neg:
      return "(-" + render(e.children()[0]) + ")";
    case ExprKind::Div:
      return "(" + render(e.children()[0]) + "/" + render(e.children()[1]) + ")";
    case ExprKind::IntPow:
      return "(" + render(e.children()[0]) + "^(" + std::to_string(e.int_exponent()) + "))";
    case ExprKind::RealPow:
      return "(" + render(e.children()[0]) + "^(" + rational_to_string(e.real_exponent()) + "))";
    case ExprKind::Sin:
      return "sin(" + render(e.children()[0]) + ")";
    case ExprKind::Cos:
      return "cos(" + render(e.children()[0]) + ")";
    case ExprKind::Exp:
      return "exp(" + render(e.children()[0]) + ")";
    case ExprKind::Sqrt:
      return "sqrt(" + render(e.children()[0]) + ")";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

namespace {

class Parser {
public:
  Parser(std::string_view s, int dim, bool allow_time) : s_(s), dim_(dim), allow_time_(allow_time) {}

  Expr run() {
    Expr e = parse_sum();
    skip_ws();
    if (pos_ != s_.size()) fail("unexpected trailing input");
    return e;
  }

private:
  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(pos_, msg); }

  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  bool peek(char c) {
    skip_ws();
    return pos_ < s_.size() && s_[pos_] == c;
  }

  bool accept(char c) {
    if (peek(c)) {
      ++pos_;
      return true;
    }
    return false;
  }

  Expr parse_sum() {
    Expr e = parse_product();
    for (;;) {
      if (accept('+'))
        e = e + parse_product();
      else if (accept('-'))
        e = e - parse_product();
      else
        return e;
    }
  }

  Expr parse_product() {
    Expr e = parse_unary();
    for (;;) {
      if (accept('*'))
        e = e * parse_unary();
      else if (accept('/'))
        e = e / parse_unary();
      else
        return e;
    }
  }

  Expr parse_unary() {
    if (accept('-')) return Expr::neg(parse_unary());
    if (accept('+')) return parse_unary();
    return parse_power();
  }

  Expr parse_power() {
    Expr base = parse_atom();
    if (!accept('^')) return base;
    Rational q = parse_exponent();
    if (is_integer(q)) return Expr::int_pow(base, static_cast<long>(numerator(q)));
    return Expr::real_pow(base, q);
  }

  // A bare exponent is a signed integer; '/' and '.' are only part of the
  // exponent inside parentheses, so x^3/4 means (x^3)/4 while x^(3/4) is a
  // rational power.
  Rational parse_exponent() {
    skip_ws();
    bool parens = accept('(');
    skip_ws();
    bool negative = false;
    if (accept('-'))
      negative = true;
    else
      accept('+');
    skip_ws();
    std::size_t start = pos_;
    while (pos_ < s_.size() &&
           (std::isdigit(static_cast<unsigned char>(s_[pos_])) ||
            (parens && (s_[pos_] == '.' || s_[pos_] == '/'))))
      ++pos_;
    if (pos_ == start) fail("expected numeric exponent after '^'");
    auto q = rational_from_string(std::string(s_.substr(start, pos_ - start)));
    if (!q) fail("malformed exponent");
    if (parens && !accept(')')) fail("expected ')' closing exponent");
    return negative ? Rational(-*q) : *q;
  }

  Expr parse_atom() {
    skip_ws();
    if (pos_ >= s_.size()) fail("unexpected end of input");
    char c = s_[pos_];
    if (c == '(') {
      ++pos_;
      Expr e = parse_sum();
      if (!accept(')')) fail("expected ')'");
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c))) return parse_name();
    fail(std::string("unexpected character '") + c + "'");
  }

  Expr parse_number() {
    std::size_t start = pos_;
    bool is_float = false;
    while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    if (pos_ < s_.size() && s_[pos_] == '.') {
      is_float = true;
      ++pos_;
      while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }
    if (pos_ < s_.size() && (s_[pos_] == 'e' || s_[pos_] == 'E')) {
      std::size_t mark = pos_;
      ++pos_;
      if (pos_ < s_.size() && (s_[pos_] == '+' || s_[pos_] == '-')) ++pos_;
      if (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) {
        is_float = true;
        while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
      } else {
        pos_ = mark;  // the 'e' belongs to a following name, not this literal
      }
    }
    std::string text(s_.substr(start, pos_ - start));
    if (text.empty() || text == ".") fail("malformed number");
    if (is_float) {
      return Expr::floating(std::strtod(text.c_str(), nullptr));
    }
    return Expr::constant(Rational(BigInt(text)));
  }

  Expr parse_name() {
    std::size_t start = pos_;
    while (pos_ < s_.size() && std::isalpha(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    std::string name(s_.substr(start, pos_ - start));
    if (name == "sin" || name == "cos" || name == "exp" || name == "sqrt") {
      if (!accept('(')) fail("expected '(' after function name " + name);
      Expr arg = parse_sum();
      if (!accept(')')) fail("expected ')' closing " + name);
      if (name == "sin") return Expr::sin(arg);
      if (name == "cos") return Expr::cos(arg);
      if (name == "exp") return Expr::exp(arg);
      return Expr::sqrt(arg);
    }
    if (name == "t") {
      if (!allow_time_) {
        pos_ = start;
        fail("time variable 't' is not allowed here");
      }
      return Expr::var(dim_ + 1);
    }
    if (name == "x") {
      std::size_t dstart = pos_;
      while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
      if (pos_ == dstart) {
        pos_ = start;
        fail("expected variable index after 'x'");
      }
      int idx = std::atoi(std::string(s_.substr(dstart, pos_ - dstart)).c_str());
      if (idx < 1 || idx > dim_ + (allow_time_ ? 1 : 0)) {
        pos_ = start;
        fail("variable x" + std::to_string(idx) + " out of range for dimension " +
             std::to_string(dim_));
      }
      return Expr::var(idx);
    }
    pos_ = start;
    fail("unknown name '" + name + "'");
  }

  std::string_view s_;
  std::size_t pos_ = 0;
  int dim_;
  bool allow_time_;
};

}  // namespace

Expr parse_expression(std::string_view text, int dim, bool allow_time) {
  if (dim < 1) throw std::invalid_argument("dimension must be >= 1");
  return Parser(text, dim, allow_time).run();
}

Expr operator+(const Expr& a, const Expr& b) { return Expr::add({a, b}); }
Expr operator-(const Expr& a, const Expr& b) { return Expr::add({a, Expr::neg(b)}); }
Expr operator-(const Expr& a) { return Expr::neg(a); }
Expr operator*(const Expr& a, const Expr& b) { return Expr::mul({a, b}); }
Expr operator/(const Expr& a, const Expr& b) { return Expr::div(a, b); }

// ---------------------------------------------------------------------------
// Compiled evaluation
// ---------------------------------------------------------------------------

CompiledExpr::CompiledExpr(const Expr& e) {
  max_var_ = e.max_var();
  std::map<Expr, int, ExprLess> memo;

  std::function<int(const Expr&)> emit = [&](const Expr& n) -> int {
    auto hit = memo.find(n);
    if (hit != memo.end()) return hit->second;

    auto push = [&](Ins ins) {
      program_.push_back(ins);
      return static_cast<int>(program_.size()) - 1;
    };
    // n-ary nodes fold left, matching tree evaluation (keeps 0 * overflow
    // products at 0 instead of NaN)
    auto fold = [&](Op op) {
      int acc = emit(n.children()[0]);
      for (std::size_t i = 1; i < n.children().size(); ++i) {
        int rhs = emit(n.children()[i]);
        acc = push({op, acc, rhs, 0.0, 0});
      }
      return acc;
    };

    int slot = -1;
    switch (n.kind()) {
      case ExprKind::Const:
        slot = push({Op::Const, -1, -1, to_double(n.rational_value()), 0});
        break;
      case ExprKind::FloatConst:
        slot = push({Op::Const, -1, -1, n.float_value(), 0});
        break;
      case ExprKind::Var:
        slot = push({Op::Var, -1, -1, 0.0, n.var_index()});
        break;
      case ExprKind::Add:
        slot = fold(Op::Add);
        break;
      case ExprKind::Mul:
        slot = fold(Op::Mul);
        break;
      case ExprKind::Neg:
        slot = push({Op::Neg, emit(n.children()[0]), -1, 0.0, 0});
        break;
      case ExprKind::Div: {
        int a = emit(n.children()[0]);
        int b = emit(n.children()[1]);
        slot = push({Op::Div, a, b, 0.0, 0});
        break;
      }
      case ExprKind::IntPow:
        slot = push({Op::Pow, emit(n.children()[0]), -1, static_cast<double>(n.int_exponent()), 0});
        break;
      case ExprKind::RealPow:
        slot = push({Op::Pow, emit(n.children()[0]), -1, to_double(n.real_exponent()), 0});
        break;
      case ExprKind::Sin:
        slot = push({Op::Sin, emit(n.children()[0]), -1, 0.0, 0});
        break;
      case ExprKind::Cos:
        slot = push({Op::Cos, emit(n.children()[0]), -1, 0.0, 0});
        break;
      case ExprKind::Exp:
        slot = push({Op::Exp, emit(n.children()[0]), -1, 0.0, 0});
        break;
      case ExprKind::Sqrt:
        slot = push({Op::Sqrt, emit(n.children()[0]), -1, 0.0, 0});
        break;
    }
    memo.emplace(n, slot);
    return slot;
  };
  root_ = emit(e);
}

double CompiledExpr::operator()(std::span<const double> point) const {
  thread_local std::vector<double> slots;
  slots.resize(program_.size());
  for (std::size_t i = 0; i < program_.size(); ++i) {
    const Ins& ins = program_[i];
    double v = 0;
    switch (ins.op) {
      case Op::Const:
        v = ins.value;
        break;
      case Op::Var:
        if (ins.var > static_cast<int>(point.size()))
          throw EvalError("compiled expression variable outside point dimension");
        v = point[static_cast<std::size_t>(ins.var) - 1];
        break;
      case Op::Add:
        v = slots[static_cast<std::size_t>(ins.a)] + slots[static_cast<std::size_t>(ins.b)];
        break;
      case Op::Mul:
        v = slots[static_cast<std::size_t>(ins.a)] * slots[static_cast<std::size_t>(ins.b)];
        break;
      case Op::Neg:
        v = -slots[static_cast<std::size_t>(ins.a)];
        break;
      case Op::Div:
        v = slots[static_cast<std::size_t>(ins.a)] / slots[static_cast<std::size_t>(ins.b)];
        break;
      case Op::Pow:
        v = std::pow(slots[static_cast<std::size_t>(ins.a)], ins.value);
        break;
      case Op::Sin:
        v = std::sin(slots[static_cast<std::size_t>(ins.a)]);
        break;
      case Op::Cos:
        v = std::cos(slots[static_cast<std::size_t>(ins.a)]);
        break;
      case Op::Exp:
        v = std::exp(slots[static_cast<std::size_t>(ins.a)]);
        break;
      case Op::Sqrt:
        v = std::sqrt(slots[static_cast<std::size_t>(ins.a)]);
        break;
    }
    slots[i] = v;
  }
  return root_ >= 0 ? slots[static_cast<std::size_t>(root_)] : 0.0;
}

}  // namespace liouville
