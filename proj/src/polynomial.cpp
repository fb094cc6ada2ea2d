#include "liouville/polynomial.hpp"

#include <algorithm>
#include <numeric>

namespace liouville {

namespace {

void trim(Polynomial::Mono& m) {
  while (!m.empty() && m.back() == 0) m.pop_back();
}

Polynomial::Mono mono_mul(const Polynomial::Mono& a, const Polynomial::Mono& b) {
  Polynomial::Mono out(std::max(a.size(), b.size()), 0);
  for (std::size_t i = 0; i < a.size(); ++i) out[i] += a[i];
  for (std::size_t i = 0; i < b.size(); ++i) out[i] += b[i];
  return out;
}

long mono_degree(const Polynomial::Mono& m) {
  long d = 0;
  for (auto e : m) d += e;
  return d;
}

}  // namespace

void Polynomial::insert(const Mono& m, const Rational& c) {
  if (c == 0) return;
  Mono key = m;
  trim(key);
  auto it = terms_.find(key);
  if (it == terms_.end()) {
    terms_.emplace(std::move(key), c);
  } else {
    it->second += c;
    if (it->second == 0) terms_.erase(it);
  }
}

Polynomial Polynomial::constant(Rational c) {
  Polynomial p;
  p.insert({}, c);
  return p;
}

Polynomial Polynomial::variable(int index) {
  Polynomial p;
  Mono m(static_cast<std::size_t>(index), 0);
  m[static_cast<std::size_t>(index) - 1] = 1;
  p.insert(m, Rational(1));
  return p;
}

Polynomial Polynomial::operator+(const Polynomial& o) const {
  Polynomial out = *this;
  for (const auto& [m, c] : o.terms_) out.insert(m, c);
  return out;
}

Polynomial Polynomial::operator-(const Polynomial& o) const {
  Polynomial out = *this;
  for (const auto& [m, c] : o.terms_) out.insert(m, Rational(-c));
  return out;
}

Polynomial Polynomial::operator*(const Polynomial& o) const {
  Polynomial out;
  for (const auto& [ma, ca] : terms_)
    for (const auto& [mb, cb] : o.terms_) out.insert(mono_mul(ma, mb), Rational(ca * cb));
  return out;
}

Polynomial Polynomial::pow(unsigned k) const {
  Polynomial result = constant(Rational(1));
  Polynomial base = *this;
  while (k > 0) {
    if (k & 1u) result = result * base;
    base = base * base;
    k >>= 1u;
  }
  return result;
}

Polynomial Polynomial::scaled(const Rational& c) const {
  Polynomial out;
  if (c == 0) return out;
  for (const auto& [m, coef] : terms_) out.terms_.emplace(m, Rational(coef * c));
  return out;
}

Polynomial Polynomial::partial(int var) const {
  Polynomial out;
  const auto idx = static_cast<std::size_t>(var) - 1;
  for (const auto& [m, c] : terms_) {
    if (idx >= m.size() || m[idx] == 0) continue;
    Mono d = m;
    Rational coef = c * m[idx];
    d[idx] -= 1;
    out.insert(d, coef);
  }
  return out;
}

Polynomial Polynomial::compose(const std::vector<Polynomial>& replacement) const {
  Polynomial out;
  for (const auto& [m, c] : terms_) {
    Polynomial term = constant(c);
    for (std::size_t i = 0; i < m.size(); ++i) {
      if (m[i] == 0) continue;
      const Polynomial& arg =
          i < replacement.size() ? replacement[i] : variable(static_cast<int>(i) + 1);
      term = term * arg.pow(m[i]);
    }
    out = out + term;
  }
  return out;
}

bool Polynomial::is_constant() const {
  return terms_.empty() || (terms_.size() == 1 && terms_.begin()->first.empty());
}

Rational Polynomial::constant_value() const {
  if (terms_.empty()) return Rational(0);
  auto it = terms_.find({});
  return it == terms_.end() ? Rational(0) : it->second;
}

long Polynomial::total_degree() const {
  long d = 0;
  for (const auto& [m, c] : terms_) d = std::max(d, mono_degree(m));
  return d;
}

int Polynomial::max_var() const {
  std::size_t n = 0;
  for (const auto& [m, c] : terms_) n = std::max(n, m.size());
  return static_cast<int>(n);
}

long Polynomial::degree_in(int var) const {
  const auto idx = static_cast<std::size_t>(var) - 1;
  long d = 0;
  for (const auto& [m, c] : terms_)
    if (idx < m.size()) d = std::max(d, static_cast<long>(m[idx]));
  return d;
}

std::optional<Polynomial> Polynomial::from_expr(const Expr& e) {
  switch (e.kind()) {
    case ExprKind::Const:
      return constant(e.rational_value());
    case ExprKind::FloatConst:
      return std::nullopt;
    case ExprKind::Var:
      return variable(e.var_index());
    case ExprKind::Add: {
      Polynomial sum;
      for (const auto& c : e.children()) {
        auto p = from_expr(c);
        if (!p) return std::nullopt;
        sum = sum + *p;
      }
      return sum;
    }
    case ExprKind::Mul: {
      Polynomial prod = constant(Rational(1));
      for (const auto& c : e.children()) {
        auto p = from_expr(c);
        if (!p) return std::nullopt;
        prod = prod * *p;
      }
      return prod;
    }
    case ExprKind::Neg: {
      auto p = from_expr(e.children()[0]);
      if (!p) return std::nullopt;
      return p->scaled(Rational(-1));
    }
    case ExprKind::Div: {
      auto num = from_expr(e.children()[0]);
      auto den = from_expr(e.children()[1]);
      if (!num || !den || !den->is_constant()) return std::nullopt;
      Rational d = den->constant_value();
      if (d == 0) return std::nullopt;
      return num->scaled(Rational(1) / d);
    }
    case ExprKind::IntPow: {
      auto base = from_expr(e.children()[0]);
      if (!base) return std::nullopt;
      long k = e.int_exponent();
      if (k >= 0) return base->pow(static_cast<unsigned>(k));
      if (!base->is_constant() || base->constant_value() == 0) return std::nullopt;
      Rational c = base->constant_value();
      Rational inv = Rational(1) / c;
      Rational out(1);
      for (long i = 0; i < -k; ++i) out *= inv;
      return constant(out);
    }
    case ExprKind::RealPow: {
      auto base = from_expr(e.children()[0]);
      if (!base) return std::nullopt;
      const Rational& q = e.real_exponent();
      if (is_integer(q)) {
        long k = static_cast<long>(numerator(q));
        Expr as_int = Expr::int_pow(base->to_expr(), k);
        return from_expr(as_int);
      }
      if (!base->is_constant()) return std::nullopt;
      Rational c = base->constant_value();
      auto root = exact_root(c, static_cast<unsigned>(denominator(q)));
      if (!root) return std::nullopt;
      BigInt num = numerator(q);
      bool neg_exp = num < 0;
      if (neg_exp) num = -num;
      Rational out(1);
      for (BigInt i = 0; i < num; ++i) out *= *root;
      if (neg_exp) {
        if (out == 0) return std::nullopt;
        out = Rational(1) / out;
      }
      return constant(out);
    }
    case ExprKind::Sqrt: {
      return from_expr(Expr::real_pow(e.children()[0], Rational(1, 2)));
    }
    case ExprKind::Sin:
    case ExprKind::Cos:
    case ExprKind::Exp: {
      auto arg = from_expr(e.children()[0]);
      if (!arg || !arg->is_constant() || arg->constant_value() != 0) return std::nullopt;
      if (e.kind() == ExprKind::Sin) return zero();
      return constant(Rational(1));
    }
  }
  return std::nullopt;
}

Expr Polynomial::to_expr() const {
  if (terms_.empty()) return Expr::constant(0);

  std::vector<const std::pair<const Mono, Rational>*> order;
  order.reserve(terms_.size());
  for (const auto& t : terms_) order.push_back(&t);
  std::sort(order.begin(), order.end(), [](const auto* a, const auto* b) {
    long da = mono_degree(a->first), db = mono_degree(b->first);
    if (da != db) return da < db;
    return a->first < b->first;
  });

  std::vector<Expr> terms;
  for (const auto* t : order) {
    const auto& [m, c] = *t;
    std::vector<Expr> factors;
    if (c != 1 || m.empty()) factors.push_back(Expr::constant(c));
    for (std::size_t i = 0; i < m.size(); ++i) {
      if (m[i] == 0) continue;
      Expr v = Expr::var(static_cast<int>(i) + 1);
      factors.push_back(m[i] == 1 ? v : Expr::int_pow(v, m[i]));
    }
    terms.push_back(factors.size() == 1 ? factors[0] : Expr::mul(std::move(factors)));
  }
  return terms.size() == 1 ? terms[0] : Expr::add(std::move(terms));
}

}  // namespace liouville
