#include "liouville/dilation.hpp"

#include "liouville/polynomial.hpp"

#include <cmath>
#include <random>

namespace liouville {

Dilation::Dilation(std::vector<Rational> sigma) : sigma_(std::move(sigma)) {
  if (sigma_.empty()) throw std::invalid_argument("dilation needs at least one exponent");
  for (std::size_t j = 0; j < sigma_.size(); ++j) {
    if (sigma_[j] < 1) throw std::invalid_argument("dilation exponents must be >= 1");
    if (j > 0 && sigma_[j] < sigma_[j - 1])
      throw std::invalid_argument("dilation exponents must be nondecreasing");
  }
  for (const auto& s : sigma_) {
    sigma_d_.push_back(to_double(s));
    inv_sigma_d_.push_back(to_double(Rational(1) / s));
  }
}

Rational Dilation::Q() const {
  Rational q(0);
  for (const auto& s : sigma_) q += s;
  return q;
}

Eigen::VectorXd Dilation::apply(double lambda, std::span<const double> x) const {
  if (lambda <= 0) throw std::domain_error("dilation parameter must be positive");
  if (x.size() != sigma_.size()) throw DimensionError("dilation: point dimension mismatch");
  Eigen::VectorXd out(static_cast<int>(x.size()));
  for (std::size_t j = 0; j < x.size(); ++j)
    out[static_cast<int>(j)] = std::pow(lambda, sigma_d_[j]) * x[j];
  return out;
}

double Dilation::homogeneous_norm(std::span<const double> x) const {
  if (x.size() != sigma_.size()) throw DimensionError("homogeneous norm: point dimension mismatch");
  double s = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) s += std::pow(std::abs(x[j]), inv_sigma_d_[j]);
  return s;
}

Dilation Dilation::heat_lift() const {
  std::vector<Rational> s = sigma_;
  s.push_back(Rational(2));
  return Dilation(std::move(s));
}

namespace {

bool integer_exponents(const Dilation& d) {
  for (const auto& s : d.sigma())
    if (!is_integer(s)) return false;
  return true;
}

/// lambda^{sigma_j} x_j with lambda as the symbolic variable lambda_var.
std::vector<Expr> symbolic_dilation(const Dilation& d, int lambda_var, int var_offset) {
  std::vector<Expr> out;
  for (int j = 0; j < d.dim(); ++j) {
    long s = static_cast<long>(numerator(d.sigma()[static_cast<std::size_t>(j)]));
    out.push_back(Expr::int_pow(Expr::var(lambda_var), s) * Expr::var(var_offset + j + 1));
  }
  return out;
}

std::span<const double> as_span(const Eigen::VectorXd& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

}  // namespace

DilationCheck automorphism_check(const Dilation& d, const GroupLaw& G, unsigned seed) {
  if (d.dim() != G.dim) throw DimensionError("automorphism_check: dimension mismatch");
  const int n = d.dim();
  DilationCheck check;

  if (G.polynomial() && integer_exponents(d)) {
    const int lambda_var = 2 * n + 1;
    std::vector<Expr> dl_x = symbolic_dilation(d, lambda_var, 0);
    std::vector<Expr> dl_y = symbolic_dilation(d, lambda_var, n);
    std::vector<Expr> repl = dl_x;
    repl.insert(repl.end(), dl_y.begin(), dl_y.end());
    bool ok = true;
    for (int k = 0; k < n && ok; ++k) {
      long s = static_cast<long>(numerator(d.sigma()[static_cast<std::size_t>(k)]));
      Expr lhs = Expr::int_pow(Expr::var(lambda_var), s) * G.compose[static_cast<std::size_t>(k)];
      Expr rhs = substitute(G.compose[static_cast<std::size_t>(k)], repl);
      ok = simplify(lhs - rhs).is_zero();
    }
    check.exact = true;
    check.pass = ok;
    check.residual = ok ? 0.0 : 1.0;
    check.note = "polynomial identity in (x, y, lambda)";
    return check;
  }

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst = 0.0;
  for (int s = 0; s < 200; ++s) {
    Eigen::VectorXd x(n), y(n);
    for (int k = 0; k < n; ++k) {
      x[k] = u(rng);
      y[k] = u(rng);
    }
    for (double lambda : {0.5, 1.0, 2.0, 5.0}) {
      Eigen::VectorXd lhs = d.apply(lambda, as_span(G.compose_at(as_span(x), as_span(y))));
      Eigen::VectorXd dx = d.apply(lambda, as_span(x));
      Eigen::VectorXd dy = d.apply(lambda, as_span(y));
      Eigen::VectorXd rhs = G.compose_at(as_span(dx), as_span(dy));
      worst = std::max(worst, (lhs - rhs).cwiseAbs().maxCoeff());
    }
  }
  check.exact = false;
  check.residual = worst;
  check.pass = worst <= 1e-9;
  check.note = "sampled over 200 pairs, lambda in {1/2, 1, 2, 5}";
  return check;
}

namespace {

/// P1 == lambda^m * P2 as polynomials, where lambda is the last variable.
std::optional<long> polynomial_degree_shift(const Polynomial& P1, const Polynomial& P2, int lambda_var) {
  if (P2.is_zero()) return std::nullopt;
  const auto& t1 = P1.terms();
  const auto& t2 = P2.terms();
  if (t1.size() != t2.size()) return std::nullopt;
  auto lambda_exp = [&](const Polynomial::Mono& m) -> long {
    const auto idx = static_cast<std::size_t>(lambda_var) - 1;
    return idx < m.size() ? static_cast<long>(m[idx]) : 0;
  };
  auto it1 = t1.begin();
  auto it2 = t2.begin();
  long m = lambda_exp(it1->first) - lambda_exp(it2->first);
  for (; it1 != t1.end(); ++it1, ++it2) {
    if (it1->second != it2->second) return std::nullopt;
    Polynomial::Mono m1 = it1->first, m2 = it2->first;
    if (lambda_exp(m1) - lambda_exp(m2) != m) return std::nullopt;
    const auto idx = static_cast<std::size_t>(lambda_var) - 1;
    if (m1.size() <= idx) m1.resize(idx + 1, 0);
    if (m2.size() <= idx) m2.resize(idx + 1, 0);
    m1[idx] = 0;
    m2[idx] = 0;
    if (m1 != m2) return std::nullopt;
  }
  return m;
}

}  // namespace

std::optional<Rational> homogeneity_degree(const Operator& L, const Dilation& d, unsigned seed) {
  if (L.dim() != d.dim()) throw DimensionError("homogeneity_degree: dimension mismatch");
  const int n = L.dim();
  std::vector<Expr> basis = monomial_basis(n, 3);

  if (L.polynomial_coefficients() && integer_exponents(d)) {
    const int lambda_var = n + 1;
    std::vector<Expr> delta = symbolic_dilation(d, lambda_var, 0);
    std::optional<long> degree;
    for (const auto& u : basis) {
      Expr v = simplify(substitute(u, delta));       // u(delta_lambda x)
      Expr p1e = apply_operator(L, v);               // includes lambda as an inert variable
      Expr p2e = simplify(substitute(apply_operator(L, u), delta));
      auto P1 = Polynomial::from_expr(p1e);
      auto P2 = Polynomial::from_expr(p2e);
      if (!P1 || !P2) return std::nullopt;
      if (P2->is_zero()) {
        if (!P1->is_zero()) return std::nullopt;
        continue;
      }
      auto m = polynomial_degree_shift(*P1, *P2, lambda_var);
      if (!m) return std::nullopt;
      if (!degree)
        degree = m;
      else if (*degree != *m)
        return std::nullopt;
    }
    if (!degree) return std::nullopt;
    return Rational(*degree);
  }

  // sampled path: fit m at lambda=2, then verify across lambdas and points
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::optional<double> fitted;
  std::vector<Expr> lu;
  for (const auto& u : basis) lu.push_back(apply_operator(L, u));

  auto l_of_dilated = [&](const Expr& u, double lambda, const Eigen::VectorXd& x) {
    std::vector<Expr> repl;
    for (int j = 0; j < n; ++j)
      repl.push_back(Expr::floating(std::pow(lambda, to_double(d.sigma()[static_cast<std::size_t>(j)]))) *
                     Expr::var(j + 1));
    Expr v = simplify(substitute(u, repl));
    return eval(apply_operator(L, v), as_span(x));
  };

  for (std::size_t k = 0; k < basis.size(); ++k) {
    Eigen::VectorXd x(n);
    for (int j = 0; j < n; ++j) x[j] = dist(rng) + 1.5;  // stay away from coefficient zeros
    double denom = eval(lu[k], as_span(d.apply(2.0, as_span(x))));
    if (std::abs(denom) < 1e-6) continue;
    double num = l_of_dilated(basis[k], 2.0, x);
    double m = std::log(std::abs(num / denom)) / std::log(2.0);
    double rounded = std::round(m * 12.0) / 12.0;
    if (std::abs(m - rounded) > 1e-6) return std::nullopt;
    if (!fitted)
      fitted = rounded;
    else if (std::abs(*fitted - rounded) > 1e-9)
      return std::nullopt;
  }
  if (!fitted) return std::nullopt;

  // verification sweep
  for (int s = 0; s < 25; ++s) {
    Eigen::VectorXd x(n);
    for (int j = 0; j < n; ++j) x[j] = dist(rng);
    for (double lambda : {0.5, 2.0, 5.0}) {
      for (std::size_t k = 0; k < basis.size(); ++k) {
        double lhs = l_of_dilated(basis[k], lambda, x);
        double rhs = std::pow(lambda, *fitted) * eval(lu[k], as_span(d.apply(lambda, as_span(x))));
        if (std::abs(lhs - rhs) > 1e-9 * std::max({1.0, std::abs(lhs), std::abs(rhs)}))
          return std::nullopt;
      }
    }
  }
  long num12 = static_cast<long>(std::llround(*fitted * 12.0));
  return Rational(num12, 12);
}

Rational sharp_exponent(const Rational& Q) {
  if (Q < 3) throw std::domain_error("sharp exponent needs homogeneous dimension Q >= 3");
  return 1 + Rational(2) / (Q - 2);
}

}  // namespace liouville
