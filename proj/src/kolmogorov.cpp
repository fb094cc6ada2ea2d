#include "liouville/kolmogorov.hpp"

#include "liouville/quadrature.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <cmath>

namespace liouville {

namespace {

Eigen::MatrixXd to_double_matrix(const std::vector<std::vector<Rational>>& m) {
  const int n = static_cast<int>(m.size());
  Eigen::MatrixXd out(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) out(i, j) = to_double(m[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]);
  return out;
}

using RationalMatrix = std::vector<std::vector<Rational>>;

RationalMatrix rat_mul(const RationalMatrix& a, const RationalMatrix& b) {
  const std::size_t n = a.size();
  RationalMatrix out(n, std::vector<Rational>(n, Rational(0)));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < n; ++k) {
      if (a[i][k] == 0) continue;
      for (std::size_t j = 0; j < n; ++j) out[i][j] += a[i][k] * b[k][j];
    }
  return out;
}

bool rat_is_zero(const RationalMatrix& m) {
  for (const auto& row : m)
    for (const auto& v : row)
      if (v != 0) return false;
  return true;
}

}  // namespace

KolmogorovSpec::KolmogorovSpec(int n_, std::vector<std::vector<Rational>> A_r,
                               std::vector<std::vector<Rational>> B_r)
    : n(n_), A_rat(std::move(A_r)), B_rat(std::move(B_r)) {
  if (static_cast<int>(A_rat.size()) != n || static_cast<int>(B_rat.size()) != n)
    throw DimensionError("kolmogorov spec: matrices must be n x n");
  for (const auto& row : A_rat)
    if (static_cast<int>(row.size()) != n) throw DimensionError("kolmogorov spec: A must be n x n");
  for (const auto& row : B_rat)
    if (static_cast<int>(row.size()) != n) throw DimensionError("kolmogorov spec: B must be n x n");
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (A_rat[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] !=
          A_rat[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)])
        throw DimensionError("kolmogorov spec: A must be symmetric");
  A = to_double_matrix(A_rat);
  B = to_double_matrix(B_rat);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
  if (es.eigenvalues().minCoeff() < -1e-12)
    throw DimensionError("kolmogorov spec: A must be positive semidefinite");
}

Rational KolmogorovSpec::trace_B() const {
  Rational t(0);
  for (int i = 0; i < n; ++i) t += B_rat[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)];
  return t;
}

int KolmogorovSpec::nilpotency_index() const {
  RationalMatrix p = B_rat;
  for (int k = 1; k <= n; ++k) {
    if (rat_is_zero(p)) return k;
    p = rat_mul(p, B_rat);
  }
  return rat_is_zero(p) ? n + 1 : 0;
}

Eigen::MatrixXd matrix_exp(const Eigen::MatrixXd& B, double s) {
  const int n = static_cast<int>(B.rows());
  Eigen::MatrixXd M = -s * B;
  double norm = M.cwiseAbs().rowwise().sum().maxCoeff();  // infinity norm

  // nilpotency short-circuit: the series terminates and is exact
  {
    Eigen::MatrixXd p = B;
    int k = 1;
    for (; k <= n && p.cwiseAbs().maxCoeff() > 0; ++k) p = p * B;
    if (k <= n + 1 && p.cwiseAbs().maxCoeff() == 0.0) {
      Eigen::MatrixXd sum = Eigen::MatrixXd::Identity(n, n);
      Eigen::MatrixXd term = Eigen::MatrixXd::Identity(n, n);
      for (int j = 1; j < k; ++j) {
        term = term * M / j;
        sum += term;
      }
      return sum;
    }
  }

  int squarings = 0;
  if (norm > 0.5) squarings = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
  Eigen::MatrixXd T = M / std::pow(2.0, squarings);
  Eigen::MatrixXd sum = Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd term = Eigen::MatrixXd::Identity(n, n);
  for (int j = 1; j < 40; ++j) {
    term = term * T / j;
    sum += term;
    if (term.cwiseAbs().maxCoeff() < 1e-18 * sum.cwiseAbs().maxCoeff()) break;
  }
  for (int i = 0; i < squarings; ++i) sum = sum * sum;
  return sum;
}

Eigen::MatrixXd gram(const KolmogorovSpec& spec, double t, double abs_tol) {
  if (t <= 0) throw std::domain_error("gram matrix needs t > 0");
  const int n = spec.n;
  auto integrand = [&](double s) {
    Eigen::MatrixXd E = matrix_exp(spec.B, s);
    return Eigen::MatrixXd(E * spec.A * E.transpose());
  };

  // adaptive Gauss pair on subintervals; per-entry convergence
  struct Piece {
    double a, b;
  };
  std::vector<Piece> work{{0.0, t}};
  Eigen::MatrixXd total = Eigen::MatrixXd::Zero(n, n);
  const auto& [x7, w7] = gauss_legendre(7);
  const auto& [x15, w15] = gauss_legendre(15);
  auto rule = [&](double a, double b, const std::vector<double>& x, const std::vector<double>& w) {
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(n, n);
    double half = 0.5 * (b - a);
    for (std::size_t q = 0; q < x.size(); ++q) acc += half * w[q] * integrand(a + half * (1.0 + x[q]));
    return acc;
  };
  int budget = 4000;
  while (!work.empty()) {
    if (--budget < 0) throw NumericalError("gram matrix quadrature did not converge");
    Piece p = work.back();
    work.pop_back();
    Eigen::MatrixXd coarse = rule(p.a, p.b, x7, w7);
    Eigen::MatrixXd fine = rule(p.a, p.b, x15, w15);
    double err = (fine - coarse).cwiseAbs().maxCoeff();
    double scale = std::max(1.0, fine.cwiseAbs().maxCoeff());
    // absolute target with a relative floor so large-entry cases stay above
    // the evaluation roundoff of the embedded pair
    double target = std::max(abs_tol * (p.b - p.a) / t, 1e-13 * scale);
    if (err <= target) {
      total += fine;
    } else {
      double mid = 0.5 * (p.a + p.b);
      work.push_back({p.a, mid});
      work.push_back({mid, p.b});
    }
  }
  return 0.5 * (total + total.transpose());
}

namespace {

int kalman_rank(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  const int n = static_cast<int>(A.rows());
  Eigen::MatrixXd K(n, n * n);
  Eigen::MatrixXd block = A;
  for (int j = 0; j < n; ++j) {
    K.block(0, j * n, n, n) = block;
    block = B * block;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(K);
  const auto& sv = svd.singularValues();
  double thresh = sv.size() > 0 ? 1e-8 * sv[0] : 0.0;
  int rank = 0;
  for (int k = 0; k < sv.size(); ++k)
    if (sv[k] > thresh) ++rank;
  return rank;
}

}  // namespace

Classification classify(const KolmogorovSpec& spec) {
  Classification out;
  out.witness_t = {0.1, 1.0, 10.0};

  // Witnesses ascending. C(t) is monotone in t, so positivity certified at a
  // smaller time carries forward when a larger witness has entries so big that
  // its eigenvalue test sits below the double-precision floor.
  out.ipo_positive = true;
  bool certified = false;
  for (double t : out.witness_t) {
    Eigen::MatrixXd C = gram(spec, t);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(C);
    double min_eig = es.eigenvalues().minCoeff();
    double norm = std::max(1.0, C.cwiseAbs().maxCoeff());
    if (min_eig > 1e-10) {
      certified = true;
    } else if (!(certified && min_eig > -1e-9 * norm)) {
      out.ipo_positive = false;
    }
  }

  out.kalman_rank = kalman_rank(spec.A, spec.B);
  bool kalman_full = out.kalman_rank == spec.n;
  out.tests_agree = kalman_full == out.ipo_positive;
  if (out.tests_agree) {
    out.hypoelliptic = kalman_full;
  } else {
    out.diagnostic =
        "integral positivity and Kalman rank disagree "
        "(borderline spectrum or tolerance artifact); no verdict";
  }

  out.unimodular = spec.trace_B() == 0;

  Eigen::EigenSolver<Eigen::MatrixXd> es(spec.B);
  for (int i = 0; i < spec.n; ++i) out.eigenvalues.push_back(es.eigenvalues()[i]);
  double max_re = -std::numeric_limits<double>::infinity();
  for (const auto& ev : out.eigenvalues) max_re = std::max(max_re, ev.real());
  out.linf_liouville = max_re <= 1e-10;
  out.boundary_case = std::abs(max_re) <= 1e-10;
  if (out.boundary_case && out.diagnostic.empty())
    out.diagnostic = "spectral abscissa at the tolerance boundary - inconclusive";
  return out;
}

Operator build_operator(const KolmogorovSpec& spec) {
  const int n = spec.n;
  const int m = n + 1;
  std::vector<std::vector<Expr>> A(static_cast<std::size_t>(m),
                                   std::vector<Expr>(static_cast<std::size_t>(m), Expr::constant(0)));
  std::vector<Expr> b(static_cast<std::size_t>(m), Expr::constant(0));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j)
      A[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
          Expr::constant(spec.A_rat[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]);
    std::vector<Expr> row;
    for (int j = 0; j < n; ++j)
      row.push_back(Expr::constant(spec.B_rat[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]) *
                    Expr::var(j + 1));
    b[static_cast<std::size_t>(i)] = simplify(Expr::add(std::move(row)));
  }
  b[static_cast<std::size_t>(n)] = Expr::constant(-1);  // the -d/dt slot
  return Operator(m, std::move(A), std::move(b), /*time_flag=*/true);
}

namespace {

/// E(t') entries as exact polynomials in one variable (var index `tvar`)
/// for nilpotent B: sum_k (-t')^k B^k / k!.
std::vector<std::vector<Expr>> nilpotent_exp_exprs(const KolmogorovSpec& spec, int tvar, int index) {
  const int n = spec.n;
  std::vector<std::vector<Expr>> E(static_cast<std::size_t>(n),
                                   std::vector<Expr>(static_cast<std::size_t>(n), Expr::constant(0)));
  RationalMatrix power(static_cast<std::size_t>(n), std::vector<Rational>(static_cast<std::size_t>(n), Rational(0)));
  for (int i = 0; i < n; ++i) power[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)] = 1;
  Rational factorial(1);
  for (int k = 0; k < index; ++k) {
    if (k > 0) factorial *= k;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        Rational c = power[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] / factorial;
        if (c == 0) continue;
        Rational sign = (k % 2 == 0) ? Rational(1) : Rational(-1);
        Expr term = Expr::constant(sign * c) *
                    (k == 0 ? Expr::constant(1) : Expr::int_pow(Expr::var(tvar), k));
        E[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
            E[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] + term;
      }
    power = rat_mul(power, spec.B_rat);
  }
  for (auto& row : E)
    for (auto& e : row) e = simplify(e);
  return E;
}

/// E(t') from the spectral decomposition: for each distinct eigenvalue
/// cluster, exp(-t'B) = sum exp(-t'lambda) P_lambda with Lagrange projectors,
/// conjugate pairs combined into exp * cos/sin with real coefficients.
std::optional<std::vector<std::vector<Expr>>> spectral_exp_exprs(const KolmogorovSpec& spec, int tvar) {
  const int n = spec.n;
  Eigen::EigenSolver<Eigen::MatrixXd> es(spec.B);
  if (es.info() != Eigen::Success) return std::nullopt;

  std::vector<std::complex<double>> distinct;
  for (int i = 0; i < n; ++i) {
    std::complex<double> ev = es.eigenvalues()[i];
    bool found = false;
    for (const auto& d : distinct)
      if (std::abs(d - ev) < 1e-9 * (1.0 + std::abs(ev))) found = true;
    if (!found) distinct.push_back(ev);
  }

  Eigen::MatrixXcd Bc = spec.B.cast<std::complex<double>>();
  Eigen::MatrixXcd I = Eigen::MatrixXcd::Identity(n, n);
  std::vector<Eigen::MatrixXcd> projectors;
  for (const auto& lam : distinct) {
    Eigen::MatrixXcd P = I;
    for (const auto& mu : distinct) {
      if (&mu == &lam) continue;
      P = P * (Bc - mu * I) / (lam - mu);
    }
    projectors.push_back(P);
  }

  // reconstruction check: fails for defective B
  for (double s : {0.3, 1.0, 2.7}) {
    Eigen::MatrixXcd sum = Eigen::MatrixXcd::Zero(n, n);
    for (std::size_t k = 0; k < distinct.size(); ++k)
      sum += std::exp(-s * distinct[k]) * projectors[k];
    Eigen::MatrixXd err = (sum.real() - matrix_exp(spec.B, s)).cwiseAbs();
    if (err.maxCoeff() > 1e-8) return std::nullopt;
  }

  std::vector<std::vector<Expr>> E(static_cast<std::size_t>(n),
                                   std::vector<Expr>(static_cast<std::size_t>(n), Expr::constant(0)));
  std::vector<bool> used(distinct.size(), false);
  Expr t = Expr::var(tvar);
  for (std::size_t k = 0; k < distinct.size(); ++k) {
    if (used[k]) continue;
    used[k] = true;
    const auto lam = distinct[k];
    if (std::abs(lam.imag()) < 1e-12) {
      // real eigenvalue: exp(-t lambda) * P
      Expr factor = Expr::exp(Expr::floating(-lam.real()) * t);
      if (std::abs(lam.real()) < 1e-300) factor = Expr::constant(1);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          double p = projectors[k](i, j).real();
          if (p == 0.0) continue;
          E[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
              E[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] + Expr::floating(p) * factor;
        }
    } else {
      // conjugate pair: 2 e^{-t a} (cos(t b) Re P + sin(t b) Im P)
      std::size_t mate = k;
      for (std::size_t m2 = k + 1; m2 < distinct.size(); ++m2)
        if (!used[m2] && std::abs(distinct[m2] - std::conj(lam)) < 1e-9 * (1.0 + std::abs(lam))) {
          mate = m2;
          break;
        }
      if (mate == k) return std::nullopt;  // unpaired complex eigenvalue
      used[mate] = true;
      double a = lam.real(), b = lam.imag();
      Expr decay = Expr::exp(Expr::floating(-a) * t);
      Expr cosb = Expr::cos(Expr::floating(b) * t);
      Expr sinb = Expr::sin(Expr::floating(b) * t);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          double re = projectors[k](i, j).real();
          double im = projectors[k](i, j).imag();
          Expr term = Expr::floating(2.0) * decay * (Expr::floating(re) * cosb + Expr::floating(im) * sinb);
          E[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
              E[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] + term;
        }
    }
  }
  for (auto& row : E)
    for (auto& e : row) e = simplify(e);
  return E;
}

GroupLaw law_from_exp_exprs(const KolmogorovSpec& spec, const std::vector<std::vector<Expr>>& E_right,
                            const std::vector<std::vector<Expr>>& E_inv) {
  const int n = spec.n;
  const int m = n + 1;
  // left factor x = vars 1..m, right factor x' = vars m+1..2m; t' = var 2m
  std::vector<Expr> compose;
  for (int i = 0; i < n; ++i) {
    Expr acc = Expr::var(m + i + 1);
    for (int j = 0; j < n; ++j)
      acc = acc + E_right[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] * Expr::var(j + 1);
    compose.push_back(simplify(acc));
  }
  compose.push_back(simplify(Expr::var(m) + Expr::var(2 * m)));

  // inverse(x, t) = (-E(-t) x, -t); E_inv contains the entries of E(-t)
  std::vector<Expr> inverse;
  for (int i = 0; i < n; ++i) {
    std::vector<Expr> terms;
    for (int j = 0; j < n; ++j)
      terms.push_back(Expr::neg(E_inv[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] * Expr::var(j + 1)));
    inverse.push_back(simplify(Expr::add(std::move(terms))));
  }
  inverse.push_back(simplify(Expr::neg(Expr::var(m))));
  return make_symbolic_law(m, std::move(compose), std::move(inverse));
}

}  // namespace

BuiltGroup build_group(const KolmogorovSpec& spec) {
  const int n = spec.n;
  const int m = n + 1;

  int nil = spec.nilpotency_index();
  if (nil > 0) {
    // E(t') with t' = last variable of the right slot (var 2m); E(-t) for the
    // inverse with t = var m.
    auto E_right = nilpotent_exp_exprs(spec, 2 * m, nil);
    auto E_neg = nilpotent_exp_exprs(spec, m, nil);
    std::vector<Expr> neg_t{Expr::neg(Expr::var(m))};
    std::vector<Expr> repl;
    for (int k = 1; k < m; ++k) repl.push_back(Expr::var(k));
    repl.push_back(Expr::neg(Expr::var(m)));
    for (auto& row : E_neg)
      for (auto& e : row) e = simplify(substitute(e, repl));
    return {law_from_exp_exprs(spec, E_right, E_neg), GroupLawPath::Polynomial,
            "nilpotent drift matrix: exact polynomial law"};
  }

  if (auto E_sym = spectral_exp_exprs(spec, 2 * m)) {
    // substitute t' -> -t (var m) for the inverse block
    std::vector<Expr> repl;
    for (int k = 1; k < 2 * m; ++k) repl.push_back(k == m ? Expr::neg(Expr::var(m)) : Expr::var(k));
    repl.push_back(Expr::neg(Expr::var(m)));
    auto E_inv = *E_sym;
    for (auto& row : E_inv)
      for (auto& e : row) e = simplify(substitute(e, repl));
    return {law_from_exp_exprs(spec, *E_sym, E_inv), GroupLawPath::EntireSymbolic,
            "diagonalizable drift matrix: exact exp/sin/cos law with float spectral data"};
  }

  // defective spectrum: numeric closures, sampled verification only
  Eigen::MatrixXd B = spec.B;
  auto compose_fn = [B, n](std::span<const double> a, std::span<const double> b, std::span<double> out) {
    Eigen::Map<const Eigen::VectorXd> xa(a.data(), n + 1), xb(b.data(), n + 1);
    Eigen::MatrixXd E = matrix_exp(B, xb[n]);
    Eigen::VectorXd head = xb.head(n) + E * xa.head(n);
    for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = head[i];
    out[static_cast<std::size_t>(n)] = xa[n] + xb[n];
  };
  auto inverse_fn = [B, n](std::span<const double> x, std::span<double> out) {
    Eigen::Map<const Eigen::VectorXd> xv(x.data(), n + 1);
    Eigen::MatrixXd E = matrix_exp(B, -xv[n]);
    Eigen::VectorXd head = -(E * xv.head(n));
    for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = head[i];
    out[static_cast<std::size_t>(n)] = -xv[n];
    return true;
  };
  return {make_closure_law(m, compose_fn, inverse_fn), GroupLawPath::NumericClosure,
          "defective drift matrix: numeric-closure law (sampled verification only)"};
}

}  // namespace liouville
