#include "liouville/fields.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <random>
#include <set>

namespace liouville {

VectorField::VectorField(int dimension, std::vector<Expr> c) : dim(dimension), coeffs(std::move(c)) {
  if (static_cast<int>(coeffs.size()) != dim)
    throw DimensionError("vector field needs one coefficient per coordinate");
}

bool VectorField::is_zero() const {
  for (const auto& c : coeffs)
    if (!c.is_zero()) return false;
  return true;
}

Eigen::VectorXd VectorField::at(std::span<const double> point) const {
  Eigen::VectorXd v(dim);
  for (int k = 0; k < dim; ++k) v[k] = eval(coeffs[static_cast<std::size_t>(k)], point);
  return v;
}

Expr VectorField::apply(const Expr& u) const {
  std::vector<Expr> terms;
  for (int k = 0; k < dim; ++k) terms.push_back(coeffs[static_cast<std::size_t>(k)] * diff(u, k + 1));
  return simplify(Expr::add(std::move(terms)));
}

int field_compare(const VectorField& a, const VectorField& b) {
  if (a.dim != b.dim) return a.dim < b.dim ? -1 : 1;
  for (int k = 0; k < a.dim; ++k) {
    int c = struct_compare(a.coeffs[static_cast<std::size_t>(k)], b.coeffs[static_cast<std::size_t>(k)]);
    if (c != 0) return c;
  }
  return 0;
}

VectorField lie_bracket(const VectorField& X, const VectorField& Y) {
  if (X.dim != Y.dim) throw DimensionError("lie_bracket: dimension mismatch");
  const int n = X.dim;
  std::vector<Expr> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    std::vector<Expr> terms;
    for (int j = 0; j < n; ++j) {
      const auto js = static_cast<std::size_t>(j);
      const auto ks = static_cast<std::size_t>(k);
      terms.push_back(X.coeffs[js] * diff(Y.coeffs[ks], j + 1));
      terms.push_back(Expr::neg(Y.coeffs[js] * diff(X.coeffs[ks], j + 1)));
    }
    out.push_back(simplify(Expr::add(std::move(terms))));
  }
  return VectorField(n, std::move(out));
}

Operator::Operator(int dim, std::vector<std::vector<Expr>> A, std::vector<Expr> b, bool time_flag)
    : dim_(dim), A_(std::move(A)), b_(std::move(b)), time_flag_(time_flag) {
  if (static_cast<int>(A_.size()) != dim_ || static_cast<int>(b_.size()) != dim_)
    throw DimensionError("operator: A must be dim x dim and b of length dim");
  for (auto& row : A_) {
    if (static_cast<int>(row.size()) != dim_)
      throw DimensionError("operator: A must be dim x dim");
    for (auto& e : row) e = simplify(e);
  }
  for (auto& e : b_) e = simplify(e);
  for (int i = 0; i < dim_; ++i)
    for (int j = i + 1; j < dim_; ++j)
      if (!struct_equal(A_[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)],
                        A_[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)]))
        throw DimensionError("operator: A must be symmetric (entry " + std::to_string(i + 1) + "," +
                             std::to_string(j + 1) + ")");
}

Eigen::MatrixXd Operator::A_at(std::span<const double> point) const {
  Eigen::MatrixXd m(dim_, dim_);
  for (int i = 0; i < dim_; ++i)
    for (int j = 0; j < dim_; ++j) m(i, j) = eval(A(i, j), point);
  return m;
}

Eigen::VectorXd Operator::b_at(std::span<const double> point) const {
  Eigen::VectorXd v(dim_);
  for (int i = 0; i < dim_; ++i) v[i] = eval(b_[static_cast<std::size_t>(i)], point);
  return v;
}

bool Operator::polynomial_coefficients() const {
  for (const auto& row : A_)
    for (const auto& e : row)
      if (!polynomial_degree(e)) return false;
  for (const auto& e : b_)
    if (!polynomial_degree(e)) return false;
  return true;
}

Expr apply_operator(const Operator& L, const Expr& u) {
  const int n = L.dim();
  std::vector<Expr> grad;
  for (int j = 0; j < n; ++j) grad.push_back(diff(u, j + 1));
  std::vector<Expr> terms;
  for (int i = 0; i < n; ++i) {
    std::vector<Expr> flux_terms;
    for (int j = 0; j < n; ++j) flux_terms.push_back(L.A(i, j) * grad[static_cast<std::size_t>(j)]);
    terms.push_back(diff(simplify(Expr::add(std::move(flux_terms))), i + 1));
    terms.push_back(L.b()[static_cast<std::size_t>(i)] * grad[static_cast<std::size_t>(i)]);
  }
  return simplify(Expr::add(std::move(terms)));
}

Expr apply_adjoint(const Operator& L, const Expr& phi) {
  const int n = L.dim();
  std::vector<Expr> grad;
  for (int j = 0; j < n; ++j) grad.push_back(diff(phi, j + 1));
  std::vector<Expr> terms;
  for (int i = 0; i < n; ++i) {
    std::vector<Expr> flux_terms;
    for (int j = 0; j < n; ++j) flux_terms.push_back(L.A(i, j) * grad[static_cast<std::size_t>(j)]);
    terms.push_back(diff(simplify(Expr::add(std::move(flux_terms))), i + 1));
    terms.push_back(Expr::neg(L.b()[static_cast<std::size_t>(i)] * grad[static_cast<std::size_t>(i)]));
    terms.push_back(Expr::neg(diff(L.b()[static_cast<std::size_t>(i)], i + 1) * phi));
  }
  return simplify(Expr::add(std::move(terms)));
}

Expr a_gradient_sq(const Operator& L, const Expr& u) {
  const int n = L.dim();
  std::vector<Expr> grad;
  for (int j = 0; j < n; ++j) grad.push_back(diff(u, j + 1));
  std::vector<Expr> terms;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      terms.push_back(L.A(i, j) * grad[static_cast<std::size_t>(i)] * grad[static_cast<std::size_t>(j)]);
  return simplify(Expr::add(std::move(terms)));
}

Expr chain_rule_residual(const Operator& L, const Expr& F, const Expr& u) {
  if (F.max_var() > 1) throw DimensionError("chain_rule_residual: F must be univariate (in x1)");
  Expr Fu = simplify(substitute(F, {u}));
  Expr dF = diff(F, 1);
  Expr d2F = diff(dF, 1);
  Expr dFu = simplify(substitute(dF, {u}));
  Expr d2Fu = simplify(substitute(d2F, {u}));
  Expr lhs = apply_operator(L, Fu);
  Expr rhs = dFu * apply_operator(L, u) + d2Fu * a_gradient_sq(L, u);
  return simplify(lhs - rhs);
}

std::vector<VectorField> column_fields(const Operator& L) {
  std::vector<VectorField> out;
  const int n = L.dim();
  for (int j = 0; j < n; ++j) {
    std::vector<Expr> coeffs;
    for (int k = 0; k < n; ++k) coeffs.push_back(L.A(k, j));
    VectorField f(n, std::move(coeffs));
    if (!f.is_zero()) out.push_back(std::move(f));
  }
  return out;
}

VectorField drift_field(const Operator& L) { return VectorField(L.dim(), L.b()); }

std::vector<VectorField> hormander_generators(const Operator& L) {
  std::vector<VectorField> fields = column_fields(L);
  VectorField X0 = drift_field(L);
  if (!X0.is_zero()) fields.push_back(std::move(X0));
  return fields;
}

HormanderReport hormander_check(const std::vector<VectorField>& fields,
                                const std::vector<Eigen::VectorXd>& points, int max_depth) {
  if (fields.empty()) throw DimensionError("hormander_check: no fields");
  if (max_depth < 1) throw DimensionError("hormander_check: max_depth must be >= 1");
  if (points.empty()) throw DimensionError("hormander_check: empty sample set");
  const int n = fields.front().dim;
  for (const auto& f : fields)
    if (f.dim != n) throw DimensionError("hormander_check: dimension mismatch among fields");

  constexpr std::size_t kMaxFields = 256;

  auto cmp = [](const VectorField& a, const VectorField& b) { return field_compare(a, b) < 0; };
  std::set<VectorField, decltype(cmp)> seen(cmp);

  // generated[len] holds bracket words of that length
  std::vector<std::vector<VectorField>> generated(static_cast<std::size_t>(max_depth) + 1);
  std::vector<VectorField> all;
  for (const auto& f : fields) {
    VectorField s(n, f.coeffs);
    for (auto& c : s.coeffs) c = simplify(c);
    if (s.is_zero()) continue;
    if (seen.insert(s).second) {
      generated[1].push_back(s);
      all.push_back(s);
    }
  }

  for (int len = 2; len <= max_depth && all.size() < kMaxFields; ++len) {
    for (int i = 1; i <= len / 2 && all.size() < kMaxFields; ++i) {
      int j = len - i;
      for (const auto& X : generated[static_cast<std::size_t>(i)]) {
        for (const auto& Y : generated[static_cast<std::size_t>(j)]) {
          if (all.size() >= kMaxFields) break;
          if (i == j && field_compare(X, Y) >= 0) continue;  // [X,X]=0, [Y,X]=-[X,Y]
          VectorField br = lie_bracket(X, Y);
          if (br.is_zero()) continue;
          if (seen.insert(br).second) {
            generated[static_cast<std::size_t>(len)].push_back(br);
            all.push_back(br);
          }
        }
      }
    }
  }

  HormanderReport report;
  report.dim = n;
  report.max_depth = max_depth;
  report.generated_fields = static_cast<int>(all.size());
  report.note = "pointwise sampled rank; density of the full-rank set is not certified";

  std::vector<CompiledExpr> compiled;
  compiled.reserve(all.size() * static_cast<std::size_t>(n));
  for (const auto& f : all)
    for (const auto& c : f.coeffs) compiled.emplace_back(c);

  for (std::size_t p = 0; p < points.size(); ++p) {
    std::span<const double> pt(points[p].data(), static_cast<std::size_t>(points[p].size()));
    Eigen::MatrixXd M(static_cast<int>(all.size()), n);
    for (std::size_t f = 0; f < all.size(); ++f)
      for (int k = 0; k < n; ++k)
        M(static_cast<int>(f), k) = compiled[f * static_cast<std::size_t>(n) + static_cast<std::size_t>(k)](pt);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(M);
    const auto& sv = svd.singularValues();
    double thresh = sv.size() > 0 ? 1e-8 * sv[0] : 0.0;
    int rank = 0;
    for (int k = 0; k < sv.size(); ++k)
      if (sv[k] > thresh) ++rank;
    report.ranks.push_back(rank);
    if (rank < n) report.deficient_points.push_back(static_cast<int>(p));
  }
  report.full_rank = report.deficient_points.empty();
  return report;
}

OperatorHypothesisReport operator_hypothesis_report(const Operator& L, int samples, unsigned seed) {
  OperatorHypothesisReport rep;
  rep.symmetric = true;  // enforced by the constructor
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  double min_eig = std::numeric_limits<double>::infinity();
  for (int s = 0; s < samples; ++s) {
    std::vector<double> pt(static_cast<std::size_t>(L.dim()));
    for (auto& x : pt) x = u(rng);
    Eigen::MatrixXd A = L.A_at(pt);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (A + A.transpose()));
    min_eig = std::min(min_eig, es.eigenvalues().minCoeff());
  }
  rep.min_eigenvalue = min_eig;
  rep.psd_sampled = min_eig >= -1e-10;
  std::vector<double> origin(static_cast<std::size_t>(L.dim()), 0.0);
  rep.trace_at_origin = L.A_at(origin).trace();
  rep.trace_positive = rep.trace_at_origin > 0.0;
  return rep;
}

}  // namespace liouville
