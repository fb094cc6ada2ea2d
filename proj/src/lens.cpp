#include "liouville/lens.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace liouville {

namespace {

std::span<const double> as_span(const Eigen::VectorXd& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

std::vector<std::vector<int>> stencil_offsets(int dim, bool diagonals) {
  std::vector<std::vector<int>> offs;
  for (int k = 0; k < dim; ++k)
    for (int s : {1, -1}) {
      std::vector<int> o(static_cast<std::size_t>(dim), 0);
      o[static_cast<std::size_t>(k)] = s;
      offs.push_back(std::move(o));
    }
  if (diagonals) {
    for (int k = 0; k < dim; ++k)
      for (int l = k + 1; l < dim; ++l)
        for (int sk : {1, -1})
          for (int sl : {1, -1}) {
            std::vector<int> o(static_cast<std::size_t>(dim), 0);
            o[static_cast<std::size_t>(k)] = sk;
            o[static_cast<std::size_t>(l)] = sl;
            offs.push_back(std::move(o));
          }
  }
  return offs;
}

std::vector<int> shifted(const std::vector<int>& key, const std::vector<int>& off) {
  std::vector<int> out = key;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += off[i];
  return out;
}

}  // namespace

bool LensDomain::contains(std::span<const double> x) const {
  double d_plus = 0, d_minus = 0;
  for (int k = 0; k < dim; ++k) {
    double c = k == 0 ? R : 0.0;
    d_plus += (x[static_cast<std::size_t>(k)] - c) * (x[static_cast<std::size_t>(k)] - c);
    d_minus += (x[static_cast<std::size_t>(k)] + c) * (x[static_cast<std::size_t>(k)] + c);
  }
  double r2 = (R + eps) * (R + eps);
  return d_plus < r2 && d_minus < r2;
}

Eigen::VectorXd LensGrid::position(const std::vector<int>& key) const {
  Eigen::VectorXd p(dom_.dim);
  for (int k = 0; k < dom_.dim; ++k) p[k] = (key[static_cast<std::size_t>(k)] + 0.5) * h_;
  return p;
}

Eigen::VectorXd LensGrid::interior_position(long i) const { return position(interior_[static_cast<std::size_t>(i)]); }
Eigen::VectorXd LensGrid::boundary_position(long b) const { return position(boundary_[static_cast<std::size_t>(b)]); }

long LensGrid::interior_id(const std::vector<int>& key) const {
  auto it = interior_ids_.find(key);
  return it == interior_ids_.end() ? -1 : it->second;
}

long LensGrid::boundary_id(const std::vector<int>& key) const {
  auto it = boundary_ids_.find(key);
  return it == boundary_ids_.end() ? -1 : it->second;
}

LensGrid LensGrid::build(const LensDomain& dom, double h, bool need_diagonals) {
  if (dom.eps <= 0 || dom.eps >= dom.R) throw std::invalid_argument("lens needs 0 < eps < R");
  if (dom.dim < 2 || dom.dim > 3) throw std::invalid_argument("lens grid supports dimensions 2 and 3");
  LensGrid g;
  g.dom_ = dom;
  g.h_ = h;

  const double x1_max = dom.eps;
  const double perp_max = std::sqrt((dom.R + dom.eps) * (dom.R + dom.eps) - dom.R * dom.R);
  std::vector<int> lo(static_cast<std::size_t>(dom.dim)), hi(static_cast<std::size_t>(dom.dim));
  for (int k = 0; k < dom.dim; ++k) {
    double extent = k == 0 ? x1_max : perp_max;
    lo[static_cast<std::size_t>(k)] = static_cast<int>(std::floor(-extent / h)) - 2;
    hi[static_cast<std::size_t>(k)] = static_cast<int>(std::ceil(extent / h)) + 2;
  }

  std::map<std::vector<int>, int> kind;  // 0 candidate, 1 interior, 2 boundary
  std::vector<int> key = lo;
  for (;;) {
    Eigen::VectorXd p(dom.dim);
    for (int k = 0; k < dom.dim; ++k) p[k] = (key[static_cast<std::size_t>(k)] + 0.5) * h;
    if (dom.contains(as_span(p))) kind.emplace(key, 0);
    int k = 0;
    while (k < dom.dim) {
      if (++key[static_cast<std::size_t>(k)] <= hi[static_cast<std::size_t>(k)]) break;
      key[static_cast<std::size_t>(k)] = lo[static_cast<std::size_t>(k)];
      ++k;
    }
    if (k == dom.dim) break;
  }

  auto offsets = stencil_offsets(dom.dim, need_diagonals);
  for (auto& [k, v] : kind) {
    bool all_inside = true;
    for (const auto& off : offsets)
      if (!kind.count(shifted(k, off))) {
        all_inside = false;
        break;
      }
    if (all_inside) v = 1;
  }
  for (auto& [k, v] : kind) {
    if (v != 1) continue;
    for (const auto& off : offsets) {
      auto it = kind.find(shifted(k, off));
      if (it != kind.end() && it->second == 0) it->second = 2;
    }
  }

  for (const auto& [k, v] : kind) {
    if (v == 1) {
      g.interior_ids_.emplace(k, static_cast<long>(g.interior_.size()));
      g.interior_.push_back(k);
    } else if (v == 2) {
      g.boundary_ids_.emplace(k, static_cast<long>(g.boundary_.size()));
      g.boundary_.push_back(k);
    }
  }
  if (g.interior_.empty()) throw std::invalid_argument("lens grid: no interior nodes (h too large)");

  // origin functional: multilinear weights over the 2^dim cell-corner nodes
  std::vector<int> corner(static_cast<std::size_t>(dom.dim), 0);
  double w = 1.0;
  for (int k = 0; k < dom.dim; ++k) w *= 0.5;
  for (long mask = 0; mask < (1L << dom.dim); ++mask) {
    std::vector<int> ck(static_cast<std::size_t>(dom.dim));
    for (int k = 0; k < dom.dim; ++k) ck[static_cast<std::size_t>(k)] = (mask >> k) & 1 ? 0 : -1;
    long id = g.interior_id(ck);
    if (id < 0) throw std::invalid_argument("lens grid: origin cell is not interior (h too large)");
    g.origin_.emplace_back(id, w);
  }
  return g;
}

// ---------------------------------------------------------------------------
// Assembly and factorization
// ---------------------------------------------------------------------------

LensSolver::LensSolver(const Operator& L, const LensDomain& dom, double h, double reg)
    : reg_(reg) {
  if (L.dim() != dom.dim) throw DimensionError("lens solver: operator/domain dimension mismatch");
  const int n = dom.dim;

  bool diagonals = false;
  for (int i = 0; i < n && !diagonals; ++i)
    for (int j = i + 1; j < n && !diagonals; ++j)
      if (!L.A(i, j).is_zero()) diagonals = true;

  grid_ = std::make_shared<const LensGrid>(LensGrid::build(dom, h, diagonals));
  const LensGrid& g = *grid_;
  const long ni = g.interior_count();
  const long nb = g.boundary_count();

  // compiled coefficient evaluators: a_ij (+reg on the diagonal) and
  // beta_j = b_j + sum_i d_i a_ij (the divergence-form first-order part)
  std::vector<std::vector<CompiledExpr>> a(static_cast<std::size_t>(n));
  std::vector<CompiledExpr> beta;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a[static_cast<std::size_t>(i)].emplace_back(L.A(i, j));
  for (int j = 0; j < n; ++j) {
    Expr expr = L.b()[static_cast<std::size_t>(j)];
    for (int i = 0; i < n; ++i) expr = expr + diff(L.A(i, j), i + 1);
    beta.emplace_back(simplify(expr));
  }

  std::vector<Eigen::Triplet<double>> tii, tib;
  const double inv_h2 = 1.0 / (h * h);
  const double inv_h = 1.0 / h;
  m_matrix_ok_ = true;

  std::vector<int> axis_off(static_cast<std::size_t>(n), 0);
  for (long row = 0; row < ni; ++row) {
    const auto& key = g.interior_keys()[static_cast<std::size_t>(row)];
    Eigen::VectorXd x = g.interior_position(row);
    std::span<const double> xs(x.data(), static_cast<std::size_t>(n));

    Eigen::MatrixXd A(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) A(i, j) = a[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)](xs);
    for (int i = 0; i < n; ++i) A(i, i) += reg_;

    double diag = 0.0;
    auto add = [&](const std::vector<int>& nkey, double coef) {
      if (coef == 0.0) return;
      long id = g.interior_id(nkey);
      if (id >= 0) {
        tii.emplace_back(static_cast<int>(row), static_cast<int>(id), coef);
        return;
      }
      long bid = g.boundary_id(nkey);
      if (bid < 0) throw std::logic_error("lens stencil reached an unclassified node");
      tib.emplace_back(static_cast<int>(row), static_cast<int>(bid), coef);
    };

    for (int k = 0; k < n; ++k) {
      double alpha = A(k, k);
      // net axis coefficient after the tilted mixed stencils contribute their
      // -|m|/2 axis parts; must stay nonnegative for the sign structure
      double lam = alpha;
      for (int l = 0; l < n; ++l)
        if (l != k) lam -= std::abs(A(k, l));
      if (lam < -1e-12)
        throw MatrixStructureError(
            "mixed second-order coupling exceeds the diagonal diffusion at a node; "
            "increase the regularization or refine the grid");
      lam = std::max(lam, 0.0);

      double b_k = beta[static_cast<std::size_t>(k)](xs);
      std::vector<int> kp = key, km = key;
      kp[static_cast<std::size_t>(k)] += 1;
      km[static_cast<std::size_t>(k)] -= 1;

      if (std::abs(b_k) * h <= 2.0 * lam) {
        add(kp, alpha * inv_h2 + 0.5 * b_k * inv_h);
        add(km, alpha * inv_h2 - 0.5 * b_k * inv_h);
        diag -= 2.0 * alpha * inv_h2;
      } else {
        // upwind keeps the sign structure when the drift dominates
        ++upwinded_;
        add(kp, alpha * inv_h2);
        add(km, alpha * inv_h2);
        diag -= 2.0 * alpha * inv_h2;
        if (b_k > 0) {
          add(kp, b_k * inv_h);
          diag -= b_k * inv_h;
        } else {
          add(km, -b_k * inv_h);
          diag -= -b_k * inv_h;
        }
      }
    }

    // tilted stencils for the mixed terms, oriented by the coupling sign
    for (int k = 0; k < n; ++k)
      for (int l = k + 1; l < n; ++l) {
        double m = 2.0 * A(k, l);
        if (m == 0.0) continue;
        double w = std::abs(m) * 0.5 * inv_h2;
        int sl = m > 0 ? 1 : -1;
        std::vector<int> pp = key, mm = key, pm = key, mp = key;
        pp[static_cast<std::size_t>(k)] += 1;
        pp[static_cast<std::size_t>(l)] += sl;
        mm[static_cast<std::size_t>(k)] -= 1;
        mm[static_cast<std::size_t>(l)] -= sl;
        add(pp, w);
        add(mm, w);
        std::vector<int> ap = key, am = key, bp = key, bm = key;
        ap[static_cast<std::size_t>(k)] += 1;
        am[static_cast<std::size_t>(k)] -= 1;
        bp[static_cast<std::size_t>(l)] += 1;
        bm[static_cast<std::size_t>(l)] -= 1;
        add(ap, -w);
        add(am, -w);
        add(bp, -w);
        add(bm, -w);
        diag += 2.0 * w;
      }

    if (diag >= -1e-14)
      throw MatrixStructureError("degenerate node with no diffusion or drift; increase the regularization");
    tii.emplace_back(static_cast<int>(row), static_cast<int>(row), diag);
  }

  L_II_.resize(static_cast<int>(ni), static_cast<int>(ni));
  L_II_.setFromTriplets(tii.begin(), tii.end());
  L_IB_.resize(static_cast<int>(ni), static_cast<int>(nb));
  L_IB_.setFromTriplets(tib.begin(), tib.end());

  // sign-structure audit (off-diagonals nonnegative after assembly)
  for (int c = 0; c < L_II_.outerSize(); ++c)
    for (Eigen::SparseMatrix<double>::InnerIterator it(L_II_, c); it; ++it)
      if (it.row() != it.col() && it.value() < -1e-12) m_matrix_ok_ = false;

  if (dom.dim == 2) {
    lu_ = std::make_shared<Eigen::SparseLU<Eigen::SparseMatrix<double>>>();
    lu_->compute(L_II_);
    if (lu_->info() != Eigen::Success) throw MatrixStructureError("lens system is singular");
  } else {
    it_ = std::make_shared<Eigen::BiCGSTAB<Eigen::SparseMatrix<double>, Eigen::IncompleteLUT<double>>>();
    it_->preconditioner().setFillfactor(12);
    it_->preconditioner().setDroptol(1e-5);
    it_->setTolerance(1e-13);
    it_->setMaxIterations(2000);
    it_->compute(L_II_);
    if (it_->info() != Eigen::Success) throw MatrixStructureError("lens preconditioner failed");
  }
}

Eigen::VectorXd LensSolver::solve_interior(const Eigen::VectorXd& rhs) const {
  if (lu_) return lu_->solve(rhs);
  Eigen::VectorXd u = it_->solve(rhs);
  if (it_->info() != Eigen::Success) throw NumericalError("lens iterative solve did not converge");
  return u;
}

Eigen::VectorXd LensSolver::solve_interior_transpose(const Eigen::VectorXd& rhs) const {
  auto* self = const_cast<LensSolver*>(this);
  if (!L_II_t_) {
    self->L_II_t_ = std::make_shared<Eigen::SparseMatrix<double>>(L_II_.transpose());
    if (lu_) {
      self->lu_t_ = std::make_shared<Eigen::SparseLU<Eigen::SparseMatrix<double>>>();
      self->lu_t_->compute(*self->L_II_t_);
      if (self->lu_t_->info() != Eigen::Success)
        throw MatrixStructureError("lens adjoint system is singular");
    } else {
      self->it_t_ =
          std::make_shared<Eigen::BiCGSTAB<Eigen::SparseMatrix<double>, Eigen::IncompleteLUT<double>>>();
      self->it_t_->preconditioner().setFillfactor(12);
      self->it_t_->preconditioner().setDroptol(1e-5);
      self->it_t_->setTolerance(1e-13);
      self->it_t_->setMaxIterations(2000);
      self->it_t_->compute(*self->L_II_t_);
    }
  }
  if (lu_t_) return lu_t_->solve(rhs);
  Eigen::VectorXd g = it_t_->solve(rhs);
  if (it_t_->info() != Eigen::Success) throw NumericalError("lens adjoint solve did not converge");
  return g;
}

DiscreteSolution LensSolver::solve(const GridFn& f, const GridFn& phi) const {
  const LensGrid& g = *grid_;
  Eigen::VectorXd fI(g.interior_count()), phiB(g.boundary_count());
  for (long i = 0; i < g.interior_count(); ++i) {
    Eigen::VectorXd p = g.interior_position(i);
    fI[i] = f(as_span(p));
  }
  for (long b = 0; b < g.boundary_count(); ++b) {
    Eigen::VectorXd p = g.boundary_position(b);
    phiB[b] = phi(as_span(p));
  }
  Eigen::VectorXd rhs = -fI - L_IB_ * phiB;
  DiscreteSolution sol;
  sol.grid = grid_;
  sol.interior = solve_interior(rhs);
  sol.boundary = std::move(phiB);
  return sol;
}

DiscreteSolution LensSolver::solve(const Expr& f, const Expr& phi) const {
  CompiledExpr cf(f), cphi(phi);
  return solve([&cf](std::span<const double> x) { return cf(x); },
               [&cphi](std::span<const double> x) { return cphi(x); });
}

DiscreteMeasures LensSolver::extract_measures() const {
  const LensGrid& g = *grid_;
  Eigen::VectorXd w = Eigen::VectorXd::Zero(g.interior_count());
  for (const auto& [id, weight] : g.origin_weights()) w[id] = weight;
  Eigen::VectorXd green = solve_interior_transpose(w);
  DiscreteMeasures m;
  m.grid = grid_;
  m.nu = -green;
  m.mu = -(L_IB_.transpose() * green);
  return m;
}

Eigen::VectorXd LensSolver::apply_stencil(const Eigen::VectorXd& interior,
                                          const Eigen::VectorXd& boundary) const {
  return L_II_ * interior + L_IB_ * boundary;
}

DiscreteSolution solve_dirichlet(const Operator& L, const LensDomain& dom, double h, const Expr& f,
                                 const Expr& phi, double reg) {
  return LensSolver(L, dom, h, reg).solve(f, phi);
}

DiscreteMeasures extract_measures(const Operator& L, const LensDomain& dom, double h, double reg) {
  return LensSolver(L, dom, h, reg).extract_measures();
}

double representation_check(const Operator& L, const DiscreteMeasures& m, const Expr& u) {
  const LensGrid& g = *m.grid;
  CompiledExpr cu(u);
  CompiledExpr clu(apply_operator(L, u));
  std::vector<double> origin(static_cast<std::size_t>(g.dim()), 0.0);
  double acc = cu(origin);
  for (long b = 0; b < g.boundary_count(); ++b) {
    Eigen::VectorXd p = g.boundary_position(b);
    acc -= m.mu[b] * cu(as_span(p));
  }
  for (long i = 0; i < g.interior_count(); ++i) {
    Eigen::VectorXd p = g.interior_position(i);
    acc += m.nu[i] * clu(as_span(p));
  }
  return std::abs(acc);
}

TranslatedCheck translated_representation_check(const Operator& L, const GroupLaw& G,
                                                const DiscreteMeasures& m, const Expr& v,
                                                std::span<const double> x) {
  const LensGrid& g = *m.grid;
  if (G.dim != g.dim()) throw DimensionError("translated check: dimension mismatch");
  TranslatedCheck out;

  // euclidean translation keeps the grid structure exact; anything else is an
  // off-grid approximation
  bool adapted = true;
  if (G.symbolic()) {
    for (int k = 0; k < G.dim && adapted; ++k) {
      Expr expect = Expr::var(k + 1) + Expr::var(k + 1 + G.dim);
      adapted = struct_equal(simplify(G.compose[static_cast<std::size_t>(k)]), simplify(expect));
    }
  } else {
    adapted = false;
  }
  out.grid_adapted = adapted;
  out.note = adapted ? "euclidean law: exact translation structure"
                     : "law is not grid-adapted: translated check is approximate";

  CompiledExpr cv(v);
  CompiledExpr clv(apply_operator(L, v));
  double acc = cv(x);
  for (long b = 0; b < g.boundary_count(); ++b) {
    Eigen::VectorXd y = g.boundary_position(b);
    Eigen::VectorXd p = G.compose_at(x, as_span(y));
    acc -= m.mu[b] * cv(as_span(p));
  }
  for (long i = 0; i < g.interior_count(); ++i) {
    Eigen::VectorXd y = g.interior_position(i);
    Eigen::VectorXd p = G.compose_at(x, as_span(y));
    acc += m.nu[i] * clv(as_span(p));
  }
  out.residual = std::abs(acc);
  return out;
}

MaxPrincipleReport maximum_principle_check(const Operator& L, const LensDomain& dom, double h,
                                           double reg, int trials, std::uint64_t seed) {
  LensSolver solver(L, dom, h, reg);
  MaxPrincipleReport report;
  report.m_matrix_ok = solver.m_matrix();
  report.trials = trials;
  report.reg = reg;
  if (!report.m_matrix_ok) return report;

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> amp(0.0, 2.0);
  std::uniform_real_distribution<double> pos(-1.5, 1.5);
  std::uniform_real_distribution<double> width(0.3, 1.2);
  const int n = dom.dim;

  double worst = -std::numeric_limits<double>::infinity();
  for (int t = 0; t < trials; ++t) {
    struct Blob {
      std::vector<double> c;
      double a, w;
    };
    std::vector<Blob> fb, pb;
    for (int j = 0; j < 3; ++j) {
      Blob b;
      for (int k = 0; k < n; ++k) b.c.push_back(pos(rng));
      b.a = amp(rng);
      b.w = width(rng);
      fb.push_back(b);
      Blob q;
      for (int k = 0; k < n; ++k) q.c.push_back(pos(rng));
      q.a = amp(rng);
      q.w = width(rng);
      pb.push_back(q);
    }
    auto eval_blobs = [n](const std::vector<Blob>& blobs, std::span<const double> x) {
      double s = 0;
      for (const auto& b : blobs) {
        double r2 = 0;
        for (int k = 0; k < n; ++k) r2 += (x[static_cast<std::size_t>(k)] - b.c[static_cast<std::size_t>(k)]) *
                                          (x[static_cast<std::size_t>(k)] - b.c[static_cast<std::size_t>(k)]);
        s += b.a * std::exp(-r2 / (b.w * b.w));
      }
      return -s;  // nonpositive by construction
    };
    GridFn f = [&](std::span<const double> x) { return eval_blobs(fb, x); };
    GridFn phi = [&](std::span<const double> x) { return eval_blobs(pb, x); };
    DiscreteSolution sol = solver.solve(f, phi);
    worst = std::max(worst, sol.max_interior());
  }
  report.worst_interior_max = worst;
  report.pass = worst <= 1e-10;
  return report;
}

}  // namespace liouville
