#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "liouville/group.hpp"
#include "test_helpers.hpp"

#include <random>

using namespace liouville;
using namespace liouville::testing;

TEST_CASE("euclidean law passes all axioms exactly") {
  GroupLaw G = euclidean_group(3);
  auto report = verify_axioms(G);
  CHECK(report.all_pass);
  for (const auto& c : report.checks) CHECK(c.exact);
}

TEST_CASE("heisenberg law passes all axioms exactly") {
  GroupLaw G = heisenberg_group();
  auto report = verify_axioms(G);
  CHECK(report.all_pass);
  for (const auto& c : report.checks) {
    CHECK(c.exact);
    CHECK(c.residual == 0.0);
  }
}

TEST_CASE("broken law fails the identity axiom") {
  std::vector<Expr> compose{
      ex("x1 + x3", 4),
      ex("x2 + x4 + x1^2", 4),
  };
  GroupLaw G = make_symbolic_law(2, std::move(compose), {ex("-x1", 2), ex("-x2", 2)});
  auto report = verify_axioms(G);
  CHECK(!report.all_pass);
  bool identity_failed = false;
  for (const auto& c : report.checks)
    if (c.name.rfind("identity", 0) == 0 && !c.pass) identity_failed = true;
  CHECK(identity_failed);
}

TEST_CASE("invariance: constant-coefficient operator under euclidean law is exact") {
  Operator L = euclidean_laplacian(2);
  auto res = invariance_residual(L, euclidean_group(2));
  CHECK(res.exact);
  CHECK(res.pass);
  CHECK(res.worst_residual == 0.0);
}

TEST_CASE("invariance: every random constant-coefficient operator under euclidean law") {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<int> c(-3, 3);
  for (int trial = 0; trial < 5; ++trial) {
    int a11 = c(rng), a12 = c(rng), a22 = c(rng);
    // make A = M M^T + I to stay PSD and symmetric
    std::vector<std::vector<Expr>> A{
        {Expr::constant(a11 * a11 + a12 * a12 + 1), Expr::constant(a11 * a12 + a12 * a22)},
        {Expr::constant(a11 * a12 + a12 * a22), Expr::constant(a12 * a12 + a22 * a22 + 1)},
    };
    std::vector<Expr> b{Expr::constant(c(rng)), Expr::constant(c(rng))};
    Operator L(2, std::move(A), std::move(b));
    auto res = invariance_residual(L, euclidean_group(2));
    CHECK(res.exact);
    CHECK(res.pass);
  }
}

TEST_CASE("invariance: heisenberg sub-Laplacian under heisenberg law is exact") {
  auto res = invariance_residual(heisenberg_sublaplacian(), heisenberg_group());
  CHECK(res.exact);
  CHECK(res.pass);
  CHECK(res.worst_residual == 0.0);
}

TEST_CASE("invariance: variable-coefficient operator under the wrong law fails") {
  // sub-Laplacian coefficients but plain addition: the twist is missing
  auto res = invariance_residual(heisenberg_sublaplacian(), euclidean_group(3));
  CHECK(!res.pass);
  CHECK(res.worst_residual > 1e-3);
}

TEST_CASE("unimodularity: heisenberg determinants are exactly one") {
  auto report = unimodularity_check(heisenberg_group());
  CHECK(report.all_pass);
  for (const auto& c : report.checks) CHECK(c.exact);
}

TEST_CASE("unimodularity: trace-one kolmogorov-style law fails on the right") {
  // compose for B = [[-1]] (1D state, trace -1): E(t') = exp(t')
  std::vector<Expr> compose{
      ex("x3 + exp(x4)*x1", 4),
      ex("x2 + x4", 4),
  };
  std::vector<Expr> inverse{
      Expr::neg(Expr::exp(Expr::neg(Expr::var(2))) * Expr::var(1)),
      ex("-x2", 2),
  };
  GroupLaw G = make_symbolic_law(2, std::move(compose), std::move(inverse));
  auto axioms = verify_axioms(G);
  CHECK(axioms.all_pass);
  auto report = unimodularity_check(G);
  CHECK(!report.all_pass);
  CHECK(report.checks[0].pass);   // left translations preserve volume
  CHECK(!report.checks[1].pass);  // right translations scale it
}

TEST_CASE("conv_point: euclidean law gives x - y") {
  GroupLaw G = euclidean_group(2);
  std::vector<double> y{1.0, 2.0}, x{5.0, 1.0};
  Eigen::VectorXd p = conv_point(G, y, x);
  CHECK(p[0] == doctest::Approx(4.0));
  CHECK(p[1] == doctest::Approx(-1.0));
}

TEST_CASE("conv_point at y = x is the origin (random sweep)") {
  GroupLaw G = heisenberg_group();
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int i = 0; i < 100; ++i) {
    std::vector<double> y{u(rng), u(rng), u(rng)};
    Eigen::VectorXd p = conv_point(G, y, y);
    CHECK(p.cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("numeric Newton inversion when no inverse is supplied") {
  std::vector<Expr> compose{
      ex("x1 + x4", 6),
      ex("x2 + x5", 6),
      ex("x3 + x6 + (x1*x5 - x2*x4)/2", 6),
  };
  GroupLaw G = make_symbolic_law(3, std::move(compose));
  std::vector<double> x{0.7, -0.3, 1.1};
  Eigen::VectorXd inv = G.inverse_at(x);
  Eigen::VectorXd back = G.compose_at(x, std::span<const double>(inv.data(), 3));
  CHECK(back.cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("left translation jacobian does not depend on the base point") {
  GroupLaw G = heisenberg_group();
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  // det of d(x o y)/dy sampled for fixed x over varying y
  std::vector<std::vector<Expr>> J(3, std::vector<Expr>(3));
  for (int k = 0; k < 3; ++k)
    for (int j = 0; j < 3; ++j) J[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)] =
        diff(G.compose[static_cast<std::size_t>(k)], 3 + j + 1);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> pt{u(rng), u(rng), u(rng), u(rng), u(rng), u(rng)};
    Eigen::Matrix3d M;
    for (int k = 0; k < 3; ++k)
      for (int j = 0; j < 3; ++j) M(k, j) = eval(J[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)], pt);
    CHECK(M.determinant() == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("monomial basis size") {
  CHECK(monomial_basis(3, 3).size() == 20);
  CHECK(monomial_basis(2, 3).size() == 10);
}
