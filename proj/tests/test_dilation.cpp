#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "liouville/dilation.hpp"
#include "test_helpers.hpp"

#include <random>

using namespace liouville;
using namespace liouville::testing;

namespace {

Dilation heisenberg_dilation() { return Dilation({Rational(1), Rational(1), Rational(2)}); }

}  // namespace

TEST_CASE("apply: parabolic scaling and group property") {
  Dilation d({Rational(1), Rational(1), Rational(2)});
  std::vector<double> x{1.0, -2.0, 3.0};
  Eigen::VectorXd y = d.apply(2.0, x);
  CHECK(y[0] == doctest::Approx(2.0));
  CHECK(y[1] == doctest::Approx(-4.0));
  CHECK(y[2] == doctest::Approx(12.0));

  Eigen::VectorXd id = d.apply(1.0, x);
  for (int k = 0; k < 3; ++k) CHECK(id[k] == doctest::Approx(x[static_cast<std::size_t>(k)]));

  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int i = 0; i < 20; ++i) {
    std::vector<double> p{u(rng), u(rng), u(rng)};
    Eigen::VectorXd two = d.apply(2.0, p);
    Eigen::VectorXd six = d.apply(3.0, std::span<const double>(two.data(), 3));
    Eigen::VectorXd direct = d.apply(6.0, p);
    CHECK((six - direct).cwiseAbs().maxCoeff() <= 1e-12 * direct.cwiseAbs().maxCoeff());
  }

  CHECK_THROWS_AS(d.apply(-1.0, x), std::domain_error);
}

TEST_CASE("automorphism: heisenberg dilation is exact") {
  auto check = automorphism_check(heisenberg_dilation(), heisenberg_group());
  CHECK(check.exact);
  CHECK(check.pass);
}

TEST_CASE("automorphism: euclidean dilation is exact") {
  Dilation d({Rational(1), Rational(1), Rational(1)});
  auto check = automorphism_check(d, euclidean_group(3));
  CHECK(check.exact);
  CHECK(check.pass);
}

TEST_CASE("automorphism: isotropic scaling on the heisenberg law fails") {
  Dilation d({Rational(1), Rational(1), Rational(1)});
  auto check = automorphism_check(d, heisenberg_group());
  CHECK(check.exact);
  CHECK(!check.pass);
}

TEST_CASE("homogeneity: heisenberg sub-Laplacian has degree 2") {
  auto m = homogeneity_degree(heisenberg_sublaplacian(), heisenberg_dilation());
  REQUIRE(m.has_value());
  CHECK(*m == 2);
}

TEST_CASE("homogeneity: heat operator has degree 2 under parabolic scaling") {
  std::vector<std::vector<Expr>> A{
      {ex("1", 3), ex("0", 3), ex("0", 3)},
      {ex("0", 3), ex("1", 3), ex("0", 3)},
      {ex("0", 3), ex("0", 3), ex("0", 3)},
  };
  std::vector<Expr> b{ex("0", 3), ex("0", 3), ex("-1", 3)};
  Operator H(3, std::move(A), std::move(b), true);
  Dilation d({Rational(1), Rational(1), Rational(2)});
  auto m = homogeneity_degree(H, d);
  REQUIRE(m.has_value());
  CHECK(*m == 2);
}

TEST_CASE("homogeneity: mixed scaling of the plain Laplacian has no degree") {
  Dilation d({Rational(1), Rational(2)});
  CHECK(!homogeneity_degree(euclidean_laplacian(2), d).has_value());
}

TEST_CASE("homogeneity degree is invariant under rescaling the operator") {
  Operator H = heisenberg_sublaplacian();
  std::vector<std::vector<Expr>> A;
  for (const auto& row : H.A()) {
    std::vector<Expr> r;
    for (const auto& e : row) r.push_back(simplify(Expr::constant(7) * e));
    A.push_back(std::move(r));
  }
  Operator scaled(3, std::move(A), H.b());
  auto m = homogeneity_degree(scaled, heisenberg_dilation());
  REQUIRE(m.has_value());
  CHECK(*m == 2);
}

TEST_CASE("sharp exponent values and monotonicity") {
  CHECK(sharp_exponent(Rational(4)) == 2);
  CHECK(sharp_exponent(Rational(3)) == 3);
  CHECK(sharp_exponent(Rational(6)) == Rational(3, 2));
  CHECK_THROWS_AS(sharp_exponent(Rational(2)), std::domain_error);

  Rational prev(0);
  bool first = true;
  for (long q : {3L, 4L, 6L, 10L, 100L}) {
    Rational p = sharp_exponent(Rational(q));
    if (!first) CHECK(p < prev);
    prev = p;
    first = false;
  }
  CHECK(prev > 1);
  CHECK(prev - 1 == Rational(2, 98));
}

TEST_CASE("heat lift adds two to the homogeneous dimension") {
  Dilation d = heisenberg_dilation();
  Dilation lifted = d.heat_lift();
  CHECK(lifted.Q() == d.Q() + 2);
  CHECK(lifted.dim() == 4);
  CHECK(sharp_exponent(lifted.Q()) == Rational(3, 2));
}

TEST_CASE("homogeneous norm: closed values and scaling") {
  Dilation d1({Rational(1), Rational(1)});
  std::vector<double> p{3.0, 4.0};
  CHECK(d1.homogeneous_norm(p) == doctest::Approx(7.0));

  Dilation d2({Rational(1), Rational(2)});
  std::vector<double> q{0.0, 4.0};
  CHECK(d2.homogeneous_norm(q) == doctest::Approx(2.0));

  Dilation dh = heisenberg_dilation();
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int i = 0; i < 50; ++i) {
    std::vector<double> x{u(rng), u(rng), u(rng)};
    double n1 = dh.homogeneous_norm(x);
    Eigen::VectorXd y = dh.apply(5.0, x);
    double n5 = dh.homogeneous_norm(std::span<const double>(y.data(), 3));
    CHECK(std::abs(n5 - 5.0 * n1) <= 1e-12 * (1.0 + n5));
  }
  std::vector<double> zero{0.0, 0.0, 0.0};
  CHECK(dh.homogeneous_norm(zero) == 0.0);
}

TEST_CASE("dilation constructor validates exponents") {
  CHECK_THROWS_AS(Dilation({Rational(1, 2)}), std::invalid_argument);
  CHECK_THROWS_AS(Dilation({Rational(2), Rational(1)}), std::invalid_argument);
}
