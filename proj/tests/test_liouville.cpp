#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "liouville/fundamental.hpp"
#include "test_helpers.hpp"

#include <cmath>
#include <random>

using namespace liouville;
using namespace liouville::testing;

namespace {

SupportedFunction unit_bump(int n) {
  BumpFunction b{n, 1.0};
  return {n, 1.0, [b](std::span<const double> x) { return b(x); }};
}

}  // namespace

TEST_CASE("euclidean kernel: calibration close to the classical constant") {
  FundamentalSolution g = gamma_euclidean(3);
  double expected = 1.0 / (4.0 * M_PI);
  CHECK(std::abs(g.constant - expected) <= 1e-3);
}

TEST_CASE("euclidean kernel: scaling degree 2 - n") {
  FundamentalSolution g = gamma_euclidean(3);
  std::vector<double> x{0.3, -0.7, 0.4};
  Eigen::VectorXd x2 = 2.0 * Eigen::Map<Eigen::VectorXd>(x.data(), 3);
  CHECK(g(std::span<const double>(x2.data(), 3)) ==
        doctest::Approx(0.5 * g(x)).epsilon(1e-12));
}

TEST_CASE("euclidean kernel: harmonic away from the origin (symbolic)") {
  Expr gamma_expr = parse_expression("(x1^2 + x2^2 + x3^2)^(-1/2)", 3);
  Operator L = euclidean_laplacian(3);
  Expr lg = apply_operator(L, gamma_expr);
  std::vector<double> pt{1.0, 1.0, 1.0};
  CHECK(std::abs(eval(lg, pt)) <= 1e-12);
}

TEST_CASE("calibration is inverse-linear in the kernel scale") {
  Operator L = euclidean_laplacian(3);
  Dilation d{{Rational(1), Rational(1), Rational(1)}};
  PointFn unit = [](std::span<const double> x) {
    return 1.0 / std::sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]);
  };
  PointFn doubled = [&unit](std::span<const double> x) { return 2.0 * unit(x); };
  double c1 = calibrate(unit, L, d);
  double c2 = calibrate(doubled, L, d);
  CHECK(c2 == doctest::Approx(0.5 * c1).epsilon(1e-6));
}

TEST_CASE("heisenberg kernel: dilation homogeneity of degree -2") {
  FundamentalSolution g = gamma_heisenberg();
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (double lambda : {0.5, 2.0, 7.0}) {
    for (int i = 0; i < 30; ++i) {
      std::vector<double> x{u(rng), u(rng), u(rng)};
      Eigen::VectorXd xl = g.dilation.apply(lambda, x);
      double lhs = g(std::span<const double>(xl.data(), 3));
      double rhs = std::pow(lambda, -2.0) * g(x);
      CHECK(std::abs(lhs - rhs) <= 1e-12 * std::abs(rhs));
    }
  }
}

TEST_CASE("heisenberg kernel: annihilated by the sub-Laplacian off the origin") {
  FundamentalSolution g = gamma_heisenberg();
  Expr gamma_expr =
      simplify(Expr::floating(g.constant) *
               parse_expression("((x1^2 + x2^2)^2 + 16*x3^2)^(-1/2)", 3));
  Expr lg = apply_operator(heisenberg_sublaplacian(), gamma_expr);
  CompiledExpr clg(lg);
  std::vector<double> pts[] = {{1.0, 0.0, 1.0}, {0.5, -0.5, 0.2}, {-1.2, 0.3, -0.8}};
  for (auto& pt : pts) CHECK(std::abs(clg(pt)) <= 1e-9);
}

TEST_CASE("heisenberg kernel: nonnegative on random samples") {
  FundamentalSolution g = gamma_heisenberg();
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int i = 0; i < 10000; ++i) {
    std::vector<double> x{u(rng), u(rng), u(rng)};
    CHECK(g(x) >= 0.0);
  }
}

TEST_CASE("heisenberg kernel: decays at infinity") {
  FundamentalSolution g = gamma_heisenberg();
  // compare along a dilation ray: |x|=1 vs |x|=1000 in the homogeneous norm
  std::vector<double> base{0.4, 0.3, 0.05};
  double n0 = g.norm(base);
  Eigen::VectorXd unit_pt = g.dilation.apply(1.0 / n0, base);
  Eigen::VectorXd far_pt = g.dilation.apply(1000.0, std::span<const double>(unit_pt.data(), 3));
  double v1 = g(std::span<const double>(unit_pt.data(), 3));
  double v1000 = g(std::span<const double>(far_pt.data(), 3));
  CHECK(v1000 < 1e-3 * v1);
}

TEST_CASE("calibration cross-validates on a second bump") {
  FundamentalSolution g = gamma_heisenberg();
  BumpFunction phi2{3, 1.3};
  Expr lstar = apply_adjoint(g.op, phi2.expression());
  CompiledExpr clstar(lstar);
  double guard = 1.3 * 1.3 * (1.0 - 1e-12);
  Integrand f = [&](std::span<const double> x) {
    double r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
    if (r2 >= guard) return 0.0;
    if (g.norm(x) < 1e-3) return 0.0;
    return g(x) * clstar(x);
  };
  QuadratureOptions opts;
  opts.rel_tol = 1e-4;
  opts.abs_tol = 1e-9;
  opts.max_evals = 60'000'000;
  double val = integrate_adaptive(f, Box::cube(3, -1.3, 1.3), opts, "cross bump");
  CHECK(std::abs(val + 1.0) <= 1e-3);  // int Gamma L* phi2 = -phi2(0) = -1
}

TEST_CASE("convolution: linear in f and nonnegative for nonnegative f") {
  FundamentalSolution g = gamma_euclidean(3);
  SupportedFunction f = unit_bump(3);
  SupportedFunction f3{3, 1.0, [&f](std::span<const double> x) { return 3.0 * f.f(x); }};
  std::vector<double> pts[] = {{2.5, 0.0, 0.0}, {0.2, 0.1, -0.3}, {1.2, -1.0, 0.6}};
  for (auto& x : pts) {
    double v = convolve(g, f, x);
    double v3 = convolve(g, f3, x);
    CHECK(v >= 0.0);
    CHECK(std::abs(v3 - 3.0 * v) <= 1e-10 * (1.0 + std::abs(v3)));
  }
}

TEST_CASE("convolution: far field looks like a point mass") {
  FundamentalSolution g = gamma_euclidean(3);
  BumpFunction b{3, 1.0};
  double mass = b.mass();
  SupportedFunction f{3, 1.0, [&, inv = 1.0 / mass](std::span<const double> x) { return inv * b(x); }};
  std::vector<double> x{20.0, 0.0, 0.0};
  double ratio = convolve(g, f, x) / g(x);
  CHECK(ratio >= 0.95);
  CHECK(ratio <= 1.05);
}

TEST_CASE("convolution: frozen far rule agrees with adaptive quadrature") {
  FundamentalSolution g = gamma_heisenberg();
  SupportedFunction f = unit_bump(3);
  std::vector<double> x{2.2, 0.4, -1.0};  // just beyond the far threshold
  ConvolutionOptions near_opts;
  near_opts.far_factor = 1e9;  // force the adaptive path
  near_opts.rel_tol = 1e-6;
  double adaptive = convolve(g, f, x, near_opts);
  double frozen = convolve(g, f, x);
  CHECK(std::abs(adaptive - frozen) <= 1e-3 * std::abs(adaptive));
}

TEST_CASE("convolution: translation consistency under the euclidean law") {
  FundamentalSolution g = gamma_euclidean(3);
  SupportedFunction f = unit_bump(3);
  std::vector<double> z{0.4, -0.2, 0.1};
  SupportedFunction f_shift{3, 1.4, [&](std::span<const double> x) {
                              std::vector<double> y(3);
                              for (int k = 0; k < 3; ++k) y[static_cast<std::size_t>(k)] =
                                  x[static_cast<std::size_t>(k)] - z[static_cast<std::size_t>(k)];
                              return f.f(y);
                            }};
  std::vector<double> x{3.0, 1.0, -2.0};
  std::vector<double> xz(3);
  for (int k = 0; k < 3; ++k) xz[static_cast<std::size_t>(k)] = x[static_cast<std::size_t>(k)] + z[static_cast<std::size_t>(k)];
  // adaptive path on both sides: the two supports differ, so frozen rules
  // would compare two different discretizations
  ConvolutionOptions opts;
  opts.far_factor = 1e9;
  opts.rel_tol = 1e-5;
  double lhs = convolve(g, f, x, opts);
  double rhs = convolve(g, f_shift, xz, opts);
  CHECK(std::abs(lhs - rhs) <= 3e-4 * (std::abs(lhs) + 1e-12));
}

TEST_CASE("cutoffs: plateau, support, monotonicity") {
  CutoffSequence phi;
  std::vector<double> inside{1.2, 0.5};   // |x| < 2
  std::vector<double> fringe{2.31, 0.0};  // 2 < |x| < 3
  std::vector<double> outside{3.5, 0.1};  // |x| > 3
  CHECK(phi(2, inside) == 1.0);
  CHECK(phi(2, fringe) > 0.0);
  CHECK(phi(2, fringe) < 1.0);
  CHECK(phi(2, outside) == 0.0);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-4.0, 4.0);
  for (int i = 0; i < 200; ++i) {
    std::vector<double> x{u(rng), u(rng)};
    for (int m = 1; m < 4; ++m) CHECK(phi(m, x) <= phi(m + 1, x) + 1e-15);
  }
}

TEST_CASE("cutoffs: truncated convolution stabilizes once m covers the support") {
  FundamentalSolution g = gamma_euclidean(3);
  SupportedFunction f = unit_bump(3);
  CutoffSequence phi;
  std::vector<double> x{2.4, 0.3, 0.0};
  double prev = -1.0;
  double full = convolve(g, f, x);
  for (int m = 1; m <= 3; ++m) {
    SupportedFunction fm{3, 1.0, [&, m](std::span<const double> y) { return f.f(y) * phi(m, y); }};
    double val = convolve(g, fm, x);
    CHECK(val >= prev - 1e-12);
    prev = val;
    if (m >= 1) CHECK(std::abs(val - full) <= 1e-6 * (1.0 + std::abs(full)));
  }
}

TEST_CASE("mollifier: reproduces constants and linear functions") {
  GroupLaw G = euclidean_group(2);
  PointFn one = [](std::span<const double>) { return 1.0; };
  PointFn linear = [](std::span<const double> x) { return 2.0 * x[0] - x[1]; };
  std::vector<double> x{0.3, -0.8};
  for (double eps : {0.05, 0.1, 0.2}) {
    CHECK(std::abs(mollify(one, G, eps, x) - 1.0) <= 1e-6);
    CHECK(std::abs(mollify(linear, G, eps, x) - (2.0 * x[0] - x[1])) <= 1e-6);
  }
}

TEST_CASE("mollifier: |x| at the origin smooths to a positive decreasing value") {
  GroupLaw G = euclidean_group(2);
  PointFn absfn = [](std::span<const double> x) { return std::hypot(x[0], x[1]); };
  std::vector<double> origin{0.0, 0.0};
  double prev = std::numeric_limits<double>::infinity();
  for (double eps : {0.2, 0.1, 0.05}) {
    double val = mollify(absfn, G, eps, origin);
    CHECK(val > 0.0);
    CHECK(val < prev);
    prev = val;
  }
}

TEST_CASE("mollifier mass is one to 1e-6") {
  for (double eps : {0.05, 0.1, 0.2}) {
    BumpFunction j{2, eps};
    double m = j.mass(1e-8);
    GroupLaw G = euclidean_group(2);
    PointFn one = [](std::span<const double>) { return 1.0; };
    std::vector<double> x{0.0, 0.0};
    CHECK(std::abs(mollify(one, G, eps, x) - 1.0) <= 1e-6);
    CHECK(m > 0.0);
  }
}

TEST_CASE("gadget: sqrt-shift power bounds, convexity, flat origin") {
  for (double p : {1.0, 1.5, 2.0, 3.0}) {
    Gadget g = Gadget::sqrt_shift_power(p);
    for (int i = 0; i <= 2000; ++i) {
      double t = -50.0 + 100.0 * i / 2000.0;
      auto [F, dF, d2F] = gadget_eval(g, t);
      CHECK(F >= 0.0);
      CHECK(F <= std::pow(std::abs(t), p) + 1e-12);
      if (t != 0.0) CHECK(d2F > 0.0);
    }
    auto at0 = gadget_eval(g, 0.0);
    CHECK(at0.F == 0.0);
    CHECK(at0.dF == 0.0);
    if (p == 2.0) CHECK(at0.d2F == 0.0);  // F ~ t^4/4 near 0
  }
  // taylor oracle for p=2: F(t) = t^4/4 + O(t^6)
  Gadget g2 = Gadget::sqrt_shift_power(2.0);
  for (double t : {1e-2, 5e-2}) {
    auto v = gadget_eval(g2, t);
    CHECK(std::abs(v.F - t * t * t * t / 4.0) <= 2.0 * std::pow(t, 6));
  }
}

TEST_CASE("gadget: concave power on the half line") {
  Gadget g = Gadget::shifted_concave_power(0.5);
  auto at0 = gadget_eval(g, 0.0);
  CHECK(at0.F == 0.0);
  CHECK(at0.dF == doctest::Approx(0.5));
  for (int i = 0; i <= 2000; ++i) {
    double t = 50.0 * i / 2000.0;
    auto [F, dF, d2F] = gadget_eval(g, t);
    CHECK(F >= 0.0);
    CHECK(F <= std::pow(t, 0.5) + 1e-12);
    CHECK(d2F < 0.0);
  }
  CHECK_THROWS_AS(gadget_eval(g, -1.0), std::domain_error);
}

TEST_CASE("gadget: quartic junction is C^2 at zero") {
  for (double p : {1.0, 1.5, 2.0}) {
    Gadget g = Gadget::quartic_junction_power(p);
    auto neg = gadget_eval(g, -3.0);
    CHECK(neg.F == 0.0);
    CHECK(neg.dF == 0.0);
    CHECK(neg.d2F == 0.0);
    for (int i = 1; i <= 2000; ++i) {
      double t = 50.0 * i / 2000.0;
      auto [F, dF, d2F] = gadget_eval(g, t);
      CHECK(F >= 0.0);
      CHECK(dF >= 0.0);
      CHECK(d2F > 0.0);
    }
    // finite-difference second derivative from both sides of the junction
    double h = 2e-3;
    auto fd2 = [&](double t) {
      return (gadget_eval(g, t + h).F - 2.0 * gadget_eval(g, t).F + gadget_eval(g, t - h).F) /
             (h * h);
    };
    CHECK(std::abs(fd2(h * 1.5) - fd2(-h * 1.5)) <= 1e-4);
  }
}

TEST_CASE("gadget: primitive of an increasing function is convex") {
  Gadget g = Gadget::primitive_of(parse_expression("x1^3 + x1", 1));
  auto at0 = gadget_eval(g, 0.0);
  CHECK(at0.F == 0.0);
  auto at2 = gadget_eval(g, 2.0);
  CHECK(at2.F == doctest::Approx(4.0 + 2.0));  // t^4/4 + t^2/2 at t=2
  CHECK(at2.dF == doctest::Approx(10.0));
  CHECK(at2.d2F == doctest::Approx(13.0));
  auto atm1 = gadget_eval(g, -1.0);
  CHECK(atm1.F == doctest::Approx(0.25 + 0.5));
  for (double t : {-2.0, -0.5, 0.5, 2.0}) CHECK(gadget_eval(g, t).d2F > 0.0);
}

TEST_CASE("counterexample: heisenberg ratios bracket the critical exponent (smoke)") {
  FundamentalSolution g = gamma_heisenberg();
  SupportedFunction f = unit_bump(3);
  CounterexampleParams params;
  params.samples = 2000;
  params.annuli = 8;
  params.sign_check_points = 2;

  params.p = 2.0;  // p = p*
  auto at_star = counterexample(g, f, params);
  CHECK(at_star.p_star == doctest::Approx(2.0));
  CHECK(std::abs(at_star.measured_ratio - 1.0) <= 0.05);
  CHECK(at_star.verdict == "divergent");
  CHECK(at_star.u_nonpositive);
  CHECK(at_star.lu_matches_f);

  params.p = 3.0;
  params.sign_check_points = 0;
  auto above = counterexample(g, f, params);
  CHECK(above.theoretical_ratio == doctest::Approx(0.25));
  CHECK(above.measured_ratio >= 0.2);
  CHECK(above.measured_ratio <= 0.3);
  CHECK(above.verdict == "convergent");
}

TEST_CASE("counterexample: euclidean verdicts flip at the critical exponent (smoke)") {
  FundamentalSolution g = gamma_euclidean(3);
  SupportedFunction f = unit_bump(3);
  CounterexampleParams params;
  params.samples = 2000;
  params.annuli = 8;
  params.sign_check_points = 0;

  params.p = 3.0;  // p* for Q = 3
  CHECK(counterexample(g, f, params).verdict == "divergent");
  params.p = 2.5;
  CHECK(counterexample(g, f, params).verdict == "divergent");
  params.p = 3.5;
  CHECK(counterexample(g, f, params).verdict == "convergent");
}

TEST_CASE("counterexample: reports are deterministic for a fixed seed") {
  FundamentalSolution g = gamma_euclidean(3);
  SupportedFunction f = unit_bump(3);
  CounterexampleParams params;
  params.samples = 500;
  params.annuli = 6;
  params.sign_check_points = 0;
  params.p = 3.0;
  auto r1 = counterexample(g, f, params);
  auto r2 = counterexample(g, f, params);
  CHECK(r1.measured_ratio == r2.measured_ratio);
  CHECK(r1.annulus_lp == r2.annulus_lp);
}

TEST_CASE("counterexample: cone restriction reports a ratio") {
  FundamentalSolution g = gamma_euclidean(3);
  SupportedFunction f = unit_bump(3);
  CounterexampleParams params;
  params.samples = 2000;
  params.annuli = 6;
  params.sign_check_points = 0;
  params.p = 3.0;
  Eigen::VectorXd axis(3);
  axis << 1.0, 0.0, 0.0;
  params.cone_axis = axis;
  params.cone_cos = 0.5;
  auto rep = counterexample(g, f, params);
  REQUIRE(rep.cone_ratio.has_value());
  CHECK(std::abs(*rep.cone_ratio - 1.0) <= 0.1);  // same exponent inside the cone
}
