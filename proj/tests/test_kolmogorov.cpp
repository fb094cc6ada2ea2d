#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "liouville/dilation.hpp"
#include "liouville/kolmogorov.hpp"
#include "test_helpers.hpp"

#include <random>

using namespace liouville;

namespace {

KolmogorovSpec classical_spec() {
  // A = diag(1,0), B = [[0,0],[1,0]] (nilpotent)
  return KolmogorovSpec(2,
                        {{Rational(1), Rational(0)}, {Rational(0), Rational(0)}},
                        {{Rational(0), Rational(0)}, {Rational(1), Rational(0)}});
}

KolmogorovSpec saddle_spec() {
  // A = diag(1,0), B = [[1,-1/2],[1/2,-1]]; eigenvalues +-sqrt(3)/2
  return KolmogorovSpec(2,
                        {{Rational(1), Rational(0)}, {Rational(0), Rational(0)}},
                        {{Rational(1), Rational(-1, 2)}, {Rational(1, 2), Rational(-1)}});
}

}  // namespace

TEST_CASE("matrix_exp: zero matrix") {
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(3, 3);
  CHECK((matrix_exp(B, 1.7) - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("matrix_exp: nilpotent series terminates exactly") {
  Eigen::MatrixXd B(2, 2);
  B << 0, 0, 1, 0;
  for (double s : {0.5, 1.0, -2.0}) {
    Eigen::MatrixXd E = matrix_exp(B, s);
    CHECK(E(0, 0) == 1.0);
    CHECK(E(0, 1) == 0.0);
    CHECK(E(1, 0) == -s);
    CHECK(E(1, 1) == 1.0);
  }
}

TEST_CASE("matrix_exp: inverse identity for the saddle drift") {
  KolmogorovSpec spec = saddle_spec();
  Eigen::MatrixXd P = matrix_exp(spec.B, 1.0) * matrix_exp(spec.B, -1.0);
  CHECK((P - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((matrix_exp(spec.B, 0.0) - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("gram: closed form for the classical kolmogorov pair") {
  KolmogorovSpec spec = classical_spec();
  for (double t : {0.1, 1.0, 10.0}) {
    Eigen::MatrixXd C = gram(spec, t);
    Eigen::MatrixXd expected(2, 2);
    expected << t, -t * t / 2, -t * t / 2, t * t * t / 3;
    CHECK((C - expected).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK(C.determinant() > 0);
  }
}

TEST_CASE("gram: A = I, B = 0 gives tI; symmetry and monotonicity") {
  KolmogorovSpec spec(2, {{Rational(1), Rational(0)}, {Rational(0), Rational(1)}},
                      {{Rational(0), Rational(0)}, {Rational(0), Rational(0)}});
  Eigen::MatrixXd C = gram(spec, 2.5);
  CHECK((C - 2.5 * Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() <= 1e-12);

  KolmogorovSpec s2 = saddle_spec();
  Eigen::MatrixXd C1 = gram(s2, 0.7), C2 = gram(s2, 1.9);
  CHECK((C1 - C1.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(C2 - C1);
  CHECK(es.eigenvalues().minCoeff() >= -1e-12);
}

TEST_CASE("classify: saddle spec is hypoelliptic, unimodular, no bounded-solution rigidity") {
  Classification c = classify(saddle_spec());
  REQUIRE(c.hypoelliptic.has_value());
  CHECK(*c.hypoelliptic);
  CHECK(c.tests_agree);
  CHECK(c.kalman_rank == 2);
  CHECK(c.unimodular);
  CHECK(!c.linf_liouville);
  std::vector<double> re;
  for (auto ev : c.eigenvalues) {
    re.push_back(ev.real());
    CHECK(std::abs(ev.imag()) <= 1e-12);
  }
  std::sort(re.begin(), re.end());
  double s3half = std::sqrt(3.0) / 2.0;
  CHECK(std::abs(re[0] + s3half) <= 1e-9);
  CHECK(std::abs(re[1] - s3half) <= 1e-9);
}

TEST_CASE("classify: elliptic and fully degenerate corners") {
  KolmogorovSpec elliptic(2, {{Rational(1), Rational(0)}, {Rational(0), Rational(1)}},
                          {{Rational(0), Rational(0)}, {Rational(0), Rational(0)}});
  Classification c1 = classify(elliptic);
  REQUIRE(c1.hypoelliptic.has_value());
  CHECK(*c1.hypoelliptic);
  CHECK(c1.unimodular);
  CHECK(c1.linf_liouville);
  CHECK(c1.boundary_case);  // all eigenvalues are exactly zero

  KolmogorovSpec no_mixing(2, {{Rational(1), Rational(0)}, {Rational(0), Rational(0)}},
                           {{Rational(0), Rational(0)}, {Rational(0), Rational(0)}});
  Classification c2 = classify(no_mixing);
  REQUIRE(c2.hypoelliptic.has_value());
  CHECK(!*c2.hypoelliptic);
  CHECK(c2.kalman_rank == 1);
}

TEST_CASE("classify: hypoellipticity is invariant under orthogonal conjugation") {
  std::mt19937_64 rng(77);
  std::normal_distribution<double> g(0.0, 1.0);
  KolmogorovSpec base = classical_spec();
  bool base_h = *classify(base).hypoelliptic;
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::MatrixXd M(2, 2);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) M(i, j) = g(rng);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(M);
    Eigen::MatrixXd Q = qr.householderQ();
    Eigen::MatrixXd A2 = Q * base.A * Q.transpose();
    Eigen::MatrixXd B2 = Q * base.B * Q.transpose();
    // approximate rationals for the KolmogorovSpec container (exactness is irrelevant here)
    auto to_rat = [](const Eigen::MatrixXd& m) {
      std::vector<std::vector<Rational>> out;
      for (int i = 0; i < m.rows(); ++i) {
        std::vector<Rational> row;
        for (int j = 0; j < m.cols(); ++j) {
          long scaled = std::lround(m(i, j) * (1L << 40));
          row.push_back(Rational(scaled, 1L << 40));
        }
        out.push_back(std::move(row));
      }
      return out;
    };
    Eigen::MatrixXd A2s = 0.5 * (A2 + A2.transpose());
    Classification c = classify(KolmogorovSpec(2, to_rat(A2s), to_rat(B2)));
    REQUIRE(c.hypoelliptic.has_value());
    CHECK(*c.hypoelliptic == base_h);
  }
}

TEST_CASE("classify: Kalman rank agrees with gram positivity on random specs") {
  std::mt19937_64 rng(31415);
  std::uniform_int_distribution<int> entry(-2, 2);
  std::uniform_int_distribution<int> rank_pick(1, 2);
  int checked = 0;
  for (int trial = 0; trial < 100; ++trial) {
    int n = 2 + (trial % 2);
    // A = G G^T with a random (possibly rank-deficient) integer factor
    std::vector<std::vector<long>> G(static_cast<std::size_t>(n), std::vector<long>(static_cast<std::size_t>(n), 0));
    int cols = rank_pick(rng);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < cols; ++j) G[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = entry(rng);
    std::vector<std::vector<Rational>> A(static_cast<std::size_t>(n),
                                         std::vector<Rational>(static_cast<std::size_t>(n), Rational(0)));
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        long s = 0;
        for (int k = 0; k < n; ++k)
          s += G[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)] * G[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)];
        A[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = Rational(s);
      }
    std::vector<std::vector<Rational>> B(static_cast<std::size_t>(n),
                                         std::vector<Rational>(static_cast<std::size_t>(n), Rational(0)));
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) B[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = Rational(entry(rng));
    Classification c = classify(KolmogorovSpec(n, A, B));
    // skip tolerance-boundary cases; agreement is asserted on clear ones
    if (!c.tests_agree) continue;
    ++checked;
    CHECK(*c.hypoelliptic == (c.kalman_rank == n));
  }
  CHECK(checked >= 90);
}

TEST_CASE("det E(t) = exp(-t trace B)") {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> entry(-2, 2);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::MatrixXd B(2, 2);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) B(i, j) = entry(rng);
    for (double t : {0.3, 1.0, 2.0}) {
      double lhs = matrix_exp(B, t).determinant();
      double rhs = std::exp(-t * B.trace());
      CHECK(std::abs(lhs - rhs) <= 1e-10 * std::abs(rhs));
    }
  }
}

TEST_CASE("build_operator: drift rows follow Bx and time slot carries -1") {
  Operator L = build_operator(saddle_spec());
  CHECK(L.dim() == 3);
  CHECK(L.time_flag());
  CHECK(struct_equal(L.b()[0], simplify(parse_expression("x1 - x2/2", 2))));
  CHECK(struct_equal(L.b()[1], simplify(parse_expression("x1/2 - x2", 2))));
  CHECK(struct_equal(L.b()[2], Expr::constant(-1)));
}

TEST_CASE("build_group: nilpotent B gives an exact polynomial law") {
  auto built = build_group(classical_spec());
  CHECK(built.path == GroupLawPath::Polynomial);
  CHECK(built.law.polynomial());
  auto report = verify_axioms(built.law);
  CHECK(report.all_pass);
  for (const auto& c : report.checks) CHECK(c.exact);
  // compose = (x1' + x1, x2' - t' x1 + x2, t + t')
  std::vector<double> a{1.0, 2.0, 3.0}, b{10.0, 20.0, 5.0};
  Eigen::VectorXd ab = built.law.compose_at(a, b);
  CHECK(ab[0] == doctest::Approx(11.0));
  CHECK(ab[1] == doctest::Approx(22.0 - 5.0 * 1.0));
  CHECK(ab[2] == doctest::Approx(8.0));
}

TEST_CASE("build_group: B = 0 reduces to addition") {
  KolmogorovSpec spec(2, {{Rational(1), Rational(0)}, {Rational(0), Rational(1)}},
                      {{Rational(0), Rational(0)}, {Rational(0), Rational(0)}});
  auto built = build_group(spec);
  CHECK(built.path == GroupLawPath::Polynomial);
  std::vector<double> a{1.0, 2.0, 3.0}, b{4.0, 5.0, 6.0};
  Eigen::VectorXd ab = built.law.compose_at(a, b);
  CHECK(ab[0] == doctest::Approx(5.0));
  CHECK(ab[1] == doctest::Approx(7.0));
  CHECK(ab[2] == doctest::Approx(9.0));
}

TEST_CASE("build_group: saddle spec gets an exact symbolic entire law") {
  auto built = build_group(saddle_spec());
  CHECK(built.path == GroupLawPath::EntireSymbolic);
  CHECK(built.law.symbolic());
  CHECK(!built.law.polynomial());
  auto report = verify_axioms(built.law);
  CHECK(report.all_pass);
  for (const auto& c : report.checks) CHECK(c.residual <= 1e-9);
}

TEST_CASE("build_group: saddle law matches the numeric flow") {
  auto built = build_group(saddle_spec());
  KolmogorovSpec spec = saddle_spec();
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  for (int i = 0; i < 30; ++i) {
    Eigen::VectorXd a(3), b(3);
    for (int k = 0; k < 3; ++k) {
      a[k] = u(rng);
      b[k] = u(rng);
    }
    Eigen::VectorXd got = built.law.compose_at(std::span<const double>(a.data(), 3),
                                               std::span<const double>(b.data(), 3));
    Eigen::VectorXd expect(3);
    expect.head(2) = b.head(2) + matrix_exp(spec.B, b[2]) * a.head(2);
    expect[2] = a[2] + b[2];
    CHECK((got - expect).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("build_group: defective B falls back to numeric closures") {
  // B = [[1,1],[0,1]] is a genuine Jordan block (defective, non-nilpotent)
  KolmogorovSpec spec(2, {{Rational(1), Rational(0)}, {Rational(0), Rational(1)}},
                      {{Rational(1), Rational(1)}, {Rational(0), Rational(1)}});
  auto built = build_group(spec);
  CHECK(built.path == GroupLawPath::NumericClosure);
  CHECK(!built.law.symbolic());
  auto report = verify_axioms(built.law);
  CHECK(report.all_pass);
}

TEST_CASE("build_operator invariance against built group") {
  // polynomial case: exact; entire-symbolic case: sampled
  auto cls = classical_spec();
  auto res = invariance_residual(build_operator(cls), build_group(cls).law);
  CHECK(res.exact);
  CHECK(res.pass);

  auto sad = saddle_spec();
  auto res2 = invariance_residual(build_operator(sad), build_group(sad).law);
  CHECK(res2.method == "sampled");
  CHECK(res2.pass);
}

TEST_CASE("built group is unimodular exactly when trace B vanishes") {
  auto sad = saddle_spec();
  CHECK(sad.trace_B() == 0);
  auto uni = unimodularity_check(build_group(sad).law);
  CHECK(uni.all_pass);

  KolmogorovSpec traceful(2, {{Rational(1), Rational(0)}, {Rational(0), Rational(1)}},
                          {{Rational(1), Rational(0)}, {Rational(0), Rational(0)}});
  CHECK(traceful.trace_B() == 1);
  auto uni2 = unimodularity_check(build_group(traceful).law);
  CHECK(!uni2.all_pass);
  CHECK(uni2.checks[0].pass);
  CHECK(!uni2.checks[1].pass);
}

TEST_CASE("spec validation") {
  CHECK_THROWS_AS(KolmogorovSpec(2, {{Rational(1), Rational(2)}, {Rational(0), Rational(1)}},
                                 {{Rational(0), Rational(0)}, {Rational(0), Rational(0)}}),
                  DimensionError);  // asymmetric A
  CHECK_THROWS_AS(KolmogorovSpec(2, {{Rational(-1), Rational(0)}, {Rational(0), Rational(1)}},
                                 {{Rational(0), Rational(0)}, {Rational(0), Rational(0)}}),
                  DimensionError);  // not PSD
  CHECK_THROWS_AS(gram(classical_spec(), -1.0), std::domain_error);
}

TEST_CASE("nilpotency index") {
  CHECK(classical_spec().nilpotency_index() == 2);
  CHECK(saddle_spec().nilpotency_index() == 0);
  KolmogorovSpec zero(2, {{Rational(1), Rational(0)}, {Rational(0), Rational(1)}},
                      {{Rational(0), Rational(0)}, {Rational(0), Rational(0)}});
  CHECK(zero.nilpotency_index() == 1);
}
