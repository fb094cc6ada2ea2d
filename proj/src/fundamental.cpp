#include "liouville/fundamental.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <mutex>
#include <random>

namespace liouville {

namespace {

std::span<const double> as_span(const Eigen::VectorXd& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

double sq(double x) { return x * x; }

/// smooth transition: 0 for s <= 0, 1 for s >= 1
double smoothstep(double s) {
  if (s <= 0) return 0.0;
  if (s >= 1) return 1.0;
  double a = std::exp(-1.0 / s);
  double b = std::exp(-1.0 / (1.0 - s));
  return a / (a + b);
}

}  // namespace

Operator euclidean_operator(int n) {
  std::vector<std::vector<Expr>> A(static_cast<std::size_t>(n),
                                   std::vector<Expr>(static_cast<std::size_t>(n), Expr::constant(0)));
  for (int i = 0; i < n; ++i) A[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)] = Expr::constant(1);
  return Operator(n, std::move(A), std::vector<Expr>(static_cast<std::size_t>(n), Expr::constant(0)));
}

GroupLaw euclidean_group_law(int n) {
  std::vector<Expr> compose, inverse;
  for (int k = 1; k <= n; ++k) {
    compose.push_back(simplify(Expr::var(k) + Expr::var(k + n)));
    inverse.push_back(simplify(Expr::neg(Expr::var(k))));
  }
  return make_symbolic_law(n, std::move(compose), std::move(inverse));
}

Operator heisenberg_operator() {
  auto e = [](const char* s) { return parse_expression(s, 3); };
  std::vector<std::vector<Expr>> A{
      {e("1"), e("0"), e("-x2/2")},
      {e("0"), e("1"), e("x1/2")},
      {e("-x2/2"), e("x1/2"), e("(x1^2 + x2^2)/4")},
  };
  std::vector<Expr> b{e("0"), e("0"), e("0")};
  return Operator(3, std::move(A), std::move(b));
}

GroupLaw heisenberg_group_law() {
  auto e = [](const char* s) { return parse_expression(s, 6); };
  std::vector<Expr> compose{e("x1 + x4"), e("x2 + x5"), e("x3 + x6 + (x1*x5 - x2*x4)/2")};
  auto inv = [](const char* s) { return parse_expression(s, 3); };
  return make_symbolic_law(3, std::move(compose), {inv("-x1"), inv("-x2"), inv("-x3")});
}

// ---------------------------------------------------------------------------
// Bump functions
// ---------------------------------------------------------------------------

Expr BumpFunction::expression() const {
  std::vector<Expr> terms;
  for (int k = 1; k <= dim; ++k) terms.push_back(Expr::int_pow(Expr::var(k), 2));
  Expr r2 = Expr::add(std::move(terms));
  Expr r2cap = Expr::floating(radius * radius);
  Expr profile = Expr::exp(Expr::neg(Expr::div(r2, r2cap - r2)));
  return simplify(Expr::floating(scale) * profile);
}

double BumpFunction::operator()(std::span<const double> x) const {
  double r2 = 0;
  for (double v : x) r2 += v * v;
  double cap = radius * radius;
  if (r2 >= cap * (1.0 - 1e-12)) return 0.0;
  return scale * std::exp(-r2 / (cap - r2));
}

double BumpFunction::mass(double rel_tol) const {
  QuadratureOptions opts;
  opts.rel_tol = rel_tol;
  Integrand f = [this](std::span<const double> x) { return (*this)(x); };
  return integrate_adaptive(f, Box::cube(dim, -radius, radius), opts, "bump mass");
}

// ---------------------------------------------------------------------------
// Calibration
// ---------------------------------------------------------------------------

double calibrate(const PointFn& gamma_unit, const Operator& L, const Dilation& d,
                 double support_radius, double rel_tol, double excision) {
  const int n = L.dim();
  BumpFunction phi{n, support_radius};
  Expr lstar_phi = apply_adjoint(L, phi.expression());
  CompiledExpr lstar(lstar_phi);

  const double guard = support_radius * support_radius * (1.0 - 1e-12);
  Integrand f = [&](std::span<const double> x) {
    double r2 = 0;
    for (double v : x) r2 += v * v;
    if (r2 >= guard) return 0.0;
    if (d.homogeneous_norm(x) < excision) return 0.0;
    return gamma_unit(x) * lstar(x);
  };

  QuadratureOptions opts;
  opts.rel_tol = rel_tol;
  opts.abs_tol = 1e-9;
  opts.max_evals = 60'000'000;
  double denom = integrate_adaptive(f, Box::cube(n, -support_radius, support_radius), opts,
                                    "fundamental solution calibration");
  if (std::abs(denom) < 1e-8)
    throw NumericalError("calibration denominator vanished (wrong kernel homogeneity?)");
  return -phi({}) / denom;  // phi(0) = scale = 1
}

// ---------------------------------------------------------------------------
// Built-in kernels
// ---------------------------------------------------------------------------

FundamentalSolution gamma_euclidean(int n) {
  if (n < 3) throw std::domain_error("euclidean fundamental solution needs n >= 3");
  static std::mutex mu;
  static std::map<int, FundamentalSolution> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;

  Operator L = euclidean_operator(n);
  Dilation d{std::vector<Rational>(static_cast<std::size_t>(n), Rational(1))};
  PointFn unit = [n](std::span<const double> x) {
    double r2 = 0;
    for (double v : x) r2 += v * v;
    return std::pow(r2, 0.5 * (2.0 - n));
  };
  double c = calibrate(unit, L, d);
  FundamentalSolution gamma{
      n,
      [n, c](std::span<const double> x) {
        double r2 = 0;
        for (double v : x) r2 += v * v;
        return c * std::pow(r2, 0.5 * (2.0 - n));
      },
      euclidean_group_law(n),
      d,
      Rational(n),
      c,
      L,
  };
  cache.emplace(n, gamma);
  return gamma;
}

FundamentalSolution gamma_heisenberg() {
  static std::mutex mu;
  static std::optional<FundamentalSolution> cache;
  std::lock_guard<std::mutex> lock(mu);
  if (cache) return *cache;

  Operator L = heisenberg_operator();
  Dilation d{{Rational(1), Rational(1), Rational(2)}};
  PointFn unit = [](std::span<const double> x) {
    double w = sq(x[0]) + sq(x[1]);
    return 1.0 / std::sqrt(sq(w) + 16.0 * sq(x[2]));
  };
  double c = calibrate(unit, L, d);
  FundamentalSolution gamma{
      3,
      [c](std::span<const double> x) {
        double w = sq(x[0]) + sq(x[1]);
        return c / std::sqrt(sq(w) + 16.0 * sq(x[2]));
      },
      heisenberg_group_law(),
      d,
      Rational(4),
      c,
      L,
  };
  cache = gamma;
  return *cache;
}

// ---------------------------------------------------------------------------
// Convolution
// ---------------------------------------------------------------------------

namespace {

const FrozenRule& far_rule(int dim, double radius, int order) {
  static std::mutex mu;
  static std::map<std::tuple<int, long, int>, FrozenRule> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto key = std::make_tuple(dim, std::lround(radius * 1e9), order);
  auto it = cache.find(key);
  if (it == cache.end()) {
    // two cells per axis resolve kernels whose scale is the support size
    it = cache.emplace(key, FrozenRule::composite(Box::cube(dim, -radius, radius), order, 2)).first;
  }
  return it->second;
}

}  // namespace

double convolve(const FundamentalSolution& gamma, const SupportedFunction& f,
                std::span<const double> x, const ConvolutionOptions& opts) {
  const int n = gamma.dim;
  if (f.dim != n) throw DimensionError("convolve: dimension mismatch");

  double x_norm2 = 0;
  for (double v : x) x_norm2 += v * v;
  const bool far = x_norm2 >= sq(opts.far_factor * f.radius);

  if (far) {
    const FrozenRule& rule = far_rule(n, f.radius, opts.far_order);
    double acc = 0;
    Eigen::VectorXd xv(n);
    for (int k = 0; k < n; ++k) xv[k] = x[static_cast<std::size_t>(k)];
    for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
      double fy = f.f(as_span(rule.nodes[q]));
      if (fy == 0.0) continue;
      Eigen::VectorXd z = conv_point(gamma.group, as_span(rule.nodes[q]), x);
      acc += rule.weights[q] * fy * gamma(as_span(z));
    }
    return acc;
  }

  // near/inside the support: adaptive with a smooth excision around y = x
  Integrand integrand = [&](std::span<const double> y) {
    double fy = f.f(y);
    if (fy == 0.0) return 0.0;
    Eigen::VectorXd z = conv_point(gamma.group, y, x);
    double rho = gamma.norm(as_span(z));
    if (rho <= 0.5 * opts.excision) return 0.0;
    double cut = smoothstep(rho / opts.excision - 0.5);
    return cut * fy * gamma(as_span(z));
  };
  QuadratureOptions qopts;
  qopts.rel_tol = opts.rel_tol;
  qopts.abs_tol = 1e-12;
  qopts.max_evals = 40'000'000;
  return integrate_adaptive(integrand, Box::cube(n, -f.radius, f.radius), qopts, "group convolution");
}

namespace {

/// Quadrature geometry graded toward a point, frozen so that repeated
/// evaluations (finite-difference stencils) share identical nodes and the
/// rule error varies smoothly with the evaluation point.
struct GradedRule {
  std::vector<Eigen::VectorXd> nodes;
  std::vector<double> weights;
};

GradedRule graded_rule(const Box& domain, const Eigen::VectorXd& center, double min_diam,
                       double ratio, int order, double cap = 1e9, double cap_radius = 1e9) {
  GradedRule out;
  const int dim = domain.dim();
  std::vector<Box> work{domain};
  while (!work.empty()) {
    Box b = work.back();
    work.pop_back();
    double diam = (b.hi - b.lo).norm();
    double edge = (b.hi - b.lo).maxCoeff();
    double dist = 0;
    for (int k = 0; k < dim; ++k) {
      double c = std::clamp(center[k], b.lo[k], b.hi[k]);
      dist += sq(center[k] - c);
    }
    dist = std::sqrt(dist);
    if (diam > min_diam && (diam > ratio * dist || (dist < cap_radius && edge > cap))) {
      std::vector<Box> cells{b};
      for (int k = 0; k < dim; ++k) {
        std::vector<Box> next;
        for (const Box& c : cells) {
          double mid = 0.5 * (c.lo[k] + c.hi[k]);
          Box l = c, r = c;
          l.hi[k] = mid;
          r.lo[k] = mid;
          next.push_back(l);
          next.push_back(r);
        }
        cells = std::move(next);
      }
      for (auto& c : cells) work.push_back(std::move(c));
      continue;
    }
    FrozenRule piece = FrozenRule::tensor(b, order);
    out.nodes.insert(out.nodes.end(), piece.nodes.begin(), piece.nodes.end());
    out.weights.insert(out.weights.end(), piece.weights.begin(), piece.weights.end());
  }
  return out;
}

/// (Gamma * f)(x) for x in a small neighborhood of x0, on frozen geometry:
/// a smooth partition chi centered at x0 splits the integral; the chi-part is
/// pulled back through z = y^{-1} o x (unit Jacobian: the group is
/// unimodular), which pins the kernel singularity at z = 0 independently of
/// x. Both parts then use fixed graded rules, so x -> u(x) is smooth and
/// finite differences of it converge to derivatives of the true convolution.
class FrozenConvolution {
public:
  FrozenConvolution(const FundamentalSolution& gamma, const SupportedFunction& f,
                    const Eigen::VectorXd& x0)
      : gamma_(gamma), f_(f), x0_(x0), chi_r_(0.5) {
    const int n = gamma.dim;
    // the far sum is annihilated exactly by L (each term is a kernel
    // translate), so a modest rule suffices for the value
    far_ = graded_rule(Box::cube(n, -f.radius, f.radius), x0, 0.1, 0.5, 4);

    // bound the z-range of the pulled-back part by sampling y near x0
    Eigen::VectorXd zmax = Eigen::VectorXd::Constant(n, 1e-3);
    const int grid = 5;
    std::vector<int> idx(static_cast<std::size_t>(n), 0);
    for (;;) {
      Eigen::VectorXd y = x0;
      for (int k = 0; k < n; ++k)
        y[k] += chi_r_ * (2.0 * idx[static_cast<std::size_t>(k)] / (grid - 1) - 1.0);
      for (double off : {-0.05, 0.0, 0.05}) {
        Eigen::VectorXd x = x0;
        x[0] += off;
        Eigen::VectorXd z = conv_point(gamma.group, as_span(y), as_span(x));
        for (int k = 0; k < n; ++k) zmax[k] = std::max(zmax[k], std::abs(z[k]));
      }
      int k = 0;
      while (k < n) {
        if (++idx[static_cast<std::size_t>(k)] < grid) break;
        idx[static_cast<std::size_t>(k)] = 0;
        ++k;
      }
      if (k == n) break;
    }
    Box zbox;
    zbox.lo = -1.5 * zmax;
    zbox.hi = 1.5 * zmax;
    // the pulled-back integrand varies at the chi transition scale, so cell
    // sizes are capped (inside the pulled-back support) on top of the grading
    // toward the singularity
    double cap = 0.09 * (1.0 + 0.5 * x0.norm());
    double cap_radius = 1.2 * zmax.maxCoeff();
    // the homogeneous-ball contribution below rho ~ 2e-3 scales like rho^2,
    // so the grading can stop there (the rho < 1e-4 core is dropped outright)
    GradedRule near = graded_rule(zbox, Eigen::VectorXd::Zero(n), 2e-3, 0.45, 4, cap, cap_radius);

    // everything x-independent is folded into per-node data up front:
    // far part:  sum w (1-chi(y)) f(y) Gamma(compose(y^{-1}, x))
    // near part: sum w Gamma(z) (f chi)(compose(x, z^{-1}))
    for (std::size_t q = 0; q < far_.nodes.size(); ++q) {
      double fy = f.f(as_span(far_.nodes[q]));
      if (fy == 0.0) continue;
      double w = (1.0 - chi(far_.nodes[q])) * fy * far_.weights[q];
      if (w == 0.0) continue;
      far_yinv_.push_back(gamma.group.inverse_at(as_span(far_.nodes[q])));
      far_wf_.push_back(w);
    }
    for (std::size_t q = 0; q < near.nodes.size(); ++q) {
      double rho = gamma_.norm(as_span(near.nodes[q]));
      if (rho < 1e-4) continue;
      double kw = near.weights[q] * gamma_(as_span(near.nodes[q]));
      if (kw == 0.0) continue;
      Eigen::VectorXd zinv = gamma.group.inverse_at(as_span(near.nodes[q]));
      // stencil points stay within ~2h of x0, so nodes whose pullback lands
      // far outside the chi ball can never contribute
      Eigen::VectorXd y0 = gamma.group.compose_at(as_span(x0), as_span(zinv));
      if ((y0 - x0).norm() > chi_r_ + 0.15) continue;
      near_zinv_.push_back(std::move(zinv));
      near_kw_.push_back(kw);
    }
  }

  double chi(const Eigen::VectorXd& y) const {
    return smoothstep(2.0 - 2.0 * (y - x0_).norm() / chi_r_);
  }

  double operator()(const Eigen::VectorXd& x) const {
    std::span<const double> xs(x.data(), static_cast<std::size_t>(x.size()));
    double acc = 0;
    for (std::size_t q = 0; q < far_yinv_.size(); ++q) {
      Eigen::VectorXd z = gamma_.group.compose_at(as_span(far_yinv_[q]), xs);
      acc += far_wf_[q] * gamma_(as_span(z));
    }
    for (std::size_t q = 0; q < near_zinv_.size(); ++q) {
      Eigen::VectorXd y = gamma_.group.compose_at(xs, as_span(near_zinv_[q]));
      double fy = f_.f(as_span(y));
      if (fy == 0.0) continue;
      double w = chi(y);
      if (w == 0.0) continue;
      acc += near_kw_[q] * w * fy;
    }
    return acc;
  }

private:
  const FundamentalSolution& gamma_;
  const SupportedFunction& f_;
  Eigen::VectorXd x0_;
  double chi_r_;
  GradedRule far_;
  std::vector<Eigen::VectorXd> far_yinv_, near_zinv_;
  std::vector<double> far_wf_, near_kw_;
};

/// L applied to a black-box function by central differences (divergence form
/// expanded; coefficient derivatives taken symbolically).
double operator_fd(const Operator& L, const std::function<double(const Eigen::VectorXd&)>& g,
                   const Eigen::VectorXd& y, double h) {
  const int n = L.dim();
  std::span<const double> ys(y.data(), static_cast<std::size_t>(n));
  Eigen::MatrixXd A = L.A_at(ys);
  Eigen::VectorXd b = L.b_at(ys);
  Eigen::VectorXd div_corr = Eigen::VectorXd::Zero(n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) div_corr[j] += eval(diff(L.A(i, j), i + 1), ys);

  double g0 = g(y);
  double result = 0;
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd yp = y, ym = y;
    yp[i] += h;
    ym[i] -= h;
    double gp = g(yp), gm = g(ym);
    result += A(i, i) * (gp - 2 * g0 + gm) / (h * h);
    result += (b[i] + div_corr[i]) * (gp - gm) / (2 * h);
  }
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      if (A(i, j) == 0.0) continue;
      Eigen::VectorXd pp = y, pm = y, mp = y, mm = y;
      pp[i] += h; pp[j] += h;
      pm[i] += h; pm[j] -= h;
      mp[i] -= h; mp[j] += h;
      mm[i] -= h; mm[j] -= h;
      result += 2 * A(i, j) * (g(pp) - g(pm) - g(mp) + g(mm)) / (4 * h * h);
    }
  return result;
}

}  // namespace

CounterexampleReport counterexample(const FundamentalSolution& gamma, const SupportedFunction& f,
                                    const CounterexampleParams& params) {
  if (params.p < 1) throw std::domain_error("counterexample: p must be >= 1");
  if (params.M <= 1) throw std::domain_error("counterexample: M must be > 1");
  if (params.annuli < 4) throw std::domain_error("counterexample: need at least 4 annuli");

  const int n = gamma.dim;
  const double Qd = to_double(gamma.Q);
  CounterexampleReport report;
  report.Q = Qd;
  report.p = params.p;
  report.p_star = to_double(sharp_exponent(gamma.Q));
  report.M = params.M;
  report.seed = params.seed;
  report.samples = params.samples;
  report.theoretical_ratio = std::pow(params.M, Qd + params.p * (2.0 - Qd));

  // shell samples 1 <= |z| < M, shared across annuli (the ratio estimator
  // then rides on the same draw, which collapses its variance)
  std::mt19937_64 rng(params.seed);
  Eigen::VectorXd box_hi(n);
  for (int k = 0; k < n; ++k)
    box_hi[k] = std::pow(params.M, to_double(gamma.dilation.sigma()[static_cast<std::size_t>(k)]));
  double box_volume = 1.0;
  for (int k = 0; k < n; ++k) box_volume *= 2.0 * box_hi[k];

  std::vector<Eigen::VectorXd> shell;
  shell.reserve(static_cast<std::size_t>(params.samples));
  long attempts = 0;
  const long max_attempts = params.samples * 1000;
  std::uniform_real_distribution<double> u01(-1.0, 1.0);
  while (static_cast<long>(shell.size()) < params.samples && attempts < max_attempts) {
    ++attempts;
    Eigen::VectorXd z(n);
    for (int k = 0; k < n; ++k) z[k] = box_hi[k] * u01(rng);
    double norm = gamma.norm(as_span(z));
    if (norm >= 1.0 && norm < params.M) shell.push_back(std::move(z));
  }
  if (static_cast<long>(shell.size()) < params.samples)
    throw NumericalError("shell sampling failed (degenerate dilation geometry?)");
  double shell_volume = box_volume * static_cast<double>(shell.size()) / static_cast<double>(attempts);

  std::vector<bool> in_cone;
  bool cone_active = params.cone_axis.has_value();
  if (cone_active) {
    Eigen::VectorXd axis = params.cone_axis->normalized();
    in_cone.resize(shell.size());
    for (std::size_t i = 0; i < shell.size(); ++i) {
      double cosang = shell[i].normalized().dot(axis);
      in_cone[i] = cosang >= params.cone_cos;
    }
  }

  // precomputed far-field rules: conv_point(y, x) = compose(y^{-1}, x), so the
  // inverted nodes and f-weighted quadrature weights are frozen once; the
  // innermost annulus gets the fine rule, outer annuli a coarse one
  struct FarEval {
    std::vector<Eigen::VectorXd> yinv;
    std::vector<double> wf;
  };
  auto build_far = [&](int order, int cells) {
    FarEval fe;
    FrozenRule rule = FrozenRule::composite(Box::cube(n, -f.radius, f.radius), order, cells);
    for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
      double fy = f.f(as_span(rule.nodes[q]));
      if (fy == 0.0) continue;
      fe.yinv.push_back(gamma.group.inverse_at(as_span(rule.nodes[q])));
      fe.wf.push_back(rule.weights[q] * fy);
    }
    return fe;
  };
  FarEval fine = build_far(8, 2);
  FarEval coarse = build_far(6, 1);
  auto u_at = [&](const FarEval& fe, const Eigen::VectorXd& x) {
    double acc = 0;
    for (std::size_t q = 0; q < fe.yinv.size(); ++q) {
      Eigen::VectorXd z = gamma.group.compose_at(as_span(fe.yinv[q]), as_span(x));
      acc += fe.wf[q] * gamma(as_span(z));
    }
    return -acc;
  };

  // S_k and the sign check ride on the same kernel evaluations
  double worst_u = -std::numeric_limits<double>::infinity();
  std::vector<double> S(static_cast<std::size_t>(params.annuli), 0.0);
  std::vector<double> S_cone(static_cast<std::size_t>(params.annuli), 0.0);
  for (int k = 1; k <= params.annuli; ++k) {
    double lam = std::pow(params.M, k);
    const FarEval& fe = k == 1 ? fine : coarse;
    double acc = 0, acc_cone = 0;
    for (std::size_t i = 0; i < shell.size(); ++i) {
      Eigen::VectorXd xk = gamma.dilation.apply(lam, as_span(shell[i]));
      double u = u_at(fe, xk);
      worst_u = std::max(worst_u, u);
      double term = std::pow(std::abs(u), params.p);
      acc += term;
      if (cone_active && in_cone[i]) acc_cone += term;
    }
    double jac = std::pow(lam, Qd);  // det of the dilation
    S[static_cast<std::size_t>(k - 1)] = jac * shell_volume * acc / static_cast<double>(shell.size());
    if (cone_active)
      S_cone[static_cast<std::size_t>(k - 1)] = jac * shell_volume * acc_cone / static_cast<double>(shell.size());
  }
  report.annulus_lp = S;
  report.u_nonpositive = worst_u <= 1e-12;
  report.worst_sign_violation = std::max(0.0, worst_u);

  auto geometric_ratio = [&](const std::vector<double>& sums) {
    int K = static_cast<int>(sums.size());
    int tail = K / 2;
    double logsum = 0;
    int count = 0;
    for (int k = K - tail; k < K; ++k) {
      double s0 = sums[static_cast<std::size_t>(k - 1)];
      double s1 = sums[static_cast<std::size_t>(k)];
      if (s0 <= 0 || s1 <= 0) continue;
      logsum += std::log(s1 / s0);
      ++count;
    }
    return count > 0 ? std::exp(logsum / count) : 0.0;
  };
  report.measured_ratio = geometric_ratio(S);
  if (cone_active) report.cone_ratio = geometric_ratio(S_cone);

  if (report.measured_ratio >= 0.95)
    report.verdict = "divergent";
  else if (report.measured_ratio <= 0.9)
    report.verdict = "convergent";
  else
    report.verdict = "inconclusive";

  // sign of Lu against f by finite differences of the quadrature values
  double f_scale = std::abs(f.f(std::vector<double>(static_cast<std::size_t>(n), 0.0)));
  if (f_scale == 0) f_scale = 1.0;
  std::vector<Eigen::VectorXd> check_points;
  {
    std::mt19937_64 rng2(params.seed + 1);
    std::uniform_real_distribution<double> in(-0.4, 0.4);
    std::uniform_real_distribution<double> out(1.5, 3.0);
    int half = std::max(1, params.sign_check_points / 2);
    for (int i = 0; i < half; ++i) {
      Eigen::VectorXd p(n);
      for (int k = 0; k < n; ++k) p[k] = in(rng2);
      check_points.push_back(std::move(p));
    }
    for (int i = half; i < params.sign_check_points; ++i) {
      Eigen::VectorXd p(n);
      for (int k = 0; k < n; ++k) p[k] = out(rng2) * (i % 2 == 0 ? 1.0 : -1.0);
      check_points.push_back(std::move(p));
    }
  }
  const double h = 0.012;
  double worst_rel = 0;
  for (const auto& x0 : check_points) {
    FrozenConvolution conv(gamma, f, x0);
    auto u_fd = [&](const Eigen::VectorXd& x) { return -conv(x); };
    double lu = operator_fd(gamma.op, u_fd, x0, h);
    double fx = f.f(as_span(x0));
    worst_rel = std::max(worst_rel, std::abs(lu - fx) / f_scale);
  }
  report.lu_residual_rel = worst_rel;
  report.lu_matches_f = worst_rel <= 1e-2;
  return report;
}

// ---------------------------------------------------------------------------
// Mollification
// ---------------------------------------------------------------------------

namespace {

double mollifier_mass(int dim, double eps) {
  static std::mutex mu;
  static std::map<std::pair<int, long>, double> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto key = std::make_pair(dim, std::lround(eps * 1e12));
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  BumpFunction j{dim, eps};
  double m = j.mass(1e-8);
  cache.emplace(key, m);
  return m;
}

}  // namespace

double mollify(const PointFn& u, const GroupLaw& G, double eps, std::span<const double> x,
               double rel_tol) {
  const int n = G.dim;
  if (eps <= 0) throw std::domain_error("mollify: eps must be positive");
  BumpFunction j{n, eps};
  double mass = mollifier_mass(n, eps);

  Integrand integrand = [&](std::span<const double> y) {
    double w = j(y);
    if (w == 0.0) return 0.0;
    Eigen::VectorXd p = G.compose_at(y, x);
    return w * u(as_span(p));
  };
  QuadratureOptions opts;
  opts.rel_tol = rel_tol * 0.1;
  opts.abs_tol = 1e-12;
  double val = integrate_adaptive(integrand, Box::cube(n, -eps, eps), opts, "group mollification");
  return val / mass;
}

double CutoffSequence::operator()(int m, std::span<const double> x) const {
  double r = 0;
  for (double v : x) r += v * v;
  r = std::sqrt(r);
  return smoothstep(static_cast<double>(m) + 1.0 - r);
}

// ---------------------------------------------------------------------------
// Composition gadgets
// ---------------------------------------------------------------------------

Gadget Gadget::sqrt_shift_power(double p) {
  if (p < 1) throw std::domain_error("sqrt_shift_power needs p >= 1");
  return {Kind::SqrtShiftPower, p, Expr::constant(0)};
}

Gadget Gadget::shifted_concave_power(double p) {
  if (p <= 0 || p >= 1) throw std::domain_error("shifted_concave_power needs 0 < p < 1");
  return {Kind::ShiftedConcavePower, p, Expr::constant(0)};
}

Gadget Gadget::quartic_junction_power(double p) {
  if (p < 1) throw std::domain_error("quartic_junction_power needs p >= 1");
  return {Kind::QuarticJunctionPower, p, Expr::constant(0)};
}

Gadget Gadget::primitive_of(Expr f) {
  if (f.max_var() > 1) throw std::domain_error("primitive_of needs a univariate integrand");
  return {Kind::PrimitiveOfFunction, 0.0, std::move(f)};
}

GadgetValues gadget_eval(const Gadget& g, double t) {
  switch (g.kind) {
    case Gadget::Kind::SqrtShiftPower: {
      const double p = g.p;
      if (t == 0.0) return {0.0, 0.0, p == 1.0 ? 1.0 : 0.0};
      double s = std::sqrt(1.0 + t * t);
      double sm1 = t * t / (1.0 + s);  // sqrt(1+t^2) - 1 without cancellation
      double F = std::pow(sm1, p);
      double dF = p * std::pow(sm1, p - 1.0) * (t / s);
      double d2F = p * (p - 1.0) * std::pow(sm1, p - 2.0) * (t * t) / (s * s) +
                   p * std::pow(sm1, p - 1.0) / (s * s * s);
      return {F, dF, d2F};
    }
    case Gadget::Kind::ShiftedConcavePower: {
      if (t < 0) throw std::domain_error("shifted_concave_power is defined for t >= 0");
      const double p = g.p;
      double F = std::pow(1.0 + t, p) - 1.0;
      double dF = p * std::pow(1.0 + t, p - 1.0);
      double d2F = p * (p - 1.0) * std::pow(1.0 + t, p - 2.0);
      return {F, dF, d2F};
    }
    case Gadget::Kind::QuarticJunctionPower: {
      const double p = g.p;
      if (t <= 0.0) return {0.0, 0.0, 0.0};
      if (t < 1e-3) {
        // leading series: F = (t^4/4)^p up to a relative O(t^4) correction
        double c = std::pow(0.25, p);
        return {c * std::pow(t, 4 * p), 4 * p * c * std::pow(t, 4 * p - 1),
                4 * p * (4 * p - 1) * c * std::pow(t, 4 * p - 2)};
      }
      double t4 = t * t * t * t;
      double gq = std::pow(1.0 + t4, 0.25);
      double gm1 = gq - 1.0;
      double dg = t * t * t * std::pow(1.0 + t4, -0.75);
      double d2g = 3.0 * t * t * std::pow(1.0 + t4, -1.75);
      double F = std::pow(gm1, p);
      double dF = p * std::pow(gm1, p - 1.0) * dg;
      double d2F = p * (p - 1.0) * std::pow(gm1, p - 2.0) * dg * dg + p * std::pow(gm1, p - 1.0) * d2g;
      return {F, dF, d2F};
    }
    case Gadget::Kind::PrimitiveOfFunction: {
      CompiledExpr f(g.f);
      Expr dfe = diff(g.f, 1);
      CompiledExpr df(dfe);
      auto f1 = [&](double s) {
        std::array<double, 1> pt{s};
        return f(pt);
      };
      double F = 0.0;
      if (t > 0.0)
        F = integrate_adaptive_1d(f1, 0.0, t, 1e-10, 1e-14, "gadget primitive");
      else if (t < 0.0)
        F = -integrate_adaptive_1d(f1, t, 0.0, 1e-10, 1e-14, "gadget primitive");
      std::array<double, 1> pt{t};
      return {F, f(pt), df(pt)};
    }
  }
  throw std::logic_error("corrupt gadget");
}

}  // namespace liouville
