#include "liouville/verify.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

namespace liouville {

using json = nlohmann::json;

namespace {

CheckEntry pass_fail(const std::string& name, bool ok, const std::string& method,
                     const std::string& detail = "", std::optional<double> residual = {}) {
  return {name, ok ? "pass" : "fail", method, detail, residual};
}

Eigen::VectorXd random_point(std::mt19937_64& rng, int dim, double radius) {
  std::uniform_real_distribution<double> u(-radius, radius);
  Eigen::VectorXd p(dim);
  for (int k = 0; k < dim; ++k) p[k] = u(rng);
  return p;
}

}  // namespace

CheckReport run_check(const OperatorConfig& cfg, const CheckOptions& opts) {
  CheckReport report;
  report.fixture = cfg.name;
  const Operator& L = cfg.the_operator();

  auto hyp = operator_hypothesis_report(L, 100, static_cast<unsigned>(opts.seed));
  report.entries.push_back(pass_fail("coefficients: A symmetric", hyp.symmetric, "structural"));
  report.entries.push_back(pass_fail("coefficients: A(x) positive semidefinite", hyp.psd_sampled,
                                     "sampled", "min eigenvalue over 100 points",
                                     hyp.min_eigenvalue));
  report.entries.push_back(pass_fail("coefficients: trace A(0) > 0", hyp.trace_positive, "exact",
                                     "", hyp.trace_at_origin));

  {
    std::mt19937_64 rng(opts.seed + 1);
    std::vector<Eigen::VectorXd> pts;
    for (int i = 0; i < opts.hormander_points; ++i) pts.push_back(random_point(rng, L.dim(), 2.0));
    auto gens = hormander_generators(L);
    auto horm = hormander_check(gens, pts, opts.hormander_depth);
    std::ostringstream detail;
    detail << "rank " << (horm.ranks.empty() ? 0 : *std::min_element(horm.ranks.begin(), horm.ranks.end()))
           << "/" << L.dim() << " at " << pts.size() << " points, depth " << opts.hormander_depth
           << ", " << horm.generated_fields << " bracket fields; " << horm.note;
    report.entries.push_back(
        pass_fail("bracket generation: full rank at sampled points", horm.full_rank, "sampled", detail.str()));
  }

  if (cfg.has_group()) {
    const GroupLaw& G = *cfg.group;
    auto axioms = verify_axioms(G, static_cast<unsigned>(opts.seed));
    for (const auto& c : axioms.checks)
      report.entries.push_back(pass_fail("group axiom: " + c.name, c.pass,
                                         c.exact ? "exact" : "sampled", axioms.note, c.residual));
    auto inv = invariance_residual(L, G, {}, opts.tol, static_cast<unsigned>(opts.seed));
    report.entries.push_back(pass_fail("left invariance of the operator", inv.pass, inv.method,
                                       inv.basis_note + (cfg.group_note.empty() ? "" : "; " + cfg.group_note),
                                       inv.worst_residual));
    auto uni = unimodularity_check(G, static_cast<unsigned>(opts.seed));
    for (const auto& c : uni.checks)
      report.entries.push_back(
          pass_fail("volume invariance: " + c.name, c.pass, c.exact ? "exact" : "sampled", uni.note, c.residual));
  } else {
    report.entries.push_back({"group checks", "skip", "", "no group law supplied", {}});
  }

  if (cfg.kolmogorov) {
    Classification c = classify(*cfg.kolmogorov);
    if (c.hypoelliptic.has_value()) {
      report.entries.push_back(pass_fail("constant-matrix class: hypoelliptic", *c.hypoelliptic, "numeric",
                                         "gram positivity and Kalman rank agree"));
    } else {
      report.entries.push_back({"constant-matrix class: hypoelliptic", "fail", "numeric", c.diagnostic, {}});
    }
    report.entries.push_back(pass_fail("constant-matrix class: trace B = 0 (unimodular)", c.unimodular,
                                       "exact", rational_to_string(cfg.kolmogorov->trace_B())));
    std::ostringstream eigs;
    for (std::size_t i = 0; i < c.eigenvalues.size(); ++i) {
      if (i) eigs << ", ";
      eigs << c.eigenvalues[i].real();
      if (std::abs(c.eigenvalues[i].imag()) > 1e-14) eigs << (c.eigenvalues[i].imag() > 0 ? "+" : "") << c.eigenvalues[i].imag() << "i";
    }
    report.entries.push_back({"bounded-solution rigidity (spectral abscissa <= 0)",
                              "info", "numeric",
                              std::string(c.linf_liouville ? "holds" : "FAILS") +
                                  (c.boundary_case ? " (boundary - inconclusive)" : "") +
                                  "; eigenvalues of B: " + eigs.str(),
                              {}});
  }

  if (cfg.dilation) {
    const Dilation& d = *cfg.dilation;
    if (cfg.has_group()) {
      auto aut = automorphism_check(d, *cfg.group, static_cast<unsigned>(opts.seed));
      report.entries.push_back(
          pass_fail("dilations act as automorphisms", aut.pass, aut.exact ? "exact" : "sampled", aut.note, aut.residual));
    } else {
      report.entries.push_back({"dilations act as automorphisms", "skip", "", "no group law supplied", {}});
    }
    auto degree = homogeneity_degree(L, d, static_cast<unsigned>(opts.seed));
    report.entries.push_back(pass_fail("operator homogeneity degree = 2",
                                       degree.has_value() && *degree == 2,
                                       L.polynomial_coefficients() ? "exact" : "sampled",
                                       degree ? "degree " + rational_to_string(*degree) : "no uniform degree"));
    Rational Q = d.Q();
    report.quantities.emplace_back("Q", rational_to_string(Q));
    if (Q >= 3) {
      report.quantities.emplace_back("p_star", rational_to_string(sharp_exponent(Q)));
    } else {
      report.quantities.emplace_back("p_star", "undefined (Q < 3)");
    }
  }

  report.passed = true;
  for (const auto& e : report.entries)
    if (e.status == "fail") report.passed = false;
  return report;
}

RepresentationReport run_representation(const OperatorConfig& cfg, const RepresentationOptions& opts) {
  const Operator& L = cfg.the_operator();
  LensDomain dom;
  dom.dim = L.dim();
  dom.R = opts.R.value_or(cfg.lens.R);
  dom.eps = opts.eps.value_or(cfg.lens.eps);
  double h = opts.h.value_or(cfg.lens.h.value_or(dom.dim == 2 ? 1.0 / 64 : 1.0 / 16));

  double reg;
  if (opts.reg) {
    reg = *opts.reg;
  } else if (cfg.lens.reg) {
    reg = *cfg.lens.reg;
  } else {
    std::vector<double> origin(static_cast<std::size_t>(L.dim()), 0.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(L.A_at(origin));
    reg = es.eigenvalues().minCoeff() > 1e-10 ? 0.0 : 0.05;
  }

  LensSolver solver(L, dom, h, reg);
  DiscreteMeasures m = solver.extract_measures();

  RepresentationReport rep;
  rep.R = dom.R;
  rep.eps = dom.eps;
  rep.h = h;
  rep.reg = reg;
  rep.interior_nodes = solver.grid().interior_count();
  rep.boundary_nodes = solver.grid().boundary_count();
  rep.mu_sum = m.mu_sum();
  rep.mu_min = m.mu_min();
  rep.nu_min = m.nu_min();
  rep.nu_sum = m.nu_sum();
  double worst = 0;
  for (const auto& u : monomial_basis(L.dim(), 3)) {
    double r = representation_check(L, m, u);
    rep.residuals.emplace_back(render(u), r);
    worst = std::max(worst, r);
  }
  rep.mass_ok = std::abs(rep.mu_sum - 1.0) <= 1e-8;
  rep.positive_ok = rep.mu_min >= -1e-10 && rep.nu_min >= -1e-10;
  rep.residual_ok = worst <= 5e-3;
  rep.passed = rep.mass_ok && rep.positive_ok && rep.residual_ok;

  if (!opts.csv_path.empty()) {
    std::ofstream csv(opts.csv_path);
    if (!csv) throw ConfigError("cannot open CSV output path: " + opts.csv_path);
    csv << "measure";
    for (int k = 1; k <= L.dim(); ++k) csv << ",x" << k;
    csv << ",weight\n";
    const LensGrid& g = solver.grid();
    for (long b = 0; b < g.boundary_count(); ++b) {
      Eigen::VectorXd p = g.boundary_position(b);
      csv << "mu";
      for (int k = 0; k < L.dim(); ++k) csv << "," << p[k];
      csv << "," << m.mu[b] << "\n";
    }
    for (long i = 0; i < g.interior_count(); ++i) {
      Eigen::VectorXd p = g.interior_position(i);
      csv << "nu";
      for (int k = 0; k < L.dim(); ++k) csv << "," << p[k];
      csv << "," << m.nu[i] << "\n";
    }
    rep.csv_path = opts.csv_path;
  }
  return rep;
}

namespace {

bool operator_is(const Operator& L, const Operator& ref) {
  if (L.dim() != ref.dim()) return false;
  for (int i = 0; i < L.dim(); ++i) {
    for (int j = 0; j < L.dim(); ++j)
      if (!struct_equal(simplify(L.A(i, j)), simplify(ref.A(i, j)))) return false;
    if (!struct_equal(simplify(L.b()[static_cast<std::size_t>(i)]),
                      simplify(ref.b()[static_cast<std::size_t>(i)])))
      return false;
  }
  return true;
}

}  // namespace

CounterexampleReport run_counterexample(const OperatorConfig& cfg, const CounterexampleOptions& opts) {
  std::string kernel = opts.kernel;
  if (kernel.empty()) {
    const Operator& L = cfg.the_operator();
    if (operator_is(L, heisenberg_operator()))
      kernel = "heisenberg";
    else if (L.dim() >= 3 && operator_is(L, euclidean_operator(L.dim())))
      kernel = "euclidean";
    else
      throw ConfigError(
          "no packaged fundamental solution matches this operator; "
          "pass --kernel euclidean|heisenberg explicitly");
  }

  FundamentalSolution gamma =
      kernel == "heisenberg" ? gamma_heisenberg() : gamma_euclidean(cfg.the_operator().dim());

  BumpFunction bump{gamma.dim, 1.0};
  SupportedFunction f{gamma.dim, 1.0, [bump](std::span<const double> x) { return bump(x); }};

  CounterexampleParams params;
  params.p = opts.p;
  params.M = opts.M;
  params.annuli = opts.annuli;
  params.samples = opts.samples;
  params.seed = opts.seed;
  return counterexample(gamma, f, params);
}

SharpReport run_sharp(const OperatorConfig& cfg) {
  if (!cfg.dilation) throw ConfigError("sharp exponent needs a [dilation] section");
  SharpReport rep;
  rep.Q = cfg.dilation->Q();
  if (rep.Q >= 3) {
    rep.p_star = sharp_exponent(rep.Q);
  } else {
    rep.note = "critical exponent undefined: homogeneous dimension below 3";
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

std::string to_json(const CheckReport& r) {
  json j;
  j["command"] = "check";
  j["fixture"] = r.fixture;
  j["passed"] = r.passed;
  json checks = json::array();
  for (const auto& e : r.entries) {
    json c;
    c["name"] = e.name;
    c["status"] = e.status;
    if (!e.method.empty()) c["method"] = e.method;
    if (!e.detail.empty()) c["detail"] = e.detail;
    if (e.residual) c["residual"] = *e.residual;
    checks.push_back(c);
  }
  j["checks"] = checks;
  json q;
  for (const auto& [k, v] : r.quantities) q[k] = v;
  j["quantities"] = q;
  return j.dump(2) + "\n";
}

std::string to_text(const CheckReport& r) {
  std::ostringstream out;
  out << "check: " << r.fixture << "\n";
  for (const auto& e : r.entries) {
    out << "  [" << e.status << "] " << e.name;
    if (!e.method.empty()) out << " (" << e.method << ")";
    if (e.residual) out << "  residual=" << *e.residual;
    if (!e.detail.empty()) out << "  -- " << e.detail;
    out << "\n";
  }
  for (const auto& [k, v] : r.quantities) out << "  " << k << " = " << v << "\n";
  out << (r.passed ? "PASS" : "FAIL") << "\n";
  return out.str();
}

std::string to_json(const RepresentationReport& r) {
  json j;
  j["command"] = "representation";
  j["R"] = r.R;
  j["eps"] = r.eps;
  j["h"] = r.h;
  j["reg"] = r.reg;
  j["interior_nodes"] = r.interior_nodes;
  j["boundary_nodes"] = r.boundary_nodes;
  j["mu_sum"] = r.mu_sum;
  j["mu_min"] = r.mu_min;
  j["nu_sum"] = r.nu_sum;
  j["nu_min"] = r.nu_min;
  json res = json::array();
  for (const auto& [name, value] : r.residuals) {
    json e;
    e["u"] = name;
    e["residual"] = value;
    res.push_back(e);
  }
  j["residuals"] = res;
  j["checks"] = {{"mass", r.mass_ok}, {"positivity", r.positive_ok}, {"residuals", r.residual_ok}};
  j["passed"] = r.passed;
  if (!r.csv_path.empty()) j["csv"] = r.csv_path;
  return j.dump(2) + "\n";
}

std::string to_text(const RepresentationReport& r) {
  std::ostringstream out;
  out << "representation formula on the lens R=" << r.R << " eps=" << r.eps << " h=" << r.h
      << " reg=" << r.reg << "\n";
  out << "  nodes: " << r.interior_nodes << " interior, " << r.boundary_nodes << " boundary\n";
  out << "  mu: sum=" << r.mu_sum << " min=" << r.mu_min << "\n";
  out << "  nu: sum=" << r.nu_sum << " min=" << r.nu_min << "\n";
  for (const auto& [name, value] : r.residuals) out << "  residual " << name << " = " << value << "\n";
  if (!r.csv_path.empty()) out << "  measures dumped to " << r.csv_path << "\n";
  out << (r.passed ? "PASS" : "FAIL") << "\n";
  return out.str();
}

std::string to_json(const CounterexampleReport& r) {
  json j;
  j["command"] = "counterexample";
  j["Q"] = r.Q;
  j["p"] = r.p;
  j["p_star"] = r.p_star;
  j["M"] = r.M;
  j["annuli"] = r.annulus_lp;
  j["measured_ratio"] = r.measured_ratio;
  j["theoretical_ratio"] = r.theoretical_ratio;
  j["verdict"] = r.verdict;
  j["seed"] = r.seed;
  j["samples_per_annulus"] = r.samples;
  j["sign_checks"] = {{"u_nonpositive", r.u_nonpositive},
                      {"worst_sign_violation", r.worst_sign_violation},
                      {"lu_matches_f", r.lu_matches_f},
                      {"lu_residual_rel", r.lu_residual_rel}};
  if (r.cone_ratio) j["cone_ratio"] = *r.cone_ratio;
  return j.dump(2) + "\n";
}

std::string to_text(const CounterexampleReport& r) {
  std::ostringstream out;
  out << "tail exponent scan: Q=" << r.Q << " p=" << r.p << " p*=" << r.p_star << " M=" << r.M << "\n";
  out << "  annulus L^p sums:";
  for (double s : r.annulus_lp) out << " " << s;
  out << "\n  measured ratio " << r.measured_ratio << " vs theoretical " << r.theoretical_ratio << "\n";
  out << "  u <= 0: " << (r.u_nonpositive ? "yes" : "NO") << "; |L u - f| rel " << r.lu_residual_rel
      << (r.lu_matches_f ? " (ok)" : " (FAIL)") << "\n";
  if (r.cone_ratio) out << "  cone ratio " << *r.cone_ratio << "\n";
  out << "verdict: " << r.verdict << " (seed " << r.seed << ", " << r.samples << " samples/annulus)\n";
  return out.str();
}

std::string to_json(const SharpReport& r, const std::string& fixture) {
  json j;
  j["command"] = "sharp";
  j["fixture"] = fixture;
  j["Q"] = rational_to_string(r.Q);
  j["Q_value"] = to_double(r.Q);
  if (r.p_star) {
    j["p_star"] = rational_to_string(*r.p_star);
    j["p_star_value"] = to_double(*r.p_star);
  } else {
    j["note"] = r.note;
  }
  return j.dump(2) + "\n";
}

std::string to_text(const SharpReport& r, const std::string& fixture) {
  std::ostringstream out;
  out << "sharp exponent for " << fixture << ": Q = " << rational_to_string(r.Q);
  if (r.p_star)
    out << ", p* = 1 + 2/(Q-2) = " << rational_to_string(*r.p_star) << "\n";
  else
    out << " -- " << r.note << "\n";
  return out.str();
}

std::string classification_to_json(const Classification& c, const std::string& fixture) {
  json j;
  j["command"] = "kolmogorov";
  j["fixture"] = fixture;
  if (c.hypoelliptic.has_value())
    j["hypoelliptic"] = *c.hypoelliptic;
  else
    j["hypoelliptic"] = nullptr;
  j["ipo_positive"] = c.ipo_positive;
  j["kalman_rank"] = c.kalman_rank;
  j["tests_agree"] = c.tests_agree;
  j["unimodular"] = c.unimodular;
  j["linf_liouville"] = c.linf_liouville;
  j["boundary_case"] = c.boundary_case;
  json eigs = json::array();
  for (const auto& ev : c.eigenvalues) eigs.push_back({{"re", ev.real()}, {"im", ev.imag()}});
  j["eigenvalues"] = eigs;
  j["witness_t"] = c.witness_t;
  if (!c.diagnostic.empty()) j["diagnostic"] = c.diagnostic;
  return j.dump(2) + "\n";
}

std::string classification_to_text(const Classification& c, const std::string& fixture) {
  std::ostringstream out;
  out << "constant-matrix classification: " << fixture << "\n";
  out << "  hypoelliptic: "
      << (c.hypoelliptic.has_value() ? (*c.hypoelliptic ? "yes" : "no") : "inconclusive") << "\n";
  out << "  gram positive at witnesses: " << (c.ipo_positive ? "yes" : "no")
      << "; Kalman rank " << c.kalman_rank << "\n";
  out << "  unimodular (trace B = 0): " << (c.unimodular ? "yes" : "no") << "\n";
  out << "  bounded-solution rigidity: " << (c.linf_liouville ? "holds" : "FAILS")
      << (c.boundary_case ? " (boundary - inconclusive)" : "") << "\n";
  out << "  eigenvalues of B:";
  for (const auto& ev : c.eigenvalues) {
    out << " " << ev.real();
    if (std::abs(ev.imag()) > 1e-14) out << (ev.imag() > 0 ? "+" : "") << ev.imag() << "i";
  }
  out << "\n";
  if (!c.diagnostic.empty()) out << "  diagnostic: " << c.diagnostic << "\n";
  return out.str();
}

}  // namespace liouville
