#include "liouville/verify.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace liouville;

namespace {

// exit codes: 0 pass, 1 verification failure, 2 usage/config error,
// 3 numerical non-convergence
constexpr int kExitPass = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitUsage = 2;
constexpr int kExitNumerical = 3;

struct CommonArgs {
  std::string config_path;
  std::string format = "text";
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("config", args.config_path, "path to a fixture/config file")->required();
  cmd->add_option("--format", args.format, "output format")
      ->check(CLI::IsMember({"text", "json"}));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "verification toolkit for invariant second-order operators: hypothesis checks, "
      "constant-matrix classification, representation measures, and tail-exponent scans"};
  app.require_subcommand(1);

  CommonArgs check_args;
  CheckOptions check_opts;
  auto* check = app.add_subcommand("check", "run every applicable hypothesis check");
  add_common(check, check_args);
  check->add_option("--depth", check_opts.hormander_depth, "bracket generation depth");
  check->add_option("--points", check_opts.hormander_points, "rank sample points");
  check->add_option("--seed", check_opts.seed, "sampling seed");
  check->add_option("--tol", check_opts.tol, "invariance pass tolerance");

  CommonArgs kol_args;
  auto* kol = app.add_subcommand("kolmogorov", "classify a constant-matrix operator");
  add_common(kol, kol_args);

  CommonArgs rep_args;
  RepresentationOptions rep_opts;
  double rep_R = -1, rep_eps = -1, rep_h = -1, rep_reg = -1;
  auto* rep = app.add_subcommand("representation", "reconstruct the mean-value measures on the lens");
  add_common(rep, rep_args);
  rep->add_option("--R", rep_R, "lens radius parameter");
  rep->add_option("--eps", rep_eps, "lens overlap parameter");
  rep->add_option("--grid", rep_h, "grid spacing h");
  rep->add_option("--reg", rep_reg, "elliptic regularization");
  rep->add_option("--csv", rep_opts.csv_path, "dump measures (coordinates + weight) to CSV");

  CommonArgs cex_args;
  CounterexampleOptions cex_opts;
  auto* cex = app.add_subcommand("counterexample",
                                 "measure the L^p tail of u = -Gamma*f over dyadic annuli");
  add_common(cex, cex_args);
  cex->add_option("--p", cex_opts.p, "integrability exponent")->required();
  cex->add_option("--ratio", cex_opts.M, "annulus ratio M");
  cex->add_option("--annuli", cex_opts.annuli, "annulus count K");
  cex->add_option("--samples", cex_opts.samples, "Monte Carlo samples per annulus");
  cex->add_option("--seed", cex_opts.seed, "Monte Carlo seed");
  cex->add_option("--kernel", cex_opts.kernel, "fundamental solution override")
      ->check(CLI::IsMember({"euclidean", "heisenberg"}));

  CommonArgs sharp_args;
  auto* sharp = app.add_subcommand("sharp", "homogeneous dimension and critical exponent");
  add_common(sharp, sharp_args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (check->parsed()) {
      OperatorConfig cfg = load_config(check_args.config_path);
      CheckReport report = run_check(cfg, check_opts);
      std::cout << (check_args.format == "json" ? to_json(report) : to_text(report));
      return report.passed ? kExitPass : kExitCheckFailed;
    }
    if (kol->parsed()) {
      OperatorConfig cfg = load_config(kol_args.config_path);
      if (!cfg.kolmogorov) throw ConfigError("kolmogorov command needs a [kolmogorov] config");
      Classification c = classify(*cfg.kolmogorov);
      std::cout << (kol_args.format == "json" ? classification_to_json(c, cfg.name)
                                              : classification_to_text(c, cfg.name));
      return kExitPass;
    }
    if (rep->parsed()) {
      OperatorConfig cfg = load_config(rep_args.config_path);
      if (rep_R > 0) rep_opts.R = rep_R;
      if (rep_eps > 0) rep_opts.eps = rep_eps;
      if (rep_h > 0) rep_opts.h = rep_h;
      if (rep_reg >= 0) rep_opts.reg = rep_reg;
      RepresentationReport report = run_representation(cfg, rep_opts);
      std::cout << (rep_args.format == "json" ? to_json(report) : to_text(report));
      return report.passed ? kExitPass : kExitCheckFailed;
    }
    if (cex->parsed()) {
      OperatorConfig cfg = load_config(cex_args.config_path);
      CounterexampleReport report = run_counterexample(cfg, cex_opts);
      std::cout << (cex_args.format == "json" ? to_json(report) : to_text(report));
      bool ok = report.u_nonpositive && report.lu_matches_f && report.verdict != "inconclusive";
      return ok ? kExitPass : kExitCheckFailed;
    }
    if (sharp->parsed()) {
      OperatorConfig cfg = load_config(sharp_args.config_path);
      SharpReport report = run_sharp(cfg);
      std::cout << (sharp_args.format == "json" ? to_json(report, cfg.name)
                                                : to_text(report, cfg.name));
      return report.p_star.has_value() ? kExitPass : kExitCheckFailed;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ParseError& e) {
    std::cerr << "expression error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitCheckFailed;
  }
  return kExitUsage;
}
