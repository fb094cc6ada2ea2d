#pragma once

#include "liouville/config.hpp"
#include "liouville/fundamental.hpp"
#include "liouville/lens.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace liouville {

struct CheckEntry {
  std::string name;
  std::string status;  // "pass" | "fail" | "skip" | "info"
  std::string method;
  std::string detail;
  std::optional<double> residual;
};

struct CheckOptions {
  int hormander_depth = 4;
  int hormander_points = 100;
  std::uint64_t seed = 2024;
  double tol = 1e-8;  // invariance pass tolerance
};

struct CheckReport {
  std::string fixture;
  std::vector<CheckEntry> entries;
  std::vector<std::pair<std::string, std::string>> quantities;  // exact rational strings
  bool passed = false;
};

/// The hypothesis pipeline: coefficient checks, bracket-generated rank, group
/// axioms + invariance + unimodularity, constant-matrix classification,
/// dilation compatibility and the critical integrability exponent.
CheckReport run_check(const OperatorConfig& cfg, const CheckOptions& opts = {});

struct RepresentationOptions {
  std::optional<double> R, eps, h, reg;
  std::string csv_path;  // dump measures when nonempty
};

struct RepresentationReport {
  double R = 0, eps = 0, h = 0, reg = 0;
  long interior_nodes = 0, boundary_nodes = 0;
  double mu_sum = 0, mu_min = 0, nu_min = 0, nu_sum = 0;
  std::vector<std::pair<std::string, double>> residuals;  // test function -> residual
  bool mass_ok = false, positive_ok = false, residual_ok = false;
  bool passed = false;
  std::string csv_path;
};

RepresentationReport run_representation(const OperatorConfig& cfg, const RepresentationOptions& opts);

struct CounterexampleOptions {
  double p = 2.0;
  double M = 2.0;
  int annuli = 8;
  long samples = 100000;
  std::uint64_t seed = 20240817;
  std::string kernel;  // "", "euclidean", "heisenberg"
};

CounterexampleReport run_counterexample(const OperatorConfig& cfg, const CounterexampleOptions& opts);

struct SharpReport {
  Rational Q{0};
  std::optional<Rational> p_star;
  std::string note;
};

SharpReport run_sharp(const OperatorConfig& cfg);

// serialization (stable key order, bit-identical for identical inputs)
std::string to_json(const CheckReport& r);
std::string to_text(const CheckReport& r);
std::string to_json(const RepresentationReport& r);
std::string to_text(const RepresentationReport& r);
std::string to_json(const CounterexampleReport& r);
std::string to_text(const CounterexampleReport& r);
std::string to_json(const SharpReport& r, const std::string& fixture);
std::string to_text(const SharpReport& r, const std::string& fixture);
std::string classification_to_json(const Classification& c, const std::string& fixture);
std::string classification_to_text(const Classification& c, const std::string& fixture);

}  // namespace liouville
