#pragma once

#include "liouville/dilation.hpp"
#include "liouville/fields.hpp"
#include "liouville/group.hpp"
#include "liouville/kolmogorov.hpp"

#include <optional>
#include <string>

namespace liouville {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Lens defaults carried by the config (flags can override).
struct LensParams {
  double R = 4.0;
  double eps = 1.0;
  std::optional<double> h;    // default 1/64 in 2D, 1/16 in 3D
  std::optional<double> reg;  // default 0 when A(0) is definite, else 0.05
};

/// Parsed problem description: either an explicit operator ([operator] with
/// A and b, optional [group]/[dilation]) or a constant-matrix block
/// ([kolmogorov] with A and B), exactly one of the two.
struct OperatorConfig {
  std::string name;
  int dim = 0;       // total coordinates (time included)
  bool time = false; // last coordinate is t, drift carries the -d/dt slot

  std::optional<Operator> op;
  std::optional<GroupLaw> group;
  std::optional<Dilation> dilation;
  std::optional<KolmogorovSpec> kolmogorov;
  std::optional<GroupLawPath> group_path;  // for kolmogorov-built laws
  std::string group_note;
  LensParams lens;

  const Operator& the_operator() const { return *op; }
  bool has_group() const { return group.has_value(); }
};

/// Sectioned key-value format; see the README for the grammar. Errors carry
/// the line number.
OperatorConfig parse_config(const std::string& text, const std::string& name);
OperatorConfig load_config(const std::string& path);

}  // namespace liouville
