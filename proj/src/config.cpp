#include "liouville/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>

namespace liouville {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

struct RawConfig {
  // section -> key -> (value, line)
  std::map<std::string, std::map<std::string, std::pair<std::string, int>>> entries;

  bool has(const std::string& sec) const { return entries.count(sec) > 0; }
  const std::pair<std::string, int>* find(const std::string& sec, const std::string& key) const {
    auto s = entries.find(sec);
    if (s == entries.end()) return nullptr;
    auto k = s->second.find(key);
    return k == s->second.end() ? nullptr : &k->second;
  }
  std::string require(const std::string& sec, const std::string& key) const {
    const auto* v = find(sec, key);
    if (!v) throw ConfigError("missing key '" + key + "' in section [" + sec + "]");
    return v->first;
  }
};

RawConfig tokenize(const std::string& text) {
  RawConfig raw;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("line " + std::to_string(lineno) + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      raw.entries[section];
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    if (section.empty())
      throw ConfigError("line " + std::to_string(lineno) + ": key outside any section");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (!raw.entries[section].emplace(key, std::make_pair(value, lineno)).second)
      throw ConfigError("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
  }
  return raw;
}

int parse_int(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    int v = std::stoi(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("");
    return v;
  } catch (...) {
    throw ConfigError("malformed integer for " + what + ": '" + s + "'");
  }
}

double parse_double(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("");
    return v;
  } catch (...) {
    throw ConfigError("malformed number for " + what + ": '" + s + "'");
  }
}

bool parse_bool(const std::string& s, const std::string& what) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw ConfigError("malformed boolean for " + what + ": '" + s + "'");
}

Expr parse_entry(const std::string& text, int space_dim, bool allow_time, const std::string& what) {
  try {
    return parse_expression(text, space_dim, allow_time);
  } catch (const ParseError& e) {
    throw ConfigError(what + ": " + e.what());
  }
}

std::vector<std::vector<Rational>> parse_rational_matrix(const std::string& text, int n,
                                                         const std::string& what) {
  auto rows = split(text, ';');
  if (static_cast<int>(rows.size()) != n)
    throw ConfigError(what + ": expected " + std::to_string(n) + " rows");
  std::vector<std::vector<Rational>> out;
  for (const auto& row : rows) {
    auto cells = split(row, ',');
    if (static_cast<int>(cells.size()) != n)
      throw ConfigError(what + ": expected " + std::to_string(n) + " entries per row");
    std::vector<Rational> r;
    for (const auto& cell : cells) {
      auto q = rational_from_string(cell);
      if (!q) throw ConfigError(what + ": malformed rational '" + cell + "'");
      r.push_back(*q);
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace

OperatorConfig parse_config(const std::string& text, const std::string& name) {
  RawConfig raw = tokenize(text);
  OperatorConfig cfg;
  cfg.name = name;

  const bool has_op = raw.has("operator");
  const bool has_kolmogorov = raw.has("kolmogorov");
  if (has_op == has_kolmogorov)
    throw ConfigError("config must contain exactly one of [operator] or [kolmogorov]");

  if (has_kolmogorov) {
    int n = parse_int(raw.require("kolmogorov", "n"), "[kolmogorov] n");
    if (n < 1) throw ConfigError("[kolmogorov] n must be positive");
    auto A = parse_rational_matrix(raw.require("kolmogorov", "A"), n, "[kolmogorov] A");
    auto B = parse_rational_matrix(raw.require("kolmogorov", "B"), n, "[kolmogorov] B");
    try {
      cfg.kolmogorov.emplace(n, std::move(A), std::move(B));
    } catch (const DimensionError& e) {
      throw ConfigError(e.what());
    }
    cfg.dim = n + 1;
    cfg.time = true;
    cfg.op = build_operator(*cfg.kolmogorov);
    BuiltGroup built = build_group(*cfg.kolmogorov);
    cfg.group = std::move(built.law);
    cfg.group_path = built.path;
    cfg.group_note = built.note;
  } else {
    cfg.dim = parse_int(raw.require("operator", "dim"), "[operator] dim");
    if (cfg.dim < 1) throw ConfigError("[operator] dim must be positive");
    if (const auto* t = raw.find("operator", "time")) cfg.time = parse_bool(t->first, "time");
    const int space_dim = cfg.time ? cfg.dim - 1 : cfg.dim;
    if (space_dim < 1) throw ConfigError("time-flagged operator needs dim >= 2");

    auto rows = split(raw.require("operator", "A"), ';');
    if (static_cast<int>(rows.size()) != cfg.dim)
      throw ConfigError("[operator] A: expected " + std::to_string(cfg.dim) + " rows");
    std::vector<std::vector<Expr>> A;
    for (const auto& row : rows) {
      auto cells = split(row, ',');
      if (static_cast<int>(cells.size()) != cfg.dim)
        throw ConfigError("[operator] A: expected " + std::to_string(cfg.dim) + " entries per row");
      std::vector<Expr> r;
      for (const auto& cell : cells) r.push_back(parse_entry(cell, space_dim, cfg.time, "[operator] A"));
      A.push_back(std::move(r));
    }
    auto bcells = split(raw.require("operator", "b"), ',');
    if (static_cast<int>(bcells.size()) != cfg.dim)
      throw ConfigError("[operator] b: expected " + std::to_string(cfg.dim) + " entries");
    std::vector<Expr> b;
    for (const auto& cell : bcells) b.push_back(parse_entry(cell, space_dim, cfg.time, "[operator] b"));

    if (cfg.time) {
      // the time slot: A row/column must vanish, the drift picks up -d/dt
      for (int k = 0; k < cfg.dim; ++k) {
        if (!simplify(A[static_cast<std::size_t>(cfg.dim) - 1][static_cast<std::size_t>(k)]).is_zero() ||
            !simplify(A[static_cast<std::size_t>(k)][static_cast<std::size_t>(cfg.dim) - 1]).is_zero())
          throw ConfigError("time-flagged operator: the last row/column of A must be zero");
      }
      b[static_cast<std::size_t>(cfg.dim) - 1] =
          simplify(b[static_cast<std::size_t>(cfg.dim) - 1] - Expr::constant(1));
    }
    try {
      cfg.op.emplace(cfg.dim, std::move(A), std::move(b), cfg.time);
    } catch (const DimensionError& e) {
      throw ConfigError(e.what());
    }

    if (raw.has("group")) {
      auto ccells = split(raw.require("group", "compose"), ',');
      if (static_cast<int>(ccells.size()) != cfg.dim)
        throw ConfigError("[group] compose: expected " + std::to_string(cfg.dim) + " expressions");
      std::vector<Expr> compose;
      for (const auto& cell : ccells) compose.push_back(parse_entry(cell, 2 * cfg.dim, false, "[group] compose"));
      std::vector<Expr> inverse;
      if (const auto* inv = raw.find("group", "inverse")) {
        auto icells = split(inv->first, ',');
        if (static_cast<int>(icells.size()) != cfg.dim)
          throw ConfigError("[group] inverse: expected " + std::to_string(cfg.dim) + " expressions");
        for (const auto& cell : icells) inverse.push_back(parse_entry(cell, cfg.dim, false, "[group] inverse"));
      }
      cfg.group = make_symbolic_law(cfg.dim, std::move(compose), std::move(inverse));
    }
  }

  if (raw.has("dilation")) {
    auto cells = split(raw.require("dilation", "sigma"), ',');
    if (static_cast<int>(cells.size()) != cfg.dim)
      throw ConfigError("[dilation] sigma: expected " + std::to_string(cfg.dim) + " exponents");
    std::vector<Rational> sigma;
    for (const auto& cell : cells) {
      auto q = rational_from_string(cell);
      if (!q) throw ConfigError("[dilation] sigma: malformed rational '" + cell + "'");
      sigma.push_back(*q);
    }
    try {
      cfg.dilation.emplace(std::move(sigma));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("[dilation] ") + e.what());
    }
  }

  if (raw.has("lens")) {
    if (const auto* v = raw.find("lens", "R")) cfg.lens.R = parse_double(v->first, "[lens] R");
    if (const auto* v = raw.find("lens", "eps")) cfg.lens.eps = parse_double(v->first, "[lens] eps");
    if (const auto* v = raw.find("lens", "h")) cfg.lens.h = parse_double(v->first, "[lens] h");
    if (const auto* v = raw.find("lens", "reg")) cfg.lens.reg = parse_double(v->first, "[lens] reg");
  }
  return cfg;
}

OperatorConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  std::string name = path;
  auto slash = name.find_last_of('/');
  if (slash != std::string::npos) name = name.substr(slash + 1);
  auto dot = name.find_last_of('.');
  if (dot != std::string::npos) name = name.substr(0, dot);
  return parse_config(ss.str(), name);
}

}  // namespace liouville
