#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <optional>
#include <string>

namespace liouville {

/// Exact rational arithmetic used for all symbolic constants.
using Rational = boost::multiprecision::cpp_rational;
using BigInt = boost::multiprecision::cpp_int;

inline double to_double(const Rational& r) { return static_cast<double>(r); }

inline BigInt numerator(const Rational& r) { return boost::multiprecision::numerator(r); }
inline BigInt denominator(const Rational& r) { return boost::multiprecision::denominator(r); }

inline bool is_integer(const Rational& r) { return denominator(r) == 1; }

/// Renders "p/q", or just "p" for integers.
std::string rational_to_string(const Rational& r);

/// Parses "p", "p/q" or a finite decimal ("2.5" -> 5/2). Empty optional on malformed input.
std::optional<Rational> rational_from_string(const std::string& text);

/// Exact k-th root if it exists (k >= 1, and r >= 0 for even k).
std::optional<Rational> exact_root(const Rational& r, unsigned k);

}  // namespace liouville
