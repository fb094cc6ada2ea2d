#include "liouville/rational.hpp"

#include <cctype>
#include <cstdlib>

namespace liouville {

std::string rational_to_string(const Rational& r) {
  std::string s = numerator(r).str();
  if (!is_integer(r)) {
    s += "/";
    s += denominator(r).str();
  }
  return s;
}

std::optional<Rational> rational_from_string(const std::string& text) {
  std::string s;
  for (char c : text)
    if (!std::isspace(static_cast<unsigned char>(c))) s += c;
  if (s.empty()) return std::nullopt;

  bool negative = false;
  std::size_t i = 0;
  if (s[0] == '+' || s[0] == '-') {
    negative = (s[0] == '-');
    i = 1;
  }
  std::string digits, frac, den;
  enum { INT, FRAC, DEN } state = INT;
  for (; i < s.size(); ++i) {
    char c = s[i];
    if (std::isdigit(static_cast<unsigned char>(c))) {
      (state == INT ? digits : state == FRAC ? frac : den) += c;
    } else if (c == '.' && state == INT) {
      state = FRAC;
    } else if (c == '/' && state == INT && den.empty()) {
      state = DEN;
    } else {
      return std::nullopt;
    }
  }
  if (digits.empty() && frac.empty()) return std::nullopt;
  if (state == DEN && den.empty()) return std::nullopt;

  Rational value;
  if (state == DEN) {
    BigInt d(den);
    if (d == 0) return std::nullopt;
    value = Rational(BigInt(digits.empty() ? "0" : digits), d);
  } else {
    BigInt num(digits.empty() ? "0" : digits);
    Rational base(num);
    if (!frac.empty()) {
      BigInt scale = 1;
      for (std::size_t k = 0; k < frac.size(); ++k) scale *= 10;
      base += Rational(BigInt(frac), scale);
    }
    value = base;
  }
  return negative ? -value : value;
}

namespace {

std::optional<BigInt> integer_nth_root(const BigInt& n, unsigned k) {
  if (n < 0) return std::nullopt;
  if (n == 0 || n == 1 || k == 1) return n;
  BigInt lo = 0, hi = n < 2 ? BigInt(2) : n;
  while (lo < hi) {
    BigInt mid = (lo + hi + 1) / 2;
    BigInt p = 1;
    bool over = false;
    for (unsigned i = 0; i < k; ++i) {
      p *= mid;
      if (p > n) {
        over = true;
        break;
      }
    }
    if (over)
      hi = mid - 1;
    else
      lo = mid;
  }
  BigInt p = 1;
  for (unsigned i = 0; i < k; ++i) p *= lo;
  if (p == n) return lo;
  return std::nullopt;
}

}  // namespace

std::optional<Rational> exact_root(const Rational& r, unsigned k) {
  if (k == 0) return std::nullopt;
  if (k == 1) return r;
  bool negative = r < 0;
  if (negative && k % 2 == 0) return std::nullopt;
  Rational a = negative ? Rational(-r) : r;
  auto rn = integer_nth_root(numerator(a), k);
  if (!rn) return std::nullopt;
  auto rd = integer_nth_root(denominator(a), k);
  if (!rd) return std::nullopt;
  Rational root(*rn, *rd);
  return negative ? Rational(-root) : root;
}

}  // namespace liouville
