#pragma once

#include <gmpxx.h>

#include <string>

namespace qsdsim {

/// Arbitrary-precision rational used by the exact-arithmetic paths.
using Rational = mpq_class;

/// Exact conversion (every finite double is a dyadic rational).
inline Rational to_rational(double x) {
  Rational r(x);
  r.canonicalize();
  return r;
}

inline Rational make_rational(long num, long den) {
  Rational r(num, den);
  r.canonicalize();
  return r;
}

inline std::string to_string(const Rational& r) { return r.get_str(); }

}  // namespace qsdsim
