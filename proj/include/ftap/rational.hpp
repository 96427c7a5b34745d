#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <string>
#include <string_view>

namespace ftap {

using Rational = boost::multiprecision::cpp_rational;

/// Exact value of a decimal literal such as "-12.5e-3". Throws InputError.
Rational rational_from_decimal(std::string_view text);

/// Exact value of the shortest decimal string that round-trips to `x`, so a
/// price written as 0.1 in a file becomes 1/10 rather than the binary double.
Rational rational_from_double(double x);

/// "p/q" (or "p" when q == 1).
std::string to_string(const Rational& r);

double to_double(const Rational& r);

}  // namespace ftap
