#include "ftap/rational.hpp"

#include "ftap/error.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <string>

namespace ftap {

Rational rational_from_decimal(std::string_view text) {
    std::size_t pos = 0;
    bool negative = false;
    if (pos < text.size() && (text[pos] == '+' || text[pos] == '-')) {
        negative = text[pos] == '-';
        ++pos;
    }
    boost::multiprecision::cpp_int mantissa = 0;
    long scale = 0;
    bool digits = false;
    bool seen_point = false;
    for (; pos < text.size(); ++pos) {
        const char ch = text[pos];
        if (ch >= '0' && ch <= '9') {
            mantissa = mantissa * 10 + (ch - '0');
            digits = true;
            if (seen_point) {
                --scale;
            }
        } else if (ch == '.' && !seen_point) {
            seen_point = true;
        } else {
            break;
        }
    }
    if (!digits) {
        throw InputError("not a decimal number: '" + std::string(text) + "'");
    }
    if (pos < text.size() && (text[pos] == 'e' || text[pos] == 'E')) {
        long exponent = 0;
        const char* first = text.data() + pos + 1;
        const char* last = text.data() + text.size();
        if (first < last && *first == '+') {
            ++first;
        }
        auto [ptr, ec] = std::from_chars(first, last, exponent);
        if (ec != std::errc{} || ptr != last) {
            throw InputError("bad exponent in '" + std::string(text) + "'");
        }
        scale += exponent;
        pos = text.size();
    }
    if (pos != text.size()) {
        throw InputError("trailing characters in number '" + std::string(text) + "'");
    }
    Rational value(mantissa);
    boost::multiprecision::cpp_int ten_pow = boost::multiprecision::pow(boost::multiprecision::cpp_int(10),
                                                                          static_cast<unsigned>(std::labs(scale)));
    if (scale >= 0) {
        value *= ten_pow;
    } else {
        value /= ten_pow;
    }
    return negative ? Rational(-value) : value;
}

Rational rational_from_double(double x) {
    if (!std::isfinite(x)) {
        throw InputError("non-finite value has no rational form");
    }
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
    if (ec != std::errc{}) {
        throw InputError("cannot format double");
    }
    return rational_from_decimal(std::string_view(buf, static_cast<std::size_t>(ptr - buf)));
}

std::string to_string(const Rational& r) {
    const auto num = boost::multiprecision::numerator(r);
    const auto den = boost::multiprecision::denominator(r);
    if (den == 1) {
        return num.str();
    }
    return num.str() + "/" + den.str();
}

double to_double(const Rational& r) { return r.convert_to<double>(); }

}  // namespace ftap
