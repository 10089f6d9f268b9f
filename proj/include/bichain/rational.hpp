#pragma once

#include <gmpxx.h>

#include <cstdint>
#include <string>
#include <string_view>

namespace bichain {

using Rational = mpq_class;
using Integer = mpz_class;

/// Parses "p/q" or "n" (decimal, optional leading '-', q > 0). The result is
/// canonicalized. Throws SyntaxError on anything else.
Rational parse_rational(std::string_view text);

/// Exact rendering: "n" for integers, "p/q" otherwise.
std::string to_string(const Rational& value);

Rational pow(const Rational& base, std::uint64_t exponent);

Integer binomial(std::uint64_t n, std::uint64_t k);

}  // namespace bichain
