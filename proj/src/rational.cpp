#include "bichain/rational.hpp"

#include <cctype>

#include "bichain/error.hpp"

namespace bichain {

namespace {

bool all_digits(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s) {
    if (!std::isdigit(static_cast<unsigned char>(c))) return false;
  }
  return true;
}

}  // namespace

Rational parse_rational(std::string_view text) {
  std::string_view body = text;
  bool negative = false;
  if (!body.empty() && body.front() == '-') {
    negative = true;
    body.remove_prefix(1);
  }
  auto slash = body.find('/');
  std::string_view num = body.substr(0, slash);
  std::string_view den = slash == std::string_view::npos ? std::string_view("1") : body.substr(slash + 1);
  if (!all_digits(num) || !all_digits(den)) {
    throw SyntaxError("malformed rational '" + std::string(text) + "'", 0);
  }
  Integer n{std::string(num)}, d{std::string(den)};
  if (d == 0) {
    throw SyntaxError("zero denominator in rational '" + std::string(text) + "'", 0);
  }
  Rational value(n, d);
  value.canonicalize();
  return negative ? Rational(-value) : value;
}

std::string to_string(const Rational& value) {
  if (value.get_den() == 1) return value.get_num().get_str();
  return value.get_num().get_str() + "/" + value.get_den().get_str();
}

Rational pow(const Rational& base, std::uint64_t exponent) {
  Integer num, den;
  mpz_pow_ui(num.get_mpz_t(), base.get_num_mpz_t(), exponent);
  mpz_pow_ui(den.get_mpz_t(), base.get_den_mpz_t(), exponent);
  // Already coprime, so no canonicalization needed.
  Rational result;
  mpz_swap(mpq_numref(result.get_mpq_t()), num.get_mpz_t());
  mpz_swap(mpq_denref(result.get_mpq_t()), den.get_mpz_t());
  return result;
}

Integer binomial(std::uint64_t n, std::uint64_t k) {
  Integer result;
  mpz_bin_uiui(result.get_mpz_t(), n, k);
  return result;
}

}  // namespace bichain
