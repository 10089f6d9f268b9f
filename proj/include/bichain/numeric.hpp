#pragma once

#include <cmath>
#include <cstdint>
#include <sstream>
#include <iomanip>
#include <string>
#include <type_traits>
#include <vector>

#include "bichain/rational.hpp"

namespace bichain {

/// Which number type carries probabilities. `Rational` keeps everything in Q
/// (exponentials come from an ExpTable, never from a transcendental call);
/// `Double` is the fast path.
enum class Backend { Rational, Double };

struct NumericBackend {
  Backend mode = Backend::Rational;
  /// Precision of Taylor-synthesized exponentials, |error| <= 2^-r.
  int error_exponent = 64;
};

/// Arithmetic hooks shared by the templated engines. Specialized for the two
/// backends only.
template <class Num>
struct NumTraits;

template <>
struct NumTraits<Rational> {
  static Rational from_rational(const Rational& q) { return q; }
  static Rational from_int(std::int64_t v) { return Rational(static_cast<long>(v)); }
  static double to_double(const Rational& q) { return q.get_d(); }
  static bool is_zero(const Rational& q) { return sgn(q) == 0; }
  static bool is_one(const Rational& q) { return q == 1; }
  static Rational power(const Rational& q, std::uint64_t e) { return bichain::pow(q, e); }
  static Rational binom(std::uint64_t n, std::uint64_t k) { return Rational(bichain::binomial(n, k)); }
  static std::string format(const Rational& q) { return bichain::to_string(q); }
};

template <>
struct NumTraits<double> {
  static double from_rational(const Rational& q) { return q.get_d(); }
  static double from_int(std::int64_t v) { return static_cast<double>(v); }
  static double to_double(double v) { return v; }
  static bool is_zero(double v) { return v == 0.0; }
  static bool is_one(double v) { return v == 1.0; }
  static double power(double x, std::uint64_t e) {
    if (e == 0) return 1.0;  // 0^0 = 1
    return std::pow(x, static_cast<double>(e));
  }
  static double binom(std::uint64_t n, std::uint64_t k) {
    if (k > n) return 0.0;
    if (n < 1000) {
      // Exact enough and cheaper than lgamma for the populations we see.
      double r = 1.0;
      std::uint64_t kk = k < n - k ? k : n - k;
      for (std::uint64_t i = 1; i <= kk; ++i) {
        r = r * static_cast<double>(n - kk + i) / static_cast<double>(i);
      }
      return r;
    }
    return std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0));
  }
  static std::string format(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
  }
};

/// A success probability carried together with its complement so that the
/// double backend can keep both sides accurate (expm1 / exp).
template <class Num>
struct SuccessProb {
  Num success;  ///< 1 - e^{-T(u)}
  Num failure;  ///< e^{-T(u)}
};

/// B(m; n, p) with the 0^0 = 1 convention, given p and 1-p separately.
template <class Num>
Num binomial_pmf(std::uint64_t m, std::uint64_t n, const SuccessProb<Num>& p) {
  using T = NumTraits<Num>;
  if (m > n) return T::from_int(0);
  if constexpr (std::is_same_v<Num, double>) {
    if (n >= 1000) {
      if ((m > 0 && p.success == 0.0) || (m < n && p.failure == 0.0)) return 0.0;
      double lp = m == 0 ? 0.0 : static_cast<double>(m) * std::log(p.success);
      double lq = m == n ? 0.0 : static_cast<double>(n - m) * std::log(p.failure);
      return std::exp(std::lgamma(n + 1.0) - std::lgamma(m + 1.0) - std::lgamma(n - m + 1.0) + lp + lq);
    }
  }
  return T::binom(n, m) * T::power(p.success, m) * T::power(p.failure, n - m);
}

/// All of B(0..n; n, p).
template <class Num>
std::vector<Num> binomial_pmf_row(std::uint64_t n, const SuccessProb<Num>& p) {
  std::vector<Num> row;
  row.reserve(n + 1);
  for (std::uint64_t m = 0; m <= n; ++m) row.push_back(binomial_pmf<Num>(m, n, p));
  return row;
}

}  // namespace bichain
