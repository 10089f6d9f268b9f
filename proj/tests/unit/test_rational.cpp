#include <gtest/gtest.h>

#include "bichain/error.hpp"
#include "bichain/numeric.hpp"
#include "bichain/rational.hpp"

using namespace bichain;

TEST(Rational, ParsesAndCanonicalizes) {
  EXPECT_EQ(parse_rational("2/4"), Rational(1, 2));
  EXPECT_EQ(parse_rational("7"), Rational(7));
  EXPECT_EQ(parse_rational("-3/9"), Rational(-1, 3));
  EXPECT_EQ(to_string(parse_rational("6/3")), "2");
  EXPECT_EQ(to_string(parse_rational("10/4")), "5/2");
}

TEST(Rational, RejectsMalformedText) {
  for (const char* bad : {"", "1/0", "1/", "/2", "a", "1.5", "1/-2", " 1", "1/2/3", "+1"}) {
    EXPECT_THROW(parse_rational(bad), SyntaxError) << bad;
  }
}

TEST(Rational, PowAndBinomial) {
  EXPECT_EQ(pow(Rational(2, 3), 3), Rational(8, 27));
  EXPECT_EQ(pow(Rational(0), 0), Rational(1));
  EXPECT_EQ(binomial(5, 2), 10);
  EXPECT_EQ(binomial(60, 30), Integer("118264581564861424"));
  EXPECT_EQ(binomial(3, 4), 0);
}

TEST(BinomialPmf, ZeroToTheZeroIsOne) {
  SuccessProb<Rational> p{Rational(0), Rational(1)};
  EXPECT_EQ(binomial_pmf<Rational>(0, 0, p), 1);
  EXPECT_EQ(binomial_pmf<Rational>(0, 3, p), 1);
  SuccessProb<Rational> one{Rational(1), Rational(0)};
  EXPECT_EQ(binomial_pmf<Rational>(3, 3, one), 1);
}

TEST(BinomialPmf, DoubleLargeNMatchesSmallPath) {
  SuccessProb<double> p{0.3, 0.7};
  double total = 0;
  for (std::uint64_t m = 0; m <= 1500; ++m) total += binomial_pmf<double>(m, 1500, p);
  EXPECT_NEAR(total, 1.0, 1e-9);
}
