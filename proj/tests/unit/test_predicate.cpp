#include <gtest/gtest.h>

#include "bichain/error.hpp"
#include "bichain/predicate.hpp"
#include "oracles.hpp"

using namespace bichain;

namespace {

BinomialChain sir() { return parse_model(oracle::sir_json(4, 1, 0, "1/2", "1/2")); }

}  // namespace

TEST(Predicate, Comparisons) {
  BinomialChain c = sir();
  EXPECT_TRUE(Predicate::parse("I = 0", c)({5, 0, 0}));
  EXPECT_FALSE(Predicate::parse("I = 0", c)({4, 1, 0}));
  EXPECT_TRUE(Predicate::parse("S + I != 3", c)({1, 1, 3}));
  EXPECT_TRUE(Predicate::parse("2*S - R <= 1", c)({1, 2, 2}));
  EXPECT_FALSE(Predicate::parse("2*S - R < 0", c)({1, 2, 2}));
  EXPECT_TRUE(Predicate::parse("-S + 5 > 0", c)({4, 0, 1}));
  EXPECT_TRUE(Predicate::parse("S == 4 && I >= 1", c)({4, 1, 0}));
  EXPECT_FALSE(Predicate::parse("S == 4 && I >= 2", c)({4, 1, 0}));
}

TEST(Predicate, InitialConstants) {
  BinomialChain c = sir();
  EXPECT_TRUE(Predicate::parse("S + I + R = N0", c)({0, 2, 3}));
  EXPECT_TRUE(Predicate::parse("S >= S_init", c)({4, 0, 1}));
  EXPECT_FALSE(Predicate::parse("S >= S_init", c)({3, 1, 1}));
  EXPECT_TRUE(Predicate::parse("I = S_init + I_init", c)({0, 5, 0}));
}

TEST(Predicate, Keywords) {
  BinomialChain c = sir();
  EXPECT_TRUE(Predicate::parse("true", c)({0, 0, 5}));
  EXPECT_TRUE(Predicate::always(c)({1, 2, 2}));
  EXPECT_FALSE(Predicate::parse("false", c)({1, 2, 2}));
  EXPECT_TRUE(Predicate::parse("false", c).is_false());
}

TEST(Predicate, Errors) {
  BinomialChain c = sir();
  for (const char* bad : {"", "X = 0", "S", "S = ", "S =< 1", "S = 1 &&", "S = 1 & I = 0", "3 * = 1", "Q_init = 1"}) {
    EXPECT_THROW(Predicate::parse(bad, c), SyntaxError) << bad;
  }
}

TEST(Predicate, PrismRendering) {
  BinomialChain c = sir();
  EXPECT_EQ(Predicate::parse("I = 0", c).to_prism(), "(I = 0)");
  EXPECT_EQ(Predicate::parse("2*S - R >= S_init && I != 0", c).to_prism(), "(2*S - R >= S_init) & (I != 0)");
  EXPECT_EQ(Predicate::parse("true", c).to_prism(), "true");
  EXPECT_EQ(Predicate::parse("-I + 3 < N0", c).to_prism(), "(-I + 3 < N0)");
}
