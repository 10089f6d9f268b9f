#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "bichain/error.hpp"
#include "bichain/model.hpp"
#include "bichain/semantics.hpp"
#include "oracles.hpp"

using namespace bichain;

namespace {

Rational q(const char* text) { return parse_rational(text); }

BinomialChain sir(Count s, Count i, Count r, const char* eb, const char* eg) {
  return parse_model(oracle::sir_json(s, i, r, eb, eg));
}

// A -> B and A -> C, both constant.
BinomialChain fork(Count a) {
  return parse_model(R"({"compartments":["A","B","C"],"initial":{"A":)" + std::to_string(a) +
                     R"(},"transfers":[{"from":"A","to":"B","offset":"1"},{"from":"A","to":"C","offset":"1"}],
      "exp_table":{"entries":[{"from":"A","to":"B","var":"offset","value":"1/2"},
                              {"from":"A","to":"C","var":"offset","value":"1/3"}]}})");
}

}  // namespace

TEST(BinomPmf, Examples) {
  EXPECT_EQ(binom_pmf<Rational>(0, 0, q("3/7")), 1);
  EXPECT_EQ(binom_pmf<Rational>(1, 2, q("1/2")), q("1/2"));
  EXPECT_EQ(binom_pmf<Rational>(2, 3, q("1/3")), q("2/9"));
  EXPECT_THROW(binom_pmf<Rational>(3, 2, q("1/2")), DomainError);
  EXPECT_THROW(binom_pmf<Rational>(0, 2, q("3/2")), DomainError);
  EXPECT_DOUBLE_EQ(binom_pmf<double>(2, 3, 1.0 / 3), 2.0 / 9);
}

TEST(SuccessProb, FromTable) {
  BinomialChain c = sir(2, 2, 0, "1/2", "2/3");
  Kernel<Rational> k(c);
  EXPECT_EQ(k.success_prob(0, 1, {2, 2, 0}).success, q("3/4"));
  EXPECT_EQ(k.success_prob(0, 1, {2, 2, 0}).failure, q("1/4"));
  EXPECT_EQ(k.success_prob(0, 1, {2, 0, 2}).success, 0);
  EXPECT_EQ(k.success_prob(1, 2, {2, 2, 0}).success, q("1/3"));
  EXPECT_THROW(k.success_prob(0, 2, {2, 2, 0}), DomainError);
}

TEST(SuccessProb, MissingTableSlotIsAnError) {
  BinomialChain c = parse_model(R"({"compartments":["A","B"],"initial":{"A":1},
    "transfers":[{"from":"A","to":"B","offset":"1"}],"exp_table":{"entries":[]}})");
  EXPECT_THROW(Kernel<Rational>{c}, DomainError);
}

TEST(ApplyWitness, Examples) {
  WitnessMatrix zero(3, std::vector<Count>(3, 0));
  EXPECT_EQ(apply_witness({4, 1, 2}, zero), (StateVector{4, 1, 2}));

  WitnessMatrix m = zero;
  m[0][1] = 1;
  m[1][2] = 1;
  EXPECT_EQ(apply_witness({1, 1, 0}, m), (StateVector{0, 1, 1}));

  WitnessMatrix f = zero;
  f[0][1] = 1;
  f[0][2] = 1;
  bool clamped = false;
  EXPECT_EQ(apply_witness({1, 0, 0}, f, &clamped), (StateVector{0, 1, 1}));
  EXPECT_TRUE(clamped);
  apply_witness({1, 1, 0}, m, &clamped);
  EXPECT_FALSE(clamped);
}

TEST(Witnesses, Counts) {
  BinomialChain c = sir(1, 1, 0, "1/2", "1/2");
  auto all = enumerate_witnesses(c, {1, 1, 0});
  ASSERT_EQ(all.size(), 4u);
  // Row-major over the support, first entry most significant, ascending.
  EXPECT_EQ(all[0].first[0][1], 0);
  EXPECT_EQ(all[0].first[1][2], 0);
  EXPECT_EQ(all[1].first[1][2], 1);
  EXPECT_EQ(all[2].first[0][1], 1);
  EXPECT_EQ(enumerate_witnesses(c, {0, 0, 0}).size(), 1u);

  BinomialChain empty = parse_model(R"({"compartments":["A","B"],"initial":{"A":5}})");
  EXPECT_EQ(enumerate_witnesses(empty, {5, 0}).size(), 1u);

  EXPECT_THROW(enumerate_witnesses(c, {6, 6, 0}, 10), ResourceError);
}

TEST(Witnesses, SatisfyConstraints) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    BinomialChain c = oracle::random_acyclic_chain(rng);
    auto sup = support(c);
    for_each_witness(c, c.initial(), [&](const WitnessMatrix& m, const StateVector&) {
      for (std::size_t i = 0; i < c.size(); ++i) {
        for (std::size_t j = 0; j < c.size(); ++j) {
          if (m[i][j] == 0) continue;
          EXPECT_NE(std::find(sup.begin(), sup.end(), IndexPair{i, j}), sup.end());
          EXPECT_LE(m[i][j], c.initial()[i]);
        }
      }
    });
  }
}

TEST(TransitionProb, Examples) {
  BinomialChain c = sir(1, 1, 0, "1/2", "2/3");
  Kernel<Rational> k(c);
  EXPECT_EQ(transition_prob(k, {1, 1, 0}, {0, 1, 1}), q("1/6"));
  EXPECT_GT(transition_prob(k, {1, 1, 0}, {1, 1, 0}), 0);
  EXPECT_EQ(transition_prob(k, {1, 1, 0}, {2, 0, 0}), 0);
}

TEST(TransitionProb, ClampedOutcomesAreSummed) {
  BinomialChain c = fork(1);
  Kernel<Rational> k(c);
  // Both transfers fire: clamps A at zero and still lands in (0,1,1).
  EXPECT_EQ(transition_prob(k, {1, 0, 0}, {0, 1, 1}), q("1/2") * q("2/3"));
  auto split = successors_by_clamp(k, {1, 0, 0});
  EXPECT_EQ((split[{{0, 1, 1}, true}]), q("1/3"));
  EXPECT_EQ((split[{{0, 1, 0}, false}]), q("1/2") * q("1/3"));
}

TEST(CanTransition, Examples) {
  BinomialChain c = sir(1, 1, 0, "1/2", "1/2");
  EXPECT_TRUE(can_transition(c, {1, 1, 0}, {0, 1, 1}));
  EXPECT_FALSE(can_transition(c, {1, 0, 0}, {0, 1, 0}));
  EXPECT_TRUE(can_transition(c, {1, 1, 0}, {1, 1, 0}));
}

TEST(CanTransition, MatchesPositiveProbabilityOnSir) {
  for (Count n = 1; n <= 6; ++n) {
    BinomialChain c = sir(n - 1, 1, 0, "1/2", "2/3");
    Kernel<Rational> k(c);
    for (Count a = 0; a <= n; ++a) {
      for (Count b = 0; a + b <= n; ++b) {
        StateVector u{a, b, n - a - b};
        for (Count x = 0; x <= n; ++x) {
          for (Count y = 0; x + y <= n; ++y) {
            StateVector w{x, y, n - x - y};
            EXPECT_EQ(can_transition(c, u, w), sgn(transition_prob(k, u, w)) > 0);
          }
        }
      }
    }
  }
}

TEST(Successors, RowsSumToOneAndMatchOracle) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 40; ++trial) {
    BinomialChain c = oracle::random_acyclic_chain(rng);
    Kernel<Rational> k(c);
    for (const StateVector& u : oracle::reachable(c)) {
      auto got = successors(k, u);
      Rational total = 0;
      for (const auto& [w, p] : got) total += p;
      ASSERT_EQ(total, 1);
      ASSERT_EQ(got, oracle::step(c, u));
    }
  }
}

TEST(Successors, BackendsAgreeWithSynthesizedTable) {
  for (Count n = 1; n <= 10; ++n) {
    BinomialChain c = parse_model(R"({"compartments":["S","I","R"],"initial":{"S":)" + std::to_string(n - 1) +
                                  R"(,"I":1},"transfers":[{"from":"S","to":"I","coeffs":{"I":"1/5"}},
                                      {"from":"I","to":"R","offset":"1/3"}]})");
    Kernel<Rational> exact(c, NumericBackend{Backend::Rational, 64});
    Kernel<double> fast(c);
    for (const StateVector& u : {c.initial(), StateVector{n / 2, n - n / 2, 0}}) {
      auto a = successors(exact, u);
      auto b = successors(fast, u);
      for (const auto& [w, p] : a) EXPECT_NEAR(p.get_d(), b[w], 1e-9);
    }
  }
}

TEST(Absorbing, Structural) {
  Kernel<Rational> k(sir(3, 0, 2, "1/2", "1/2"));
  EXPECT_TRUE(k.is_absorbing({3, 0, 2}));
  EXPECT_FALSE(k.is_absorbing({3, 1, 1}));
  EXPECT_FALSE(k.is_absorbing({0, 1, 4}));
}

TEST(Taylor, FirstOrderTruncation) {
  EXPECT_EQ(taylor_partial_sum(q("1/2"), 1), q("1/2"));
  EXPECT_EQ(taylor_partial_sum(q("1/2"), 0), 1);
}

TEST(Taylor, Examples) {
  EXPECT_LE(oracle::mpfr_abs_error(taylor_exp_neg(1, 1, 10), 1, 1), std::ldexp(1.0, -10));
  EXPECT_LE(oracle::mpfr_abs_error(taylor_exp_neg(1, 2, 20), 1, 2), std::ldexp(1.0, -20));
  EXPECT_EQ(taylor_exp_neg_complement(1, 2, 20), 1 - taylor_exp_neg(1, 2, 20));
  EXPECT_EQ(taylor_terms(3, 5), 23u);
  EXPECT_THROW(taylor_exp_neg(0, 1, 5), DomainError);
  EXPECT_THROW(taylor_exp_neg(1, 1, 0), DomainError);
  EXPECT_THROW(taylor_exp_neg(1000, 1, 8, 1000), ResourceError);
}

TEST(Taylor, BoundOnGrid) {
  for (std::uint64_t a = 1; a <= 10; ++a) {
    for (std::uint64_t b = 1; b <= 10; ++b) {
      for (int r : {4, 8, 16, 32}) {
        EXPECT_LE(oracle::mpfr_abs_error(taylor_exp_neg(a, b, r), a, b), std::ldexp(1.0, -r))
            << a << "/" << b << " r=" << r;
      }
    }
  }
}

TEST(Taylor, ApproxExpNegStaysInUnitInterval) {
  for (const char* x : {"0", "1/3", "5/2", "7"}) {
    Rational v = approx_exp_neg(q(x), 16);
    EXPECT_GE(v, 0);
    EXPECT_LE(v, 1);
    EXPECT_NEAR(v.get_d(), std::exp(-q(x).get_d()), std::ldexp(1.0, -16));
  }
}

TEST(Taylor, SynthesizedTableFillsEverySlot) {
  BinomialChain c = parse_model(R"({"compartments":["S","I","R"],"initial":{"S":3,"I":1},
    "transfers":[{"from":"S","to":"I","coeffs":{"I":"1/5"}},{"from":"I","to":"R","offset":"1/3"}]})");
  ExpTable t = synthesize_exp_table(c, 30);
  EXPECT_EQ(t.error_exponent, 30);
  ASSERT_TRUE(t.entries.at({0, 1})[2]);
  ASSERT_TRUE(t.entries.at({1, 2})[0]);
  EXPECT_FALSE(t.entries.at({0, 1})[0]);
  EXPECT_NEAR(t.entries.at({0, 1})[2]->get_d(), std::exp(-0.2), 1e-9);
}

TEST(Sampling, EmptySupportReturnsInput) {
  BinomialChain c = parse_model(R"({"compartments":["A","B"],"initial":{"A":5,"B":2}})");
  Kernel<double> k(c);
  for (std::uint64_t seed = 0; seed < 10; ++seed) EXPECT_EQ(sample_transition(k, {5, 2}, seed), (StateVector{5, 2}));
}

TEST(Sampling, RecoveryOnlyAndFrequency) {
  Kernel<double> k(sir(0, 1, 0, "1/2", "1/2"));
  Rng rng(2024);
  int recovered = 0;
  const int n = 10000;
  for (int s = 0; s < n; ++s) {
    StateVector w = sample_transition(k, {0, 1, 0}, rng);
    ASSERT_TRUE(w == (StateVector{0, 1, 0}) || w == (StateVector{0, 0, 1}));
    recovered += w[2];
  }
  EXPECT_NEAR(recovered / double(n), 0.5, 3 * std::sqrt(0.25 / n));
}

TEST(Sampling, DeterministicGivenSeed) {
  Kernel<double> k(sir(30, 5, 0, "9/10", "4/5"));
  for (std::uint64_t seed : {1u, 99u, 123456u}) {
    EXPECT_EQ(sample_transition(k, {30, 5, 0}, seed), sample_transition(k, {30, 5, 0}, seed));
  }
  Rng a(42), b(42);
  for (int s = 0; s < 100; ++s) EXPECT_EQ(a.binomial(50, 0.3, 0.7), b.binomial(50, 0.3, 0.7));
}

TEST(Sampling, BinomialDrawMoments) {
  Rng rng(9);
  const int n = 20000;
  double sum = 0;
  for (int s = 0; s < n; ++s) sum += static_cast<double>(rng.binomial(40, 0.25, 0.75));
  EXPECT_NEAR(sum / n, 10.0, 4 * std::sqrt(7.5 / n));
}
