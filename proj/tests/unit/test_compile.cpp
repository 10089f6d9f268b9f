#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "bichain/compile.hpp"
#include "bichain/error.hpp"
#include "bichain/reach.hpp"
#include "bichain/sir.hpp"
#include "oracles.hpp"

using namespace bichain;

namespace {

BinomialChain sir(Count s, Count i, Count r, const char* eb, const char* eg) {
  return parse_model(oracle::sir_json(s, i, r, eb, eg));
}

BinomialChain load(const std::string& name) {
  std::ifstream in(std::string(BICHAIN_MODELS_DIR) + "/" + name);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_model(ss.str());
}

// One main cycle from u, split by whether it passed through the error state.
std::map<std::pair<StateVector, bool>, Rational> cycle(const CompiledScm& c, const StateVector& u) {
  const std::size_t main = c.main_state;
  const std::size_t err = c.error_state.value_or(static_cast<std::size_t>(-1));
  auto d = scm_distribution(c.scm, embed_state(c, u),
                            [&](const Config& k) { return k.state == main || k.state == err; });
  EXPECT_EQ(d.deficit, 0);
  std::map<std::pair<StateVector, bool>, Rational> out;
  for (const auto& [config, p] : d.mass) out[{project_state(c, config, u.size()), config.state == err}] += p;
  return out;
}

void expect_faithful_step(const BinomialChain& chain) {
  CompiledScm c = compile_bc_to_scm(chain);
  Kernel<Rational> k(chain);
  for (const StateVector& u : oracle::reachable(chain)) {
    EXPECT_EQ(cycle(c, u), successors_by_clamp(k, u)) << serialize_model(chain.with_initial(u));
  }
}

Rational compiled_eoe(const BinomialChain& chain) {
  CompiledScm c = compile_bc_to_scm(chain);
  Kernel<Rational> k(chain);
  const std::size_t main = c.main_state;
  const std::size_t n = chain.size();
  auto done = [&](const Config& cfg) { return cfg.state == main && k.is_absorbing(project_state(c, cfg, n)); };
  return scm_expected_reward(c.scm, embed_state(c, chain.initial()), main, done);
}

}  // namespace

TEST(Compile, SirShape) {
  CompiledScm c = compile_bc_to_scm(sir(99, 1, 0, "951229/1000000", "904837/1000000"));
  EXPECT_EQ(c.scm.states, (std::vector<std::string>{"main", "S_I_outer", "S_I_I", "I_R_enter", "I_R_loop", "final"}));
  EXPECT_EQ(c.scm.counters.size(), 7u);
  EXPECT_FALSE(c.error_state);
  EXPECT_FALSE(c.clamped);
  EXPECT_EQ(c.edges, (std::vector<IndexPair>{{0, 1}, {1, 2}}));
  EXPECT_EQ(c.live_clauses, (std::vector<std::vector<std::size_t>>{{1}}));
  EXPECT_EQ(c.scm.initial_counters[0], 99);
  EXPECT_EQ(c.scm.initial_counters[1], 1);
  EXPECT_TRUE(validate_scm(compile_bc_to_scm(sir(2, 1, 0, "1/2", "1/2")).scm).ok());
}

TEST(Compile, SizeDependsOnlyOnStructure) {
  auto a = compile_bc_to_scm(sir(1, 1, 0, "1/2", "1/2"));
  auto b = compile_bc_to_scm(sir(500, 20, 3, "1/3", "2/3"));
  EXPECT_EQ(a.scm.states.size(), b.scm.states.size());
  EXPECT_EQ(a.scm.counters.size(), b.scm.counters.size());
  EXPECT_EQ(a.scm.transitions.size(), b.scm.transitions.size());

  BinomialChain covid = load("covid_single_age.json");
  EXPECT_EQ(compile_bc_to_scm(covid).scm.size(), compile_bc_to_scm(covid.with_initial(StateVector(10, 7))).scm.size());
}

TEST(Compile, EmptySupportEarnsNothing) {
  BinomialChain c = parse_model(R"({"compartments":["A"],"initial":{"A":4},"exp_table":{"entries":[]}})");
  CompiledScm m = compile_bc_to_scm(c);
  Config start = embed_state(m, c.initial());
  EXPECT_EQ(scm_reward(m.scm, start), 0);
  const std::size_t main = m.main_state;
  auto d = scm_distribution(m.scm, start, [main](const Config& k) { return k.state == main; });
  EXPECT_EQ(d.reward, 0);
  ASSERT_EQ(d.mass.size(), 1u);
  EXPECT_EQ(d.mass.begin()->first, start);
}

TEST(Compile, Preconditions) {
  BinomialChain cyc = parse_model(R"({"compartments":["A","B"],"initial":{"A":1},
    "transfers":[{"from":"A","to":"B","offset":"1"},{"from":"B","to":"A","offset":"1"}],
    "exp_table":{"entries":[{"from":"A","to":"B","var":"offset","value":"1/2"},
                            {"from":"B","to":"A","var":"offset","value":"1/2"}]}})");
  EXPECT_THROW(compile_bc_to_scm(cyc), ModelError);
  BinomialChain bare = parse_model(R"({"compartments":["A","B"],"initial":{"A":1},
    "transfers":[{"from":"A","to":"B","offset":"1"}]})");
  EXPECT_THROW(compile_bc_to_scm(bare), ModelError);
}

TEST(Compile, EmbedAndProject) {
  CompiledScm c = compile_bc_to_scm(sir(2, 1, 0, "1/2", "1/2"));
  Config cfg = embed_state(c, {3, 4, 5});
  EXPECT_EQ(cfg.state, c.main_state);
  EXPECT_EQ(project_state(c, cfg, 3), (StateVector{3, 4, 5}));
  for (std::size_t x = 3; x < cfg.counters.size(); ++x) EXPECT_EQ(cfg.counters[x], 0);
}

TEST(Compile, SirStepIsFaithful) {
  expect_faithful_step(sir(1, 1, 0, "1/2", "1/2"));
  expect_faithful_step(sir(2, 1, 0, "1/3", "3/4"));
  expect_faithful_step(sir(1, 2, 0, "3/4", "1/2"));
}

TEST(Compile, NonClosedStepIsFaithful) {
  BinomialChain fork = parse_model(R"({"compartments":["A","B","C"],"initial":{"A":2},
    "transfers":[{"from":"A","to":"B","offset":"1"},{"from":"A","to":"C","coeffs":{"B":"1/2"}}],
    "exp_table":{"entries":[{"from":"A","to":"B","var":"offset","value":"1/2"},
                            {"from":"A","to":"C","var":"B","value":"1/3"}]}})");
  CompiledScm c = compile_bc_to_scm(fork);
  ASSERT_TRUE(c.error_state);
  expect_faithful_step(fork);
  EXPECT_TRUE(validate_scm(c.scm).ok());
}

TEST(Compile, RandomChainsStepFaithfully) {
  std::mt19937_64 rng(43);
  oracle::RandomChainOptions opt;
  opt.max_k = 3;
  opt.max_population = 3;
  for (int trial = 0; trial < 15; ++trial) expect_faithful_step(oracle::random_acyclic_chain(rng, opt));
}

TEST(Compile, ExpectedRewardIsEoe) {
  for (auto [s, i] : {std::pair<Count, Count>{1, 1}, {2, 1}, {1, 2}}) {
    BinomialChain c = sir(s, i, 0, "1/2", "1/2");
    EXPECT_EQ(compiled_eoe(c), sir_expected_eoe(to_sir_chain<Rational>(c)).at(s, 0));
  }
  std::mt19937_64 rng(47);
  oracle::RandomChainOptions opt;
  opt.max_k = 3;
  opt.max_population = 3;
  for (int trial = 0; trial < 10; ++trial) {
    BinomialChain c = oracle::random_acyclic_chain(rng, opt);
    EXPECT_EQ(compiled_eoe(c), oracle::expected_steps(c)) << serialize_model(c);
  }
}

TEST(Compile, CovidSmallPopulation) {
  BinomialChain covid = load("covid_single_age.json");
  StateVector v(10, 0);
  v[0] = 1;
  v[3] = 1;
  BinomialChain small = covid.with_initial(v);
  CompiledScm c = compile_bc_to_scm(small);
  EXPECT_EQ(c.scm.states.size(), 37u);
  Kernel<Rational> k(small);
  EXPECT_EQ(cycle(c, v), successors_by_clamp(k, v));
}

TEST(Compile, SimulatedRewardTracksEoe) {
  BinomialChain c = sir(4, 1, 0, "3/4", "1/2");
  double exact = sir_expected_eoe(to_sir_chain<double>(c)).at(4, 0);
  CompiledScm m = compile_bc_to_scm(c);
  const std::size_t main = m.main_state;
  Kernel<double> k(c);
  const int runs = 4000;
  double sum = 0, sq = 0;
  for (int r = 0; r < runs; ++r) {
    auto stop = [&](const Config& cfg) { return cfg.state == main && k.is_absorbing(project_state(m, cfg, 3)); };
    auto t = scm_simulate(m.scm, static_cast<std::uint64_t>(r), 1'000'000, stop, std::nullopt, false);
    double v = t.reward.get_d();
    sum += v;
    sq += v * v;
  }
  double mean = sum / runs;
  double se = std::sqrt((sq / runs - mean * mean) / runs);
  EXPECT_NEAR(mean, exact, 3 * se);
}
