#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bichain/model.hpp"
#include "bichain/rational.hpp"

namespace bichain {

/// Sparse row: (counter index, coefficient).
using SparseRow = std::vector<std::pair<std::size_t, Rational>>;

/// sum coeffs . c <= bound
struct Constraint {
  SparseRow coeffs;
  Rational bound;
  friend bool operator==(const Constraint&, const Constraint&) = default;
};

/// A . c <= b, one Constraint per row. The empty guard is always satisfied.
struct Guard {
  std::vector<Constraint> rows;
  friend bool operator==(const Guard&, const Guard&) = default;

  static Guard always() { return {}; }
  /// c_x >= 1
  static Guard positive(std::size_t x);
  /// c_x <= 0
  static Guard zero(std::size_t x);
  Guard operator&(const Guard& other) const;
};

/// counter <- coeffs . c + constant
struct Assignment {
  std::size_t counter;
  SparseRow coeffs;
  Rational constant;
  friend bool operator==(const Assignment&, const Assignment&) = default;
};

/// U c + r where U is the identity on every counter without an Assignment.
/// Assignments are simultaneous.
struct Update {
  std::vector<Assignment> rows;
  friend bool operator==(const Update&, const Update&) = default;

  static Update identity() { return {}; }
  Update& set(std::size_t x, Rational value);
  Update& copy(std::size_t x, std::size_t from);
  Update& add(std::size_t x, Count delta);
  Update& assign(std::size_t x, SparseRow coeffs, Rational constant = 0);
};

struct ScmTransition {
  std::size_t source;
  Guard guard;
  Update update;
  std::size_t target;
  Rational prob;
};

struct ScmReward {
  std::size_t state;
  Guard guard;
  Rational value;
};

/// Stochastic counter machine with rewards.
struct Scm {
  std::vector<std::string> states;
  std::size_t initial_state = 0;
  std::vector<std::string> counters;
  std::vector<Count> initial_counters;
  std::vector<ScmTransition> transitions;
  std::vector<ScmReward> rewards;

  std::size_t add_state(std::string name);
  std::size_t add_counter(std::string name, Count initial = 0);
  void add_transition(std::size_t source, Guard guard, Update update, std::size_t target, Rational prob = 1);
  std::optional<std::size_t> state_index(std::string_view name) const;
  std::optional<std::size_t> counter_index(std::string_view name) const;
  std::size_t size() const noexcept { return states.size() + counters.size(); }
};

struct Config {
  std::size_t state = 0;
  std::vector<Count> counters;
  friend auto operator<=>(const Config&, const Config&) = default;
};

std::string render_config(const Scm& m, const Config& c);

bool holds(const Guard& g, const std::vector<Count>& c);
/// Throws InvariantError when the result is negative or not an integer.
std::vector<Count> apply(const Update& u, const std::vector<Count>& c);

/// (successor, probability) for every enabled transition, in declaration order.
std::vector<std::pair<Config, Rational>> scm_step(const Scm& m, const Config& from);

Rational scm_reward(const Scm& m, const Config& c);

struct ScmReport {
  std::vector<std::string> violations;
  std::size_t explored = 0;
  bool budget_exceeded = false;
  bool ok() const { return violations.empty() && !budget_exceeded; }
};

/// Breadth-first exploration from the initial configuration (or `from`)
/// checking determinism, probability closure and update integrality.
ScmReport validate_scm(const Scm& m, std::size_t budget = 1'000'000, std::optional<Config> from = std::nullopt);

using ConfigPredicate = std::function<bool(const Config&)>;

struct ScmDistribution {
  std::map<Config, Rational> mass;  ///< first-hit distribution over stop configs
  Rational deficit;                 ///< mass stuck in dead ends
  Rational reward;                  ///< expected reward collected before stopping
  std::size_t max_steps = 0;        ///< longest path to a stop configuration
  std::size_t explored = 0;
};

/// Exact first-hit distribution over `stop` configurations. `from` is always
/// expanded, even when it satisfies `stop`. Throws ResourceError past the
/// budget and DomainError when non-stop configurations form a cycle.
ScmDistribution scm_distribution(const Scm& m, const Config& from, const ConfigPredicate& stop,
                                 std::size_t budget = 1'000'000);

/// Expected reward accumulated from `from` until a configuration satisfying
/// `target` is reached, exploring the chain of `anchor`-state configurations
/// (one cycle at a time) exhaustively and solving the resulting linear system
/// exactly.
Rational scm_expected_reward(const Scm& m, const Config& from, std::size_t anchor, const ConfigPredicate& target,
                             std::size_t budget = 100'000);

struct ScmTrace {
  std::vector<Config> configs;  ///< every visited config, start included (when recorded)
  Config final;
  std::size_t steps = 0;
  Rational reward;  ///< collected on every config left
};

/// One random run, seeded. Stops when `stop` holds (the start included), at a
/// configuration whose only move is an identity self-loop, or at a dead end.
/// Throws ResourceError after max_steps.
ScmTrace scm_simulate(const Scm& m, std::uint64_t seed, std::size_t max_steps,
                      const ConfigPredicate& stop = nullptr, std::optional<Config> from = std::nullopt,
                      bool record = true);

std::string render_guard(const Guard& g, const Scm& m);
std::string render_update(const Update& u, const Scm& m);

/// Deterministic text form: states alphabetical, transitions sorted by
/// (source, target, probability), rationals exact.
std::string dump_scm(const Scm& m);

// ---------------------------------------------------------------------------
// Gadgets

/// Binomial gadget: q0 copies chi1 into chi3 and zeroes chi2; q1 runs chi3
/// Bernoulli(p) trials counting successes in chi2; q2 is terminal.
Scm build_binomial_gadget(const Rational& p);

/// Parametric Bernoulli gadget over counters c1..cn, result r, scratch t.
/// Reaches q_y with probability p0 * prod p_l^{c_l}, otherwise q_x with r
/// incremented. `ps` = {p0, p1, ..., pn}.
Scm build_bernoulli_gadget(const std::vector<Rational>& ps);

}  // namespace bichain
