#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <unordered_map>
#include <utility>
#include <vector>

#include "bichain/model.hpp"
#include "bichain/semantics.hpp"

namespace bichain {

struct StateHash {
  std::size_t operator()(const StateVector& v) const noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (Count x : v) {
      h ^= static_cast<std::uint64_t>(x) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    }
    return static_cast<std::size_t>(h);
  }
};

/// Enumerated reachable part of the induced Markov chain.
template <class Num>
struct ExplicitChain {
  std::vector<StateVector> states;
  std::unordered_map<StateVector, std::size_t, StateHash> index;
  /// Row per state: (target position, probability), targets ascending.
  std::vector<std::vector<std::pair<std::size_t, Num>>> trans;
  std::vector<bool> absorbing;
  std::size_t initial = 0;
  /// Topological position of every compartment; defines the lex order.
  std::vector<std::size_t> topo;

  std::size_t size() const noexcept { return states.size(); }
  std::size_t absorbing_count() const;
};

/// w <_lex u after permuting coordinates into topological order.
bool lex_less(const StateVector& w, const StateVector& u, const std::vector<std::size_t>& topo);

/// Breadth-first closure from the initial vector over positive-probability
/// successors. Checks w <=_lex u and |w|_1 <= |u|_1 * k on every transition
/// (equality of norms for closed chains) and throws InvariantError on a
/// violation. Throws ModelError on cyclic chains, ResourceError past the
/// kernel's state cap.
template <class Num>
ExplicitChain<Num> build_reachable(const Kernel<Num>& kernel);

/// Transient states first, each block sorted descending by lex_less.
template <class Num>
ExplicitChain<Num> sort_canonical(const ExplicitChain<Num>& ec);

/// Absorbing set nonempty and reachable from every state.
template <class Num>
bool check_absorbing(const ExplicitChain<Num>& ec);

/// Expected number of steps to absorption, per state (indexed like
/// ec.states). Back substitution in reverse canonical order.
template <class Num>
std::vector<Num> expected_hitting_times(const ExplicitChain<Num>& ec);

using StatePredicate = std::function<bool(const StateVector&)>;

/// Per-state probability of staying in `safe` until `target` holds.
template <class Num>
std::vector<Num> until_probabilities(const ExplicitChain<Num>& ec, const StatePredicate& safe,
                                     const StatePredicate& target);

/// Same, from the initial state.
template <class Num>
Num until_probability(const ExplicitChain<Num>& ec, const StatePredicate& safe, const StatePredicate& target);

/// Probability of reaching `target` from the initial state along steps in
/// which the max with 0 never cuts a compartment.
template <class Num>
Num clamp_free_until_probability(const Kernel<Num>& kernel, const ExplicitChain<Num>& ec,
                                 const StatePredicate& target);

struct MonteCarloResult {
  double mean = 0;
  double std_error = 0;
  double half_width = 0;  ///< 1.96 standard errors
  std::uint64_t runs = 0;
  std::map<StateVector, std::uint64_t> final_states;
};

/// Steps to absorption over independent sampled trajectories, all drawn from
/// one Rng seeded with `seed`. Throws ResourceError when a trajectory exceeds
/// max_steps.
MonteCarloResult monte_carlo_hitting(const Kernel<double>& kernel, std::uint64_t runs, std::uint64_t seed,
                                     std::uint64_t max_steps = 1'000'000);

}  // namespace bichain
