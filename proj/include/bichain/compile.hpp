#pragma once

#include <optional>
#include <vector>

#include "bichain/model.hpp"
#include "bichain/scm.hpp"

namespace bichain {

/// A binomial chain compiled to a counter machine, with the bookkeeping needed
/// to map BC states in and out.
struct CompiledScm {
  Scm scm;
  std::size_t main_state = 0;
  std::optional<std::size_t> error_state;  ///< entered when a step clamps
  std::size_t alpha0 = 0, alpha1 = 0;      ///< loop counters
  std::vector<IndexPair> edges;            ///< support, row-major
  std::vector<std::size_t> chi;            ///< transfer accumulator per edge
  std::optional<std::size_t> clamped;      ///< flag counter, non-closed chains only
  /// Disjuncts of the non-absorbing condition, each a set of compartments
  /// that must all be nonzero.
  std::vector<std::vector<std::size_t>> live_clauses;
};

/// One BC step is one trip from `main` back to `main`: every support entry
/// draws its transfer count into an accumulator (inlined binomial loop for
/// constant entries, per-individual parametric Bernoulli stages otherwise),
/// compartments that may clamp are checked, then a single update applies all
/// transfers. Reward 1 is earned on `main` while the state is not absorbing.
/// Needs an acyclic chain with an ExpTable.
CompiledScm compile_bc_to_scm(const BinomialChain& chain);

/// mu: the main-state configuration with compartment counters u and zeroed
/// auxiliaries.
Config embed_state(const CompiledScm& c, const StateVector& u);

/// Compartment counters of a configuration.
StateVector project_state(const CompiledScm& c, const Config& config, std::size_t k);

}  // namespace bichain
