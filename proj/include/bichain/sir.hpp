#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "bichain/model.hpp"
#include "bichain/numeric.hpp"

namespace bichain {

/// (m1, m2, m3) = (S, I, R).
using SirState = std::array<Count, 3>;

template <class Num>
struct SirChain {
  Count N = 0;
  Count s0 = 0, i0 = 0, r0 = 0;
  Num e_beta;   ///< e^{-h beta}
  Num e_gamma;  ///< e^{-h gamma}

  /// Checks s0 + i0 + r0 = N, nonnegative counts and e_beta, e_gamma in (0,1].
  void validate() const;
  SirState initial() const { return {s0, i0, r0}; }
};

/// n1 <= m1 and m3 <= n3 <= m2 + m3 (both states over the same N).
bool sir_successor_ok(const SirState& m, const SirState& n);

/// Product of the infection and recovery binomials; 0 when n is not a
/// successor of m.
template <class Num>
Num sir_direct_prob(const SirChain<Num>& chain, const SirState& m, const SirState& n);

/// Ratio P(m, n) / P((m1-1, m2, m3+1), n). Needs n1 < m1 and m3 < n3 <= m2+m3;
/// throws DomainError otherwise.
template <class Num>
Num sir_alpha(const SirChain<Num>& chain, const SirState& m, const SirState& n);

/// Transition probabilities from every state, indexed by source (m1, m3).
/// Row of a transient source m holds targets n1 in [0, m1] and
/// n3 in [m3, m3 + m2]; absorbing rows hold only the diagonal.
template <class Num>
class TransitionTable {
 public:
  struct Row {
    Count m1 = 0, m3 = 0;
    Count width = 1;  ///< m2 + 1
    std::vector<Num> values;  ///< values[n1 * width + (n3 - m3)]
  };

  explicit TransitionTable(Count n);

  Count population() const noexcept { return n_; }
  /// X(m, n); zero outside the stored pattern.
  Num at(const SirState& m, const SirState& n) const;
  const Row& row(Count m1, Count m3) const { return rows_[slot(m1, m3)]; }
  Row& row(Count m1, Count m3) { return rows_[slot(m1, m3)]; }

 private:
  std::size_t slot(Count m1, Count m3) const;
  Count n_;
  std::vector<Row> rows_;
};

/// The dynamic program: rows for M = m1 + m2 ascending; base entries with
/// n1 = m1 or n3 = m3 from the direct formula, the rest from
/// X(m, n) = alpha(m, n) X((m1-1, m2, m3+1), n). Throws ResourceError when
/// N > cap.
template <class Num>
TransitionTable<Num> dp_transition_table(const SirChain<Num>& chain, Count cap = 128);

/// Expected end-of-epidemic time for every SIR state.
template <class Num>
struct SirHittingTimes {
  Count N = 0;
  std::vector<Num> values;  ///< by (m1, m3) slot

  const Num& at(Count m1, Count m3) const;
  /// All states in colex order: m3 ascending, then m1 descending.
  std::vector<SirState> colex_order() const;
};

/// Back substitution over colex order, streaming the DP one stratum
/// M = m1 + m2 at a time so memory stays O(N^3).
template <class Num>
SirHittingTimes<Num> sir_expected_eoe(const SirChain<Num>& chain);

/// Compartment roles when `chain` has the SIR shape: three compartments,
/// support {(s,i), (i,r)}, T_si with its only coefficient on i and zero
/// offset, T_ir constant.
struct SirShape {
  std::size_t s, i, r;
};
std::optional<SirShape> match_sir(const BinomialChain& chain);

/// The SirChain of a chain with SIR shape, exponentials resolved as in
/// Kernel<Num>. Throws ModelError when the shape does not match.
template <class Num>
SirChain<Num> to_sir_chain(const BinomialChain& chain, const NumericBackend& backend = {});

}  // namespace bichain
