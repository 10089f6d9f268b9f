#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <utility>
#include <vector>

#include "bichain/model.hpp"
#include "bichain/numeric.hpp"

namespace bichain {

/// k x k matrix of realized transfer counts for one step.
using WitnessMatrix = std::vector<std::vector<Count>>;

struct Limits {
  std::uint64_t witness_cap = 10'000'000;  ///< per source state
  std::uint64_t state_cap = 10'000'000;
  std::uint64_t taylor_term_cap = 1'000'000;
};

// ---------------------------------------------------------------------------
// Exponentials

/// Number of Taylor terms needed for |P_k(x) - e^{-x}| <= 2^-r when x <= a.
std::uint64_t taylor_terms(std::uint64_t a, int r);

/// P_k(x) = sum_{i=0}^{k} (-x)^i / i!, exact.
Rational taylor_partial_sum(const Rational& x, std::uint64_t k);

/// P_k(a/b) with k = 2a^2 + r. Throws DomainError unless a, b, r >= 1 and
/// ResourceError when k exceeds term_cap.
Rational taylor_exp_neg(std::uint64_t a, std::uint64_t b, int r, std::uint64_t term_cap = 1'000'000);
/// 1 - P_k(a/b), the approximation of 1 - e^{-a/b}.
Rational taylor_exp_neg_complement(std::uint64_t a, std::uint64_t b, int r, std::uint64_t term_cap = 1'000'000);

/// e^{-x} within 2^-r for any rational x >= 0, using a = ceil(x) for the term
/// count and clamping the result into [0, 1].
Rational approx_exp_neg(const Rational& x, int r, std::uint64_t term_cap = 1'000'000);

/// Table with every nonzero-exponent slot of every support entry filled in.
/// Slots already present in `chain.exp_table()` are kept.
ExpTable synthesize_exp_table(const BinomialChain& chain, int r, std::uint64_t term_cap = 1'000'000);

// ---------------------------------------------------------------------------
// Step kernel

/// Success probabilities of every support entry, resolved once for a backend.
/// Rational: values come from the chain's ExpTable (missing slots are an
/// error) or, without a table, from Taylor synthesis at the backend's error
/// exponent. Double: table values when the chain has a table, otherwise
/// exp/expm1 of T_ij(u).
template <class Num>
class Kernel {
 public:
  Kernel(const BinomialChain& chain, const NumericBackend& backend = {}, const Limits& limits = {});

  const BinomialChain& chain() const noexcept { return chain_; }
  const Limits& limits() const noexcept { return limits_; }
  /// Support entries, row-major.
  const std::vector<IndexPair>& edges() const noexcept { return edges_; }

  SuccessProb<Num> success_prob(std::size_t edge, const StateVector& u) const;
  /// Same, addressed by compartments. Throws DomainError outside the support.
  SuccessProb<Num> success_prob(std::size_t i, std::size_t j, const StateVector& u) const;

  /// u has itself as its only successor. Structural for acyclic chains.
  bool is_absorbing(const StateVector& u) const;

 private:
  struct EdgeFactors {
    Num base;                                         // e^{-b}
    std::vector<std::pair<std::size_t, Num>> powers;  // (l, e^{-a_l}) for a_l != 0
  };

  BinomialChain chain_;
  Limits limits_;
  bool from_exp_ = false;  // double backend without a table
  std::vector<IndexPair> edges_;
  std::vector<EdgeFactors> factors_;
};

/// B(m; n, p) with 0^0 = 1. Throws DomainError if m > n or p outside [0,1].
template <class Num>
Num binom_pmf(std::uint64_t m, std::uint64_t n, const Num& p);

// ---------------------------------------------------------------------------
// Witnesses and transitions

/// w_j = max(0, u_j + sum_i M_ij - sum_l M_jl). `clamped` (optional) reports
/// whether the max actually cut a negative value.
StateVector apply_witness(const StateVector& u, const WitnessMatrix& m, bool* clamped = nullptr);

using WitnessVisitor = std::function<void(const WitnessMatrix&, const StateVector&)>;

/// Visits every M with supp(M) in supp(T) and M_ij <= u_i, in row-major order
/// over the support with the first entry most significant and values
/// ascending. Throws ResourceError after `cap` witnesses.
void for_each_witness(const BinomialChain& chain, const StateVector& u, const WitnessVisitor& visit,
                      std::uint64_t cap = Limits{}.witness_cap);

std::vector<std::pair<WitnessMatrix, StateVector>> enumerate_witnesses(const BinomialChain& chain,
                                                                       const StateVector& u,
                                                                       std::uint64_t cap = Limits{}.witness_cap);

/// All positive-probability successors of u, grouped by the (clamped) target.
template <class Num>
std::map<StateVector, Num> successors(const Kernel<Num>& kernel, const StateVector& u);

/// Same, further split by whether the max with 0 cut some compartment.
template <class Num>
std::map<std::pair<StateVector, bool>, Num> successors_by_clamp(const Kernel<Num>& kernel, const StateVector& u);

/// P(u, w); zero when no witness leads to w.
template <class Num>
Num transition_prob(const Kernel<Num>& kernel, const StateVector& u, const StateVector& w);

/// Some witness of (u, w) uses only entries with T_ij(u) > 0.
bool can_transition(const BinomialChain& chain, const StateVector& u, const StateVector& w,
                    std::uint64_t cap = Limits{}.witness_cap);

// ---------------------------------------------------------------------------
// Sampling

/// Fixed, portable random source: std::mt19937_64 (fully specified by the
/// standard) plus hand-written uniform and binomial draws, so traces depend
/// only on the seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Binomial(n, p) given p and 1 - p. Inversion by the pmf recurrence,
  /// falling back to n Bernoulli draws when (1-p)^n underflows.
  std::uint64_t binomial(std::uint64_t n, double p, double q);

 private:
  std::mt19937_64 engine_;
};

StateVector sample_transition(const Kernel<double>& kernel, const StateVector& u, Rng& rng);
StateVector sample_transition(const Kernel<double>& kernel, const StateVector& u, std::uint64_t seed);

}  // namespace bichain
