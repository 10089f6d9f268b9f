#include "bichain/semantics.hpp"

#include <cmath>
#include <limits>

#include "bichain/error.hpp"

namespace bichain {

// ---------------------------------------------------------------------------
// Exponentials

std::uint64_t taylor_terms(std::uint64_t a, int r) {
  if (r < 1) throw DomainError("error exponent must be >= 1");
  if (a > (std::uint64_t{1} << 30)) throw ResourceError("Taylor term count overflows");
  return 2 * a * a + static_cast<std::uint64_t>(r);
}

Rational taylor_partial_sum(const Rational& x, std::uint64_t k) {
  // T_i = (k!/i!) (-p)^i q^(k-i); the sum over i divided by k! q^k.
  const Integer& p = x.get_num();
  const Integer& q = x.get_den();
  Integer kfact;
  mpz_fac_ui(kfact.get_mpz_t(), k);
  Integer qk;
  mpz_pow_ui(qk.get_mpz_t(), q.get_mpz_t(), k);
  Integer term = kfact * qk;
  Integer sum = term;
  for (std::uint64_t i = 1; i <= k; ++i) {
    term *= -p;
    Integer divisor = q * static_cast<unsigned long>(i);
    mpz_divexact(term.get_mpz_t(), term.get_mpz_t(), divisor.get_mpz_t());
    sum += term;
  }
  Rational result(sum, kfact * qk);
  result.canonicalize();
  return result;
}

namespace {

Rational taylor_checked(std::uint64_t a, std::uint64_t b, int r, std::uint64_t term_cap) {
  if (a < 1 || b < 1 || r < 1) throw DomainError("taylor_exp_neg needs a, b, r >= 1");
  std::uint64_t k = taylor_terms(a, r);
  if (k > term_cap) {
    throw ResourceError("Taylor expansion needs " + std::to_string(k) + " terms, cap is " + std::to_string(term_cap));
  }
  return taylor_partial_sum(Rational(Integer(static_cast<unsigned long>(a)), Integer(static_cast<unsigned long>(b))), k);
}

}  // namespace

Rational taylor_exp_neg(std::uint64_t a, std::uint64_t b, int r, std::uint64_t term_cap) {
  return taylor_checked(a, b, r, term_cap);
}

Rational taylor_exp_neg_complement(std::uint64_t a, std::uint64_t b, int r, std::uint64_t term_cap) {
  return Rational(1) - taylor_checked(a, b, r, term_cap);
}

Rational approx_exp_neg(const Rational& x, int r, std::uint64_t term_cap) {
  if (sgn(x) < 0) throw DomainError("approx_exp_neg needs x >= 0");
  if (sgn(x) == 0) return Rational(1);
  Integer ceil_x;
  mpz_cdiv_q(ceil_x.get_mpz_t(), x.get_num_mpz_t(), x.get_den_mpz_t());
  if (!ceil_x.fits_ulong_p()) throw ResourceError("exponent too large for Taylor synthesis");
  std::uint64_t k = taylor_terms(ceil_x.get_ui(), r);
  if (k > term_cap) {
    throw ResourceError("Taylor expansion needs " + std::to_string(k) + " terms, cap is " + std::to_string(term_cap));
  }
  Rational value = taylor_partial_sum(x, k);
  if (sgn(value) < 0) return Rational(0);
  if (value > 1) return Rational(1);
  return value;
}

ExpTable synthesize_exp_table(const BinomialChain& chain, int r, std::uint64_t term_cap) {
  ExpTable table;
  if (chain.exp_table()) table = *chain.exp_table();
  table.error_exponent = chain.exp_table() ? std::min(table.error_exponent, r) : r;
  const std::size_t k = chain.size();
  for (const auto& ij : support(chain)) {
    const LinearFn& fn = *chain.transfer(ij.first, ij.second);
    auto& slots = table.entries[ij];
    if (slots.empty()) slots.resize(k + 1);
    for (std::size_t l = 0; l <= k; ++l) {
      const Rational& exponent = l == 0 ? fn.offset : fn.coeffs[l - 1];
      if (sgn(exponent) != 0 && !slots[l]) slots[l] = approx_exp_neg(exponent, r, term_cap);
    }
  }
  return table;
}

// ---------------------------------------------------------------------------
// Kernel

template <class Num>
Kernel<Num>::Kernel(const BinomialChain& chain, const NumericBackend& backend, const Limits& limits)
    : chain_(chain), limits_(limits), edges_(support(chain)) {
  using T = NumTraits<Num>;
  const std::size_t k = chain_.size();
  if (backend.error_exponent < 1) throw DomainError("error exponent must be >= 1");

  std::optional<ExpTable> table = chain_.exp_table();
  if constexpr (std::is_same_v<Num, double>) {
    from_exp_ = !table.has_value();
  } else {
    if (!table) table = synthesize_exp_table(chain_, backend.error_exponent, limits_.taylor_term_cap);
  }

  for (const auto& ij : edges_) {
    const LinearFn& fn = *chain_.transfer(ij.first, ij.second);
    EdgeFactors f{T::from_int(1), {}};
    if (from_exp_) {
      f.base = T::from_rational(fn.offset);
      for (std::size_t l : fn.coefficient_support()) f.powers.emplace_back(l, T::from_rational(fn.coeffs[l]));
    } else {
      auto it = table->entries.find(ij);
      auto slot = [&](std::size_t l) -> Num {
        if (it == table->entries.end() || !it->second[l]) {
          throw DomainError("exp_table has no value for " + chain_.names()[ij.first] + "->" +
                            chain_.names()[ij.second] + " var " + (l == 0 ? "offset" : chain_.names()[l - 1]));
        }
        return T::from_rational(*it->second[l]);
      };
      if (sgn(fn.offset) != 0) f.base = slot(0);
      for (std::size_t l = 0; l < k; ++l) {
        if (sgn(fn.coeffs[l]) != 0) f.powers.emplace_back(l, slot(l + 1));
      }
    }
    factors_.push_back(std::move(f));
  }
}

template <class Num>
SuccessProb<Num> Kernel<Num>::success_prob(std::size_t edge, const StateVector& u) const {
  using T = NumTraits<Num>;
  const EdgeFactors& f = factors_[edge];
  if constexpr (std::is_same_v<Num, double>) {
    if (from_exp_) {
      double exponent = f.base;
      for (const auto& [l, a] : f.powers) exponent += a * static_cast<double>(u[l]);
      return {-std::expm1(-exponent), std::exp(-exponent)};
    }
  }
  Num failure = f.base;
  for (const auto& [l, p] : f.powers) {
    if (u[l] != 0) failure *= T::power(p, static_cast<std::uint64_t>(u[l]));
  }
  Num success = T::from_int(1) - failure;
  return {success, failure};
}

template <class Num>
SuccessProb<Num> Kernel<Num>::success_prob(std::size_t i, std::size_t j, const StateVector& u) const {
  for (std::size_t e = 0; e < edges_.size(); ++e) {
    if (edges_[e] == IndexPair{i, j}) return success_prob(e, u);
  }
  throw DomainError("transfer " + std::to_string(i) + "->" + std::to_string(j) + " is not in the support");
}

template <class Num>
bool Kernel<Num>::is_absorbing(const StateVector& u) const {
  for (std::size_t e = 0; e < edges_.size(); ++e) {
    const auto [i, j] = edges_[e];
    if (i == j || u[i] == 0) continue;
    if (!NumTraits<Num>::is_zero(success_prob(e, u).success)) return false;
  }
  return true;
}

template <class Num>
Num binom_pmf(std::uint64_t m, std::uint64_t n, const Num& p) {
  using T = NumTraits<Num>;
  if (m > n) throw DomainError("binom_pmf needs m <= n");
  if (p < T::from_int(0) || p > T::from_int(1)) throw DomainError("binom_pmf needs p in [0,1]");
  return binomial_pmf<Num>(m, n, SuccessProb<Num>{p, T::from_int(1) - p});
}

// ---------------------------------------------------------------------------
// Witnesses

StateVector apply_witness(const StateVector& u, const WitnessMatrix& m, bool* clamped) {
  const std::size_t k = u.size();
  std::vector<Count> raw(u);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      raw[j] += m[i][j];
      raw[i] -= m[i][j];
    }
  }
  bool cut = false;
  for (auto& x : raw) {
    if (x < 0) {
      x = 0;
      cut = true;
    }
  }
  if (clamped) *clamped = cut;
  return raw;
}

namespace {

// Odometer over the given entries; visit returns false to stop early.
template <class Visit>
void odometer(const BinomialChain& chain, const StateVector& u, const std::vector<IndexPair>& entries,
              std::uint64_t cap, Visit&& visit) {
  const std::size_t k = chain.size();
  WitnessMatrix m(k, std::vector<Count>(k, 0));
  std::uint64_t count = 0;
  bool stop = false;
  std::function<void(std::size_t)> rec = [&](std::size_t e) {
    if (stop) return;
    if (e == entries.size()) {
      if (++count > cap) throw ResourceError("witness enumeration exceeded cap of " + std::to_string(cap));
      if (!visit(m)) stop = true;
      return;
    }
    const auto [i, j] = entries[e];
    for (Count v = 0; v <= u[i] && !stop; ++v) {
      m[i][j] = v;
      rec(e + 1);
    }
    m[i][j] = 0;
  };
  rec(0);
}

}  // namespace

void for_each_witness(const BinomialChain& chain, const StateVector& u, const WitnessVisitor& visit,
                      std::uint64_t cap) {
  odometer(chain, u, support(chain), cap, [&](const WitnessMatrix& m) {
    visit(m, apply_witness(u, m));
    return true;
  });
}

std::vector<std::pair<WitnessMatrix, StateVector>> enumerate_witnesses(const BinomialChain& chain,
                                                                       const StateVector& u, std::uint64_t cap) {
  std::vector<std::pair<WitnessMatrix, StateVector>> out;
  for_each_witness(chain, u, [&](const WitnessMatrix& m, const StateVector& w) { out.emplace_back(m, w); }, cap);
  return out;
}

bool can_transition(const BinomialChain& chain, const StateVector& u, const StateVector& w, std::uint64_t cap) {
  std::vector<IndexPair> live;
  for (const auto& ij : support(chain)) {
    if (sgn((*chain.transfer(ij.first, ij.second))(u)) > 0) live.push_back(ij);
  }
  bool found = false;
  odometer(chain, u, live, cap, [&](const WitnessMatrix& m) {
    found = apply_witness(u, m) == w;
    return !found;
  });
  return found;
}

namespace {

// Calls sink(w, clamped, probability) once per combination of nonzero
// per-entry transfer counts.
template <class Num, class Sink>
void for_each_outcome(const Kernel<Num>& kernel, const StateVector& u, Sink&& sink) {
  using T = NumTraits<Num>;
  const auto& edges = kernel.edges();
  const std::size_t k = u.size();

  // Per edge, the nonzero part of the transfer-count distribution.
  struct Branch {
    std::size_t from, to;
    std::vector<std::pair<Count, Num>> mass;
  };
  std::vector<Branch> branches;
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const auto [i, j] = edges[e];
    if (u[i] == 0) continue;
    SuccessProb<Num> p = kernel.success_prob(e, u);
    Branch b{i, j, {}};
    if (T::is_zero(p.success)) {
      continue;  // only m = 0, a factor of one
    } else if (T::is_zero(p.failure)) {
      b.mass.emplace_back(u[i], T::from_int(1));
    } else {
      for (Count m = 0; m <= u[i]; ++m) {
        Num pm = binomial_pmf<Num>(static_cast<std::uint64_t>(m), static_cast<std::uint64_t>(u[i]), p);
        if (!T::is_zero(pm)) b.mass.emplace_back(m, std::move(pm));
      }
    }
    branches.push_back(std::move(b));
  }

  std::vector<Count> delta(k, 0);
  std::uint64_t leaves = 0;
  const std::uint64_t cap = kernel.limits().witness_cap;
  std::function<void(std::size_t, const Num&)> rec = [&](std::size_t b, const Num& prob) {
    if (b == branches.size()) {
      if (++leaves > cap) throw ResourceError("witness enumeration exceeded cap of " + std::to_string(cap));
      StateVector w(k);
      bool clamped = false;
      for (std::size_t l = 0; l < k; ++l) {
        clamped = clamped || u[l] + delta[l] < 0;
        w[l] = std::max<Count>(0, u[l] + delta[l]);
      }
      sink(std::move(w), clamped, prob);
      return;
    }
    const Branch& br = branches[b];
    for (const auto& [m, pm] : br.mass) {
      delta[br.from] -= m;
      delta[br.to] += m;
      rec(b + 1, prob * pm);
      delta[br.from] += m;
      delta[br.to] -= m;
    }
  };
  rec(0, T::from_int(1));
}

}  // namespace

template <class Num>
std::map<StateVector, Num> successors(const Kernel<Num>& kernel, const StateVector& u) {
  std::map<StateVector, Num> out;
  for_each_outcome(kernel, u, [&](StateVector w, bool, const Num& prob) {
    auto [it, inserted] = out.try_emplace(std::move(w), prob);
    if (!inserted) it->second += prob;
  });
  return out;
}

template <class Num>
std::map<std::pair<StateVector, bool>, Num> successors_by_clamp(const Kernel<Num>& kernel, const StateVector& u) {
  std::map<std::pair<StateVector, bool>, Num> out;
  for_each_outcome(kernel, u, [&](StateVector w, bool clamped, const Num& prob) {
    auto [it, inserted] = out.try_emplace({std::move(w), clamped}, prob);
    if (!inserted) it->second += prob;
  });
  return out;
}

template <class Num>
Num transition_prob(const Kernel<Num>& kernel, const StateVector& u, const StateVector& w) {
  auto succ = successors(kernel, u);
  auto it = succ.find(w);
  return it == succ.end() ? NumTraits<Num>::from_int(0) : it->second;
}

// ---------------------------------------------------------------------------
// Sampling

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

std::uint64_t Rng::binomial(std::uint64_t n, double p, double q) {
  if (n == 0 || p <= 0.0) return 0;
  if (q <= 0.0) return n;
  if (p > 0.5) return n - binomial(n, q, p);
  double f = std::pow(q, static_cast<double>(n));
  if (f < 1e-300) {
    std::uint64_t hits = 0;
    for (std::uint64_t t = 0; t < n; ++t) hits += uniform() < p ? 1 : 0;
    return hits;
  }
  const double ratio = p / q;
  double x = uniform();
  double cdf = f;
  std::uint64_t m = 0;
  while (x >= cdf && m < n) {
    f *= ratio * static_cast<double>(n - m) / static_cast<double>(m + 1);
    ++m;
    cdf += f;
  }
  return m;
}

StateVector sample_transition(const Kernel<double>& kernel, const StateVector& u, Rng& rng) {
  const std::size_t k = u.size();
  std::vector<Count> w(u);
  const auto& edges = kernel.edges();
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const auto [i, j] = edges[e];
    if (u[i] == 0) continue;
    SuccessProb<double> p = kernel.success_prob(e, u);
    auto m = static_cast<Count>(rng.binomial(static_cast<std::uint64_t>(u[i]), p.success, p.failure));
    w[i] -= m;
    w[j] += m;
  }
  for (std::size_t l = 0; l < k; ++l) w[l] = std::max<Count>(0, w[l]);
  return w;
}

StateVector sample_transition(const Kernel<double>& kernel, const StateVector& u, std::uint64_t seed) {
  Rng rng(seed);
  return sample_transition(kernel, u, rng);
}

template class Kernel<Rational>;
template class Kernel<double>;
template Rational binom_pmf<Rational>(std::uint64_t, std::uint64_t, const Rational&);
template double binom_pmf<double>(std::uint64_t, std::uint64_t, const double&);
template std::map<StateVector, Rational> successors<Rational>(const Kernel<Rational>&, const StateVector&);
template std::map<std::pair<StateVector, bool>, Rational> successors_by_clamp<Rational>(const Kernel<Rational>&,
                                                                                       const StateVector&);
template std::map<std::pair<StateVector, bool>, double> successors_by_clamp<double>(const Kernel<double>&,
                                                                                   const StateVector&);
template std::map<StateVector, double> successors<double>(const Kernel<double>&, const StateVector&);
template Rational transition_prob<Rational>(const Kernel<Rational>&, const StateVector&, const StateVector&);
template double transition_prob<double>(const Kernel<double>&, const StateVector&, const StateVector&);

}  // namespace bichain
