#include "bichain/sir.hpp"

#include <cmath>

#include "bichain/error.hpp"
#include "bichain/semantics.hpp"

namespace bichain {

namespace {

std::size_t triangle_slot(Count n, Count m1, Count m3) {
  return static_cast<std::size_t>(m3 * (n + 1) - m3 * (m3 - 1) / 2 + m1);
}

std::size_t triangle_size(Count n) { return static_cast<std::size_t>((n + 1) * (n + 2) / 2); }

// Pascal triangle and powers of e_gamma, 1 - e_gamma, shared by all rows.
template <class Num>
class SirDp {
 public:
  using Row = typename TransitionTable<Num>::Row;
  using T = NumTraits<Num>;

  explicit SirDp(const SirChain<Num>& chain) : chain_(chain) {
    const Count n = chain.N;
    binom_.resize(static_cast<std::size_t>(n + 1));
    for (Count a = 0; a <= n; ++a) {
      auto& row = binom_[static_cast<std::size_t>(a)];
      row.resize(static_cast<std::size_t>(a + 1), T::from_int(1));
      for (Count b = 1; b < a; ++b) {
        row[static_cast<std::size_t>(b)] =
            binom_[static_cast<std::size_t>(a - 1)][static_cast<std::size_t>(b - 1)] +
            binom_[static_cast<std::size_t>(a - 1)][static_cast<std::size_t>(b)];
      }
    }
    gamma_fail_ = powers(chain.e_gamma, n);
    gamma_succ_ = powers(T::from_int(1) - chain.e_gamma, n);
    beta_ = powers(chain.e_beta, n);
    inverse_.assign(static_cast<std::size_t>(n + 1), T::from_int(0));
    by_b_.resize(static_cast<std::size_t>(n + 1));
    for (Count a = 1; a <= n; ++a) {
      inverse_[static_cast<std::size_t>(a)] = T::from_int(1) / T::from_int(a);
      auto& row = by_b_[static_cast<std::size_t>(a)];
      row.assign(static_cast<std::size_t>(a + 1), T::from_int(0));
      for (Count b = 1; b <= a; ++b) row[static_cast<std::size_t>(b)] = T::from_int(a - b + 1) / T::from_int(b);
    }
  }

  /// Rows of stratum M (index m2 = 1..M; slot 0 unused). `prev` is stratum M-1.
  std::vector<Row> stratum(Count big_m, const std::vector<Row>& prev) const {
    std::vector<Row> out(static_cast<std::size_t>(big_m + 1));
    for (Count m2 = 1; m2 <= big_m; ++m2) fill_row(big_m, m2, prev, out[static_cast<std::size_t>(m2)]);
    return out;
  }

  /// Row (m1, m2, m3) with m1 + m2 = M; reads only prev[m2].
  void fill_row(Count big_m, Count m2, const std::vector<Row>& prev, Row& row) const {
    const Count m1 = big_m - m2;
    row.m1 = m1;
    row.m3 = chain_.N - big_m;
    row.width = m2 + 1;
    row.values.assign(static_cast<std::size_t>((m1 + 1) * (m2 + 1)), T::from_int(0));

    const Num q_inf = beta_[static_cast<std::size_t>(m2)];
    const Num p_inf = T::from_int(1) - q_inf;
    std::vector<Num> pp = powers(p_inf, m1), qp = powers(q_inf, m1);
    const auto& cm1 = binom_[static_cast<std::size_t>(m1)];
    const auto& cm2 = binom_[static_cast<std::size_t>(m2)];
    auto infect = [&](Count a) -> Num {
      return cm1[static_cast<std::size_t>(a)] * pp[static_cast<std::size_t>(a)] * qp[static_cast<std::size_t>(m1 - a)];
    };
    auto recover = [&](Count b) -> Num {
      return cm2[static_cast<std::size_t>(b)] * gamma_succ_[static_cast<std::size_t>(b)] *
             gamma_fail_[static_cast<std::size_t>(m2 - b)];
    };
    Num* values = row.values.data();
    const std::size_t width = static_cast<std::size_t>(row.width);

    // n1 = m1 and n3 = m3 directly.
    const Num no_infection = infect(0);
    for (Count b = 0; b <= m2; ++b) {
      values[static_cast<std::size_t>(m1) * width + static_cast<std::size_t>(b)] = no_infection * recover(b);
    }
    const Num no_recovery = recover(0);
    for (Count n1 = 0; n1 < m1; ++n1) values[static_cast<std::size_t>(n1) * width] = infect(m1 - n1) * no_recovery;

    if (m1 == 0) return;
    // alpha = m1 (m2 - b + 1) (1 - g) p / (b (m1 - n1) g), b = n3 - m3.
    const Row& src = prev[static_cast<std::size_t>(m2)];
    const std::size_t src_width = static_cast<std::size_t>(src.width);
    const Num common = T::from_int(m1) * (T::from_int(1) - chain_.e_gamma) * p_inf / chain_.e_gamma;
    for (Count n1 = 0; n1 < m1; ++n1) {
      const Num scale = common * inverse_[static_cast<std::size_t>(m1 - n1)];
      const Num* prior = src.values.data() + static_cast<std::size_t>(n1) * src_width;
      Num* dst = values + static_cast<std::size_t>(n1) * width;
      for (Count b = 1; b <= m2; ++b) {
        dst[b] = scale * by_b_[static_cast<std::size_t>(m2)][static_cast<std::size_t>(b)] * prior[b - 1];
      }
    }
  }

 private:
  static std::vector<Num> powers(const Num& x, Count n) {
    std::vector<Num> out(static_cast<std::size_t>(n + 1), T::from_int(1));
    for (Count e = 1; e <= n; ++e) out[static_cast<std::size_t>(e)] = out[static_cast<std::size_t>(e - 1)] * x;
    return out;
  }

  const SirChain<Num>& chain_;
  std::vector<std::vector<Num>> binom_;
  std::vector<Num> gamma_fail_, gamma_succ_, beta_;
  std::vector<Num> inverse_;             // 1 / a
  std::vector<std::vector<Num>> by_b_;   // by_b_[m2][b] = (m2 - b + 1) / b
};

}  // namespace

template <class Num>
void SirChain<Num>::validate() const {
  using T = NumTraits<Num>;
  if (N < 0 || s0 < 0 || i0 < 0 || r0 < 0) throw DomainError("SIR counts must be nonnegative");
  if (s0 + i0 + r0 != N) throw DomainError("SIR counts must sum to N");
  if (!(e_beta > T::from_int(0)) || e_beta > T::from_int(1) || !(e_gamma > T::from_int(0)) ||
      e_gamma > T::from_int(1)) {
    throw DomainError("SIR exponentials must lie in (0,1]");
  }
}

bool sir_successor_ok(const SirState& m, const SirState& n) {
  return n[0] <= m[0] && m[2] <= n[2] && n[2] <= m[1] + m[2];
}

template <class Num>
Num sir_direct_prob(const SirChain<Num>& chain, const SirState& m, const SirState& n) {
  using T = NumTraits<Num>;
  if (m[0] + m[1] + m[2] != chain.N || n[0] + n[1] + n[2] != chain.N) {
    throw DomainError("SIR states must sum to N");
  }
  if (!sir_successor_ok(m, n)) return T::from_int(0);
  const auto u = [](Count x) { return static_cast<std::uint64_t>(x); };
  Num q_inf = T::power(chain.e_beta, u(m[1]));
  SuccessProb<Num> infection{T::from_int(1) - q_inf, q_inf};
  SuccessProb<Num> recovery{T::from_int(1) - chain.e_gamma, chain.e_gamma};
  return binomial_pmf<Num>(u(m[0] - n[0]), u(m[0]), infection) *
         binomial_pmf<Num>(u(n[2] - m[2]), u(m[1]), recovery);
}

template <class Num>
Num sir_alpha(const SirChain<Num>& chain, const SirState& m, const SirState& n) {
  using T = NumTraits<Num>;
  if (!(n[0] < m[0] && m[2] < n[2] && n[2] <= m[1] + m[2])) {
    throw DomainError("alpha needs n1 < m1 and m3 < n3 <= m2 + m3");
  }
  Num num = T::from_int(m[0]) * T::from_int(m[1] - n[2] + m[2] + 1) * (T::from_int(1) - chain.e_gamma) *
            (T::from_int(1) - T::power(chain.e_beta, static_cast<std::uint64_t>(m[1])));
  Num den = T::from_int(n[2] - m[2]) * T::from_int(m[0] - n[0]) * chain.e_gamma;
  return num / den;
}

template <class Num>
TransitionTable<Num>::TransitionTable(Count n) : n_(n), rows_(triangle_size(n)) {
  for (Count m3 = 0; m3 <= n; ++m3) {
    for (Count m1 = 0; m1 + m3 <= n; ++m1) {
      Row& r = rows_[slot(m1, m3)];
      r.m1 = m1;
      r.m3 = m3;
    }
  }
}

template <class Num>
std::size_t TransitionTable<Num>::slot(Count m1, Count m3) const {
  if (m1 < 0 || m3 < 0 || m1 + m3 > n_) throw DomainError("SIR state outside the table");
  return triangle_slot(n_, m1, m3);
}

template <class Num>
Num TransitionTable<Num>::at(const SirState& m, const SirState& n) const {
  using T = NumTraits<Num>;
  const Row& r = row(m[0], m[2]);
  if (m[1] == 0) return n == m ? T::from_int(1) : T::from_int(0);
  if (!sir_successor_ok(m, n) || r.values.empty()) return T::from_int(0);
  return r.values[static_cast<std::size_t>(n[0] * r.width + (n[2] - m[2]))];
}

template <class Num>
TransitionTable<Num> dp_transition_table(const SirChain<Num>& chain, Count cap) {
  chain.validate();
  if (chain.N > cap) {
    throw ResourceError("transition table for N=" + std::to_string(chain.N) + " exceeds cap " + std::to_string(cap));
  }
  TransitionTable<Num> table(chain.N);
  for (Count m1 = 0; m1 <= chain.N; ++m1) {
    auto& r = table.row(m1, chain.N - m1);
    r.width = 1;
    r.values.assign(1, NumTraits<Num>::from_int(1));
  }
  SirDp<Num> dp(chain);
  std::vector<typename TransitionTable<Num>::Row> prev;
  for (Count big_m = 1; big_m <= chain.N; ++big_m) {
    auto rows = dp.stratum(big_m, prev);
    for (Count m2 = 1; m2 <= big_m; ++m2) table.row(big_m - m2, chain.N - big_m) = rows[static_cast<std::size_t>(m2)];
    prev = std::move(rows);
  }
  return table;
}

template <class Num>
const Num& SirHittingTimes<Num>::at(Count m1, Count m3) const {
  if (m1 < 0 || m3 < 0 || m1 + m3 > N) throw DomainError("SIR state outside the table");
  return values[triangle_slot(N, m1, m3)];
}

template <class Num>
std::vector<SirState> SirHittingTimes<Num>::colex_order() const {
  std::vector<SirState> out;
  for (Count m3 = 0; m3 <= N; ++m3) {
    for (Count m1 = N - m3; m1 >= 0; --m1) out.push_back({m1, N - m1 - m3, m3});
  }
  return out;
}

template <class Num>
SirHittingTimes<Num> sir_expected_eoe(const SirChain<Num>& chain) {
  using T = NumTraits<Num>;
  chain.validate();
  const Count n = chain.N;
  SirHittingTimes<Num> result;
  result.N = n;
  result.values.assign(triangle_size(n), T::from_int(0));
  auto x = [&](Count m1, Count m3) -> Num& { return result.values[triangle_slot(n, m1, m3)]; };

  SirDp<Num> dp(chain);
  std::vector<typename TransitionTable<Num>::Row> prev;
  // Stratum M has m3 = N - M, so strata ascend in M while colex order
  // descends; within a stratum solve m1 ascending.
  std::vector<typename TransitionTable<Num>::Row> rows;
  for (Count big_m = 1; big_m <= n; ++big_m) {
    rows.assign(static_cast<std::size_t>(big_m + 1), {});
    const Count m3 = n - big_m;
    for (Count m2 = big_m; m2 >= 1; --m2) {
      auto& row = rows[static_cast<std::size_t>(m2)];
      dp.fill_row(big_m, m2, prev, row);  // solved while the row is still in cache
      const Count m1 = row.m1;
      const std::size_t width = static_cast<std::size_t>(row.width);
      Num acc = T::from_int(1);
      for (Count n1 = 0; n1 <= m1; ++n1) {
        const Num* p = row.values.data() + static_cast<std::size_t>(n1) * width;
        for (Count b = n1 == m1 ? 1 : 0; b <= m2; ++b) {
          if (!T::is_zero(p[b])) acc += p[b] * x(n1, m3 + b);
        }
      }
      const Num diag = row.values[static_cast<std::size_t>(m1) * width];
      Num denom = T::from_int(1) - diag;
      if (T::is_zero(denom)) {
        throw DomainError("SIR state (" + std::to_string(m1) + "," + std::to_string(m2) + "," +
                          std::to_string(m3) + ") never leaves itself");
      }
      x(m1, m3) = acc / denom;
    }
    prev = std::move(rows);
  }
  return result;
}

std::optional<SirShape> match_sir(const BinomialChain& chain) {
  if (chain.size() != 3) return std::nullopt;
  auto edges = support(chain);
  if (edges.size() != 2) return std::nullopt;
  for (int flip = 0; flip < 2; ++flip) {
    const auto [a, b] = edges[flip];
    const auto [c, d] = edges[1 - flip];
    if (b != c || a == b || b == d || a == d) continue;
    const LinearFn& infect = *chain.transfer(a, b);
    const LinearFn& recover = *chain.transfer(b, d);
    auto cs = infect.coefficient_support();
    if (cs.size() != 1 || cs[0] != b || sgn(infect.offset) != 0) continue;
    if (!recover.is_constant()) continue;
    return SirShape{a, b, d};
  }
  return std::nullopt;
}

template <class Num>
SirChain<Num> to_sir_chain(const BinomialChain& chain, const NumericBackend& backend) {
  using T = NumTraits<Num>;
  auto shape = match_sir(chain);
  if (!shape) throw ModelError("chain does not have the SIR shape");
  const Rational& beta = chain.transfer(shape->s, shape->i)->coeffs[shape->i];
  const Rational& gamma = chain.transfer(shape->i, shape->r)->offset;

  SirChain<Num> out;
  out.s0 = chain.initial()[shape->s];
  out.i0 = chain.initial()[shape->i];
  out.r0 = chain.initial()[shape->r];
  out.N = out.s0 + out.i0 + out.r0;

  if (const auto& table = chain.exp_table()) {
    auto lookup = [&](IndexPair ij, std::size_t slot) -> Num {
      auto it = table->entries.find(ij);
      if (it == table->entries.end() || !it->second[slot]) throw DomainError("exp_table lacks an SIR exponential");
      return T::from_rational(*it->second[slot]);
    };
    out.e_beta = lookup({shape->s, shape->i}, shape->i + 1);
    out.e_gamma = lookup({shape->i, shape->r}, 0);
  } else if constexpr (std::is_same_v<Num, double>) {
    out.e_beta = std::exp(-beta.get_d());
    out.e_gamma = std::exp(-gamma.get_d());
  } else {
    out.e_beta = approx_exp_neg(beta, backend.error_exponent);
    out.e_gamma = approx_exp_neg(gamma, backend.error_exponent);
  }
  out.validate();
  return out;
}

#define BICHAIN_INSTANTIATE(Num)                                                                   \
  template struct SirChain<Num>;                                                                   \
  template class TransitionTable<Num>;                                                             \
  template struct SirHittingTimes<Num>;                                                            \
  template Num sir_direct_prob<Num>(const SirChain<Num>&, const SirState&, const SirState&);       \
  template Num sir_alpha<Num>(const SirChain<Num>&, const SirState&, const SirState&);             \
  template TransitionTable<Num> dp_transition_table<Num>(const SirChain<Num>&, Count);             \
  template SirHittingTimes<Num> sir_expected_eoe<Num>(const SirChain<Num>&);                       \
  template SirChain<Num> to_sir_chain<Num>(const BinomialChain&, const NumericBackend&);

BICHAIN_INSTANTIATE(Rational)
BICHAIN_INSTANTIATE(double)

}  // namespace bichain
