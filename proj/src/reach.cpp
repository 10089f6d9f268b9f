#include "bichain/reach.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>

#include "bichain/error.hpp"

namespace bichain {

template <class Num>
std::size_t ExplicitChain<Num>::absorbing_count() const {
  return static_cast<std::size_t>(std::count(absorbing.begin(), absorbing.end(), true));
}

bool lex_less(const StateVector& w, const StateVector& u, const std::vector<std::size_t>& topo) {
  // topo[i] is the position of compartment i; walk positions in order.
  std::vector<std::size_t> at(topo.size());
  for (std::size_t i = 0; i < topo.size(); ++i) at[topo[i]] = i;
  for (std::size_t p = 0; p < at.size(); ++p) {
    Count a = w[at[p]], b = u[at[p]];
    if (a != b) return a < b;
  }
  return false;
}

namespace {

std::string render(const StateVector& v) {
  std::string s = "(";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s + ")";
}

// Canonical position order: transient before absorbing, each descending lex.
template <class Num>
std::vector<std::size_t> canonical_order(const ExplicitChain<Num>& ec) {
  std::vector<std::size_t> at(ec.topo.size());
  for (std::size_t i = 0; i < ec.topo.size(); ++i) at[ec.topo[i]] = i;
  std::vector<std::size_t> order(ec.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    if (ec.absorbing[x] != ec.absorbing[y]) return !ec.absorbing[x];
    const auto& a = ec.states[x];
    const auto& b = ec.states[y];
    for (std::size_t p = 0; p < at.size(); ++p) {
      if (a[at[p]] != b[at[p]]) return a[at[p]] > b[at[p]];
    }
    return false;
  });
  return order;
}

}  // namespace

template <class Num>
ExplicitChain<Num> build_reachable(const Kernel<Num>& kernel) {
  using T = NumTraits<Num>;
  const BinomialChain& chain = kernel.chain();
  if (!is_acyclic(chain)) throw ModelError("reachability analysis needs an acyclic chain");
  const std::size_t k = chain.size();
  const bool closed = is_closed(chain);
  const std::uint64_t cap = kernel.limits().state_cap;

  ExplicitChain<Num> ec;
  ec.topo = topo_order(chain);
  auto intern = [&](const StateVector& s) -> std::size_t {
    auto [it, inserted] = ec.index.try_emplace(s, ec.states.size());
    if (inserted) {
      if (ec.states.size() >= cap) throw ResourceError("state space exceeded cap of " + std::to_string(cap));
      ec.states.push_back(s);
      ec.trans.emplace_back();
      ec.absorbing.push_back(false);
    }
    return it->second;
  };

  ec.initial = intern(chain.initial());
  for (std::size_t cur = 0; cur < ec.states.size(); ++cur) {
    const StateVector u = ec.states[cur];
    const Count norm_u = one_norm(u);
    auto succ = successors(kernel, u);
    std::vector<std::pair<std::size_t, Num>> row;
    row.reserve(succ.size());
    for (auto& [w, p] : succ) {
      if (w != u) {
        if (!lex_less(w, u, ec.topo)) {
          throw InvariantError("transition " + render(u) + " -> " + render(w) + " is not lex-decreasing");
        }
        Count norm_w = one_norm(w);
        if (norm_w > norm_u * static_cast<Count>(k) || (closed && norm_w != norm_u)) {
          throw InvariantError("transition " + render(u) + " -> " + render(w) + " breaks the population bound");
        }
      }
      row.emplace_back(intern(w), std::move(p));
    }
    std::sort(row.begin(), row.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    ec.absorbing[cur] = row.size() == 1 && row[0].first == cur;
    if (ec.absorbing[cur] && !T::is_one(row[0].second) && !std::is_same_v<Num, double>) {
      throw InvariantError("absorbing state " + render(u) + " has self-loop probability != 1");
    }
    ec.trans[cur] = std::move(row);
  }
  return ec;
}

template <class Num>
ExplicitChain<Num> sort_canonical(const ExplicitChain<Num>& ec) {
  std::vector<std::size_t> order = canonical_order(ec);
  std::vector<std::size_t> where(ec.size());
  for (std::size_t p = 0; p < order.size(); ++p) where[order[p]] = p;

  ExplicitChain<Num> out;
  out.topo = ec.topo;
  out.initial = where[ec.initial];
  out.states.reserve(ec.size());
  for (std::size_t p = 0; p < order.size(); ++p) {
    std::size_t old = order[p];
    out.states.push_back(ec.states[old]);
    out.index.emplace(ec.states[old], p);
    out.absorbing.push_back(ec.absorbing[old]);
    std::vector<std::pair<std::size_t, Num>> row;
    for (const auto& [t, prob] : ec.trans[old]) row.emplace_back(where[t], prob);
    std::sort(row.begin(), row.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    out.trans.push_back(std::move(row));
  }
  return out;
}

template <class Num>
bool check_absorbing(const ExplicitChain<Num>& ec) {
  const std::size_t n = ec.size();
  std::vector<std::vector<std::size_t>> rev(n);
  for (std::size_t s = 0; s < n; ++s) {
    for (const auto& [t, prob] : ec.trans[s]) {
      if (!NumTraits<Num>::is_zero(prob)) rev[t].push_back(s);
    }
  }
  std::vector<bool> seen(n, false);
  std::deque<std::size_t> queue;
  for (std::size_t s = 0; s < n; ++s) {
    if (ec.absorbing[s]) {
      seen[s] = true;
      queue.push_back(s);
    }
  }
  if (queue.empty()) return false;
  while (!queue.empty()) {
    std::size_t t = queue.front();
    queue.pop_front();
    for (std::size_t s : rev[t]) {
      if (!seen[s]) {
        seen[s] = true;
        queue.push_back(s);
      }
    }
  }
  return std::all_of(seen.begin(), seen.end(), [](bool b) { return b; });
}

namespace {

// x_u = (c_u + sum_{w != u} P(u,w) x_w) / (1 - P(u,u)) for every state not
// fixed in advance, visiting states in reverse canonical order.
template <class Num>
std::vector<Num> back_substitute(const ExplicitChain<Num>& ec, const std::vector<bool>& fixed, std::vector<Num> x,
                                 const Num& constant) {
  using T = NumTraits<Num>;
  std::vector<std::size_t> order = canonical_order(ec);
  std::vector<bool> done(fixed);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    std::size_t s = *it;
    if (done[s]) continue;
    Num diag = T::from_int(0);
    Num acc = constant;
    for (const auto& [t, prob] : ec.trans[s]) {
      if (t == s) {
        diag += prob;
      } else {
        if (!done[t]) throw InvariantError("transition to an earlier state in canonical order");
        acc += prob * x[t];
      }
    }
    Num denom = T::from_int(1) - diag;
    if (T::is_zero(denom)) throw InvariantError("transient state with self-loop probability 1");
    x[s] = acc / denom;
    done[s] = true;
  }
  return x;
}

}  // namespace

template <class Num>
std::vector<Num> expected_hitting_times(const ExplicitChain<Num>& ec) {
  using T = NumTraits<Num>;
  if (!check_absorbing(ec)) throw DomainError("chain is not absorbing");
  std::vector<Num> x(ec.size(), T::from_int(0));
  return back_substitute(ec, ec.absorbing, std::move(x), T::from_int(1));
}

template <class Num>
std::vector<Num> until_probabilities(const ExplicitChain<Num>& ec, const StatePredicate& safe,
                                     const StatePredicate& target) {
  using T = NumTraits<Num>;
  const std::size_t n = ec.size();
  std::vector<bool> fixed(n, false);
  std::vector<Num> x(n, T::from_int(0));
  for (std::size_t s = 0; s < n; ++s) {
    if (target(ec.states[s])) {
      x[s] = T::from_int(1);
      fixed[s] = true;
    } else if (!safe(ec.states[s]) || ec.absorbing[s]) {
      fixed[s] = true;
    }
  }
  return back_substitute(ec, fixed, std::move(x), T::from_int(0));
}

template <class Num>
Num until_probability(const ExplicitChain<Num>& ec, const StatePredicate& safe, const StatePredicate& target) {
  return until_probabilities(ec, safe, target)[ec.initial];
}

template <class Num>
Num clamp_free_until_probability(const Kernel<Num>& kernel, const ExplicitChain<Num>& ec,
                                 const StatePredicate& target) {
  using T = NumTraits<Num>;
  const std::size_t n = ec.size();
  std::vector<Num> x(n, T::from_int(0));
  std::vector<bool> done(n, false);
  std::vector<std::size_t> order = canonical_order(ec);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const std::size_t s = *it;
    if (target(ec.states[s])) {
      x[s] = T::from_int(1);
    } else if (!ec.absorbing[s]) {
      Num diag = T::from_int(0);
      Num acc = T::from_int(0);
      for (const auto& [key, prob] : successors_by_clamp(kernel, ec.states[s])) {
        if (key.second) continue;
        std::size_t t = ec.index.at(key.first);
        if (t == s) {
          diag += prob;
        } else {
          if (!done[t]) throw InvariantError("transition to an earlier state in canonical order");
          acc += prob * x[t];
        }
      }
      Num denom = T::from_int(1) - diag;
      if (T::is_zero(denom)) throw InvariantError("transient state with self-loop probability 1");
      x[s] = acc / denom;
    }
    done[s] = true;
  }
  return x[ec.initial];
}

MonteCarloResult monte_carlo_hitting(const Kernel<double>& kernel, std::uint64_t runs, std::uint64_t seed,
                                     std::uint64_t max_steps) {
  if (runs == 0) throw DomainError("need at least one run");
  if (!is_acyclic(kernel.chain())) throw ModelError("Monte Carlo hitting times need an acyclic chain");
  Rng rng(seed);
  MonteCarloResult result;
  result.runs = runs;
  double mean = 0, m2 = 0;
  for (std::uint64_t r = 1; r <= runs; ++r) {
    StateVector u = kernel.chain().initial();
    std::uint64_t steps = 0;
    while (!kernel.is_absorbing(u)) {
      if (steps == max_steps) {
        throw ResourceError("trajectory exceeded " + std::to_string(max_steps) + " steps");
      }
      u = sample_transition(kernel, u, rng);
      ++steps;
    }
    ++result.final_states[u];
    double d = static_cast<double>(steps) - mean;
    mean += d / static_cast<double>(r);
    m2 += d * (static_cast<double>(steps) - mean);
  }
  result.mean = mean;
  double var = runs > 1 ? m2 / static_cast<double>(runs - 1) : 0.0;
  result.std_error = std::sqrt(var / static_cast<double>(runs));
  result.half_width = 1.96 * result.std_error;
  return result;
}

#define BICHAIN_INSTANTIATE(Num)                                                                             \
  template struct ExplicitChain<Num>;                                                                        \
  template ExplicitChain<Num> build_reachable<Num>(const Kernel<Num>&);                                      \
  template ExplicitChain<Num> sort_canonical<Num>(const ExplicitChain<Num>&);                                \
  template bool check_absorbing<Num>(const ExplicitChain<Num>&);                                             \
  template std::vector<Num> expected_hitting_times<Num>(const ExplicitChain<Num>&);                          \
  template std::vector<Num> until_probabilities<Num>(const ExplicitChain<Num>&, const StatePredicate&,       \
                                                     const StatePredicate&);                                 \
  template Num until_probability<Num>(const ExplicitChain<Num>&, const StatePredicate&, const StatePredicate&); \
  template Num clamp_free_until_probability<Num>(const Kernel<Num>&, const ExplicitChain<Num>&,              \
                                                 const StatePredicate&);

BICHAIN_INSTANTIATE(Rational)
BICHAIN_INSTANTIATE(double)

}  // namespace bichain
