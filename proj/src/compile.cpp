#include "bichain/compile.hpp"

#include <algorithm>
#include <set>

#include "bichain/error.hpp"

namespace bichain {

namespace {

// Disjuncts of "some transfer can still fire": u_i >= 1 and T_ij(u) > 0,
// with dominated clauses removed.
std::vector<std::vector<std::size_t>> live_clauses(const BinomialChain& chain) {
  std::set<std::vector<std::size_t>> raw;
  for (const auto& [i, j] : support(chain)) {
    const LinearFn& fn = *chain.transfer(i, j);
    if (sgn(fn.offset) > 0) {
      raw.insert({i});
      continue;
    }
    for (std::size_t l : fn.coefficient_support()) {
      std::vector<std::size_t> clause{i, l};
      std::sort(clause.begin(), clause.end());
      clause.erase(std::unique(clause.begin(), clause.end()), clause.end());
      raw.insert(clause);
    }
  }
  std::vector<std::vector<std::size_t>> out;
  for (const auto& c : raw) {
    bool dominated = std::any_of(raw.begin(), raw.end(), [&](const auto& d) {
      return d != c && std::includes(c.begin(), c.end(), d.begin(), d.end());
    });
    if (!dominated) out.push_back(c);
  }
  return out;
}

Guard sum_at_least_one(const std::vector<std::size_t>& xs) {
  SparseRow row;
  for (std::size_t x : xs) row.emplace_back(x, Rational(-1));
  return Guard{{Constraint{row, Rational(-1)}}};
}

Guard all_positive(const std::vector<std::size_t>& xs) {
  Guard g;
  for (std::size_t x : xs) g = g & Guard::positive(x);
  return g;
}

void add_branches(Scm& m, std::size_t src, const Guard& g, const Rational& p, Update on_p, std::size_t to_p,
                  Update on_q, std::size_t to_q) {
  if (sgn(p) != 0) m.add_transition(src, g, std::move(on_p), to_p, p);
  if (p != 1) m.add_transition(src, g, std::move(on_q), to_q, Rational(1) - p);
}

}  // namespace

CompiledScm compile_bc_to_scm(const BinomialChain& chain) {
  if (!is_acyclic(chain)) throw ModelError("only acyclic chains can be compiled");
  if (!chain.exp_table()) throw ModelError("compilation needs an exp_table");
  const ExpTable& table = *chain.exp_table();
  const std::size_t k = chain.size();
  const auto& names = chain.names();

  CompiledScm out;
  Scm& m = out.scm;
  out.edges = support(chain);
  out.live_clauses = live_clauses(chain);

  for (std::size_t i = 0; i < k; ++i) m.add_counter(names[i], chain.initial()[i]);
  out.alpha0 = m.add_counter("alpha0");
  out.alpha1 = m.add_counter("alpha1");
  for (const auto& [i, j] : out.edges) out.chi.push_back(m.add_counter("chi_" + names[i] + "_" + names[j]));

  std::vector<std::size_t> outdeg(k, 0);
  for (const auto& e : out.edges) ++outdeg[e.first];
  std::vector<std::size_t> clampable;
  for (std::size_t j = 0; j < k; ++j) {
    if (outdeg[j] >= 2) clampable.push_back(j);
  }
  if (!clampable.empty()) out.clamped = m.add_counter("clamped");

  // Reward guards: one linear guard when the live condition allows it,
  // otherwise a chain of check states, one per disjunct.
  std::vector<std::size_t> singles;
  std::vector<std::vector<std::size_t>> wide;
  for (const auto& c : out.live_clauses) (c.size() == 1 ? singles.push_back(c[0]) : wide.push_back(c));
  struct Check {
    Guard holds;
    std::vector<Guard> fails;  // disjoint, covering the complement
  };
  std::vector<Check> checks;
  if (!singles.empty()) {
    SparseRow sum;
    for (std::size_t x : singles) sum.emplace_back(x, Rational(1));
    checks.push_back({sum_at_least_one(singles), {Guard{{Constraint{sum, Rational(0)}}}}});
  }
  for (const auto& c : wide) {
    Check ch{all_positive(c), {}};
    for (std::size_t a = 0; a < c.size(); ++a) {
      Guard g = Guard::zero(c[a]);
      for (std::size_t b = 0; b < a; ++b) g = g & Guard::positive(c[b]);
      ch.fails.push_back(g);
    }
    checks.push_back(std::move(ch));
  }
  const bool check_chain = checks.size() > 1;

  // States.
  out.main_state = m.add_state("main");
  m.initial_state = out.main_state;
  std::vector<std::size_t> check_states;
  if (check_chain) {
    for (std::size_t t = 0; t < checks.size(); ++t) check_states.push_back(m.add_state("check_" + std::to_string(t)));
  }
  // Per support entry: the entry state, then `outer` and one stage per
  // coefficient variable (parametric) or a single `loop` (constant).
  struct Block {
    std::size_t entry = 0, outer = 0, loop = 0;
    std::vector<std::size_t> stages;
  };
  std::vector<Block> blocks;
  for (std::size_t e = 0; e < out.edges.size(); ++e) {
    const auto [i, j] = out.edges[e];
    const std::string base = names[i] + "_" + names[j];
    const LinearFn& fn = *chain.transfer(i, j);
    Block b;
    b.entry = e == 0 && !check_chain ? out.main_state : m.add_state(base + "_enter");
    if (fn.is_constant()) {
      b.loop = m.add_state(base + "_loop");
    } else {
      b.outer = m.add_state(base + "_outer");
      for (std::size_t l : fn.coefficient_support()) b.stages.push_back(m.add_state(base + "_" + names[l]));
    }
    blocks.push_back(std::move(b));
  }
  std::vector<std::size_t> entry;
  for (const auto& b : blocks) entry.push_back(b.entry);
  std::vector<std::size_t> clamp_states;
  for (std::size_t j : clampable) clamp_states.push_back(m.add_state("clamp_" + names[j]));
  const std::size_t final_state = m.add_state("final");
  if (out.clamped) out.error_state = m.add_state("error");

  const std::size_t after_edges = clamp_states.empty() ? final_state : clamp_states.front();
  const std::size_t first_step = out.edges.empty() ? after_edges : entry.front();

  // Rewards and the check chain.
  if (check_chain) {
    m.add_transition(out.main_state, Guard::always(), Update::identity(), check_states.front());
    for (std::size_t t = 0; t < checks.size(); ++t) {
      std::size_t next = t + 1 < checks.size() ? check_states[t + 1] : first_step;
      m.rewards.push_back({check_states[t], checks[t].holds, Rational(1)});
      m.add_transition(check_states[t], checks[t].holds, Update::identity(), first_step);
      for (const auto& g : checks[t].fails) m.add_transition(check_states[t], g, Update::identity(), next);
    }
  } else {
    if (!checks.empty()) m.rewards.push_back({out.main_state, checks.front().holds, Rational(1)});
    if (out.edges.empty()) m.add_transition(out.main_state, Guard::always(), Update::identity(), after_edges);
  }

  auto slot = [&](IndexPair ij, std::size_t l) -> Rational {
    const LinearFn& fn = *chain.transfer(ij.first, ij.second);
    const Rational& exponent = l == 0 ? fn.offset : fn.coeffs[l - 1];
    if (sgn(exponent) == 0) return Rational(1);
    auto it = table.entries.find(ij);
    if (it == table.entries.end() || !it->second[l]) {
      throw ModelError("exp_table has no value for " + names[ij.first] + "->" + names[ij.second] + " var " +
                       (l == 0 ? std::string("offset") : names[l - 1]));
    }
    return *it->second[l];
  };

  // One block per support entry.
  for (std::size_t e = 0; e < out.edges.size(); ++e) {
    const IndexPair ij = out.edges[e];
    const auto [i, j] = ij;
    const LinearFn& fn = *chain.transfer(i, j);
    const std::size_t chi = out.chi[e];
    const std::size_t next = e + 1 < out.edges.size() ? entry[e + 1] : after_edges;

    if (fn.is_constant()) {
      const Rational stay = slot(ij, 0);
      const std::size_t loop = blocks[e].loop;
      m.add_transition(entry[e], Guard::always(), Update().copy(out.alpha1, i), loop);
      add_branches(m, loop, Guard::positive(out.alpha1), Rational(1) - stay,
                   Update().add(chi, 1).add(out.alpha1, -1), loop, Update().add(out.alpha1, -1), loop);
      m.add_transition(loop, Guard::zero(out.alpha1), Update::identity(), next);
      continue;
    }

    // Per individual of compartment i: survive the offset with p0, then each
    // u_l countdown with p_l; any failure transfers the individual.
    const std::vector<std::size_t> coeff = fn.coefficient_support();
    const std::size_t outer = blocks[e].outer;
    const std::vector<std::size_t>& stage = blocks[e].stages;

    m.add_transition(entry[e], Guard::always(), Update().copy(out.alpha0, i), outer);
    add_branches(m, outer, Guard::positive(out.alpha0), slot(ij, 0),
                 Update().add(out.alpha0, -1).copy(out.alpha1, coeff[0]), stage[0],
                 Update().add(out.alpha0, -1).add(chi, 1), outer);
    m.add_transition(outer, Guard::zero(out.alpha0), Update::identity(), next);
    for (std::size_t t = 0; t < coeff.size(); ++t) {
      add_branches(m, stage[t], Guard::positive(out.alpha1), slot(ij, coeff[t] + 1), Update().add(out.alpha1, -1),
                   stage[t], Update().add(chi, 1).set(out.alpha1, 0), outer);
      if (t + 1 < coeff.size()) {
        m.add_transition(stage[t], Guard::zero(out.alpha1), Update().copy(out.alpha1, coeff[t + 1]), stage[t + 1]);
      } else {
        m.add_transition(stage[t], Guard::zero(out.alpha1), Update::identity(), outer);
      }
    }
  }

  // Net flow per compartment as a sparse row over accumulators.
  std::vector<SparseRow> inflow(k), outflow(k);
  for (std::size_t e = 0; e < out.edges.size(); ++e) {
    outflow[out.edges[e].first].emplace_back(out.chi[e], Rational(1));
    inflow[out.edges[e].second].emplace_back(out.chi[e], Rational(1));
  }

  // Clamp checks: raw = u_j + in_j - out_j. When raw < 0, preload u_j with
  // out_j - in_j so the final update lands on 0, and raise the flag.
  for (std::size_t c = 0; c < clampable.size(); ++c) {
    const std::size_t j = clampable[c];
    const std::size_t next = c + 1 < clamp_states.size() ? clamp_states[c + 1] : final_state;
    SparseRow raw{{j, Rational(1)}};
    for (const auto& t : inflow[j]) raw.emplace_back(t.first, Rational(1));
    for (const auto& t : outflow[j]) raw.emplace_back(t.first, Rational(-1));
    SparseRow neg;
    for (const auto& [x, a] : raw) neg.emplace_back(x, Rational(-a));
    m.add_transition(clamp_states[c], Guard{{Constraint{neg, Rational(0)}}}, Update::identity(), next);
    SparseRow deficit;
    for (const auto& t : outflow[j]) deficit.emplace_back(t.first, Rational(1));
    for (const auto& t : inflow[j]) deficit.emplace_back(t.first, Rational(-1));
    m.add_transition(clamp_states[c], Guard{{Constraint{raw, Rational(-1)}}},
                     Update().assign(j, deficit).set(*out.clamped, 1), next);
  }

  // The single update of a simulated step.
  Update apply_step;
  for (std::size_t j = 0; j < k; ++j) {
    if (inflow[j].empty() && outflow[j].empty()) continue;
    SparseRow row{{j, Rational(1)}};
    for (const auto& t : inflow[j]) row.emplace_back(t.first, Rational(1));
    for (const auto& t : outflow[j]) row.emplace_back(t.first, Rational(-1));
    apply_step.assign(j, row);
  }
  for (std::size_t chi : out.chi) apply_step.set(chi, 0);
  if (out.clamped) {
    m.add_transition(final_state, Guard::zero(*out.clamped), apply_step, out.main_state);
    Update to_error = apply_step;
    to_error.set(*out.clamped, 0);
    m.add_transition(final_state, Guard::positive(*out.clamped), to_error, *out.error_state);
    m.add_transition(*out.error_state, Guard::always(), Update::identity(), out.main_state);
  } else {
    m.add_transition(final_state, Guard::always(), apply_step, out.main_state);
  }
  return out;
}

Config embed_state(const CompiledScm& c, const StateVector& u) {
  Config config{c.main_state, std::vector<Count>(c.scm.counters.size(), 0)};
  std::copy(u.begin(), u.end(), config.counters.begin());
  return config;
}

StateVector project_state(const CompiledScm&, const Config& config, std::size_t k) {
  return StateVector(config.counters.begin(), config.counters.begin() + static_cast<std::ptrdiff_t>(k));
}

}  // namespace bichain
