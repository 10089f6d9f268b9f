#include "bichain/scm.hpp"

#include <algorithm>
#include <deque>
#include <set>
#include <tuple>

#include "bichain/error.hpp"
#include "bichain/semantics.hpp"

namespace bichain {

// ---------------------------------------------------------------------------
// Building blocks

Guard Guard::positive(std::size_t x) { return Guard{{Constraint{{{x, Rational(-1)}}, Rational(-1)}}}; }

Guard Guard::zero(std::size_t x) { return Guard{{Constraint{{{x, Rational(1)}}, Rational(0)}}}; }

Guard Guard::operator&(const Guard& other) const {
  Guard g = *this;
  g.rows.insert(g.rows.end(), other.rows.begin(), other.rows.end());
  return g;
}

Update& Update::set(std::size_t x, Rational value) { return assign(x, {}, std::move(value)); }

Update& Update::copy(std::size_t x, std::size_t from) { return assign(x, {{from, Rational(1)}}, Rational(0)); }

Update& Update::add(std::size_t x, Count delta) {
  return assign(x, {{x, Rational(1)}}, Rational(static_cast<long>(delta)));
}

Update& Update::assign(std::size_t x, SparseRow coeffs, Rational constant) {
  rows.push_back(Assignment{x, std::move(coeffs), std::move(constant)});
  return *this;
}

std::size_t Scm::add_state(std::string name) {
  if (state_index(name)) throw InvariantError("duplicate SCM state '" + name + "'");
  states.push_back(std::move(name));
  return states.size() - 1;
}

std::size_t Scm::add_counter(std::string name, Count initial) {
  if (counter_index(name)) throw InvariantError("duplicate SCM counter '" + name + "'");
  counters.push_back(std::move(name));
  initial_counters.push_back(initial);
  return counters.size() - 1;
}

void Scm::add_transition(std::size_t source, Guard guard, Update update, std::size_t target, Rational prob) {
  transitions.push_back(ScmTransition{source, std::move(guard), std::move(update), target, std::move(prob)});
}

std::optional<std::size_t> Scm::state_index(std::string_view name) const {
  auto it = std::find(states.begin(), states.end(), name);
  if (it == states.end()) return std::nullopt;
  return static_cast<std::size_t>(it - states.begin());
}

std::optional<std::size_t> Scm::counter_index(std::string_view name) const {
  auto it = std::find(counters.begin(), counters.end(), name);
  if (it == counters.end()) return std::nullopt;
  return static_cast<std::size_t>(it - counters.begin());
}

std::string render_config(const Scm& m, const Config& c) {
  std::string s = m.states[c.state] + "(";
  for (std::size_t i = 0; i < c.counters.size(); ++i) {
    s += (i ? "," : "") + std::to_string(c.counters[i]);
  }
  return s + ")";
}

// ---------------------------------------------------------------------------
// Evaluation

namespace {

// Integer fast path when every coefficient is a small integer.
Rational eval_row(const SparseRow& row, const Rational& constant, const std::vector<Count>& c) {
  bool integral = constant.get_den() == 1 && constant.get_num().fits_slong_p();
  for (const auto& [x, a] : row) integral = integral && a.get_den() == 1 && a.get_num().fits_slong_p();
  if (integral) {
    long acc = constant.get_num().get_si();
    for (const auto& [x, a] : row) acc += a.get_num().get_si() * static_cast<long>(c[x]);
    return Rational(acc);
  }
  Rational acc = constant;
  for (const auto& [x, a] : row) acc += a * static_cast<long>(c[x]);
  return acc;
}

bool holds_row(const Constraint& r, const std::vector<Count>& c) {
  bool integral = r.bound.get_den() == 1 && r.bound.get_num().fits_slong_p();
  for (const auto& [x, a] : r.coeffs) integral = integral && a.get_den() == 1 && a.get_num().fits_slong_p();
  if (integral) {
    long acc = 0;
    for (const auto& [x, a] : r.coeffs) acc += a.get_num().get_si() * static_cast<long>(c[x]);
    return acc <= r.bound.get_num().get_si();
  }
  return eval_row(r.coeffs, Rational(0), c) <= r.bound;
}

// Transitions grouped by source state.
struct Index {
  explicit Index(const Scm& m) : by_source(m.states.size()) {
    for (std::size_t t = 0; t < m.transitions.size(); ++t) by_source[m.transitions[t].source].push_back(t);
  }
  std::vector<std::vector<std::size_t>> by_source;
};

std::vector<std::pair<Config, Rational>> step(const Scm& m, const Index& idx, const Config& from) {
  std::vector<std::pair<Config, Rational>> out;
  for (std::size_t t : idx.by_source[from.state]) {
    const ScmTransition& tr = m.transitions[t];
    if (sgn(tr.prob) == 0 || !holds(tr.guard, from.counters)) continue;
    out.emplace_back(Config{tr.target, apply(tr.update, from.counters)}, tr.prob);
  }
  return out;
}

}  // namespace

bool holds(const Guard& g, const std::vector<Count>& c) {
  return std::all_of(g.rows.begin(), g.rows.end(), [&](const Constraint& r) { return holds_row(r, c); });
}

std::vector<Count> apply(const Update& u, const std::vector<Count>& c) {
  std::vector<Count> out(c);
  for (const auto& a : u.rows) {
    Rational v = eval_row(a.coeffs, a.constant, c);
    if (v.get_den() != 1 || sgn(v) < 0 || !v.get_num().fits_slong_p()) {
      throw InvariantError("update yields " + to_string(v) + ", not a nonnegative integer");
    }
    out[a.counter] = v.get_num().get_si();
  }
  return out;
}

std::vector<std::pair<Config, Rational>> scm_step(const Scm& m, const Config& from) {
  return step(m, Index(m), from);
}

Rational scm_reward(const Scm& m, const Config& c) {
  Rational r = 0;
  for (const auto& rw : m.rewards) {
    if (rw.state == c.state && holds(rw.guard, c.counters)) r += rw.value;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Validation

ScmReport validate_scm(const Scm& m, std::size_t budget, std::optional<Config> from) {
  ScmReport report;
  Index idx(m);
  Config start = from ? *from : Config{m.initial_state, m.initial_counters};
  std::set<Config> seen{start};
  std::deque<Config> queue{start};
  auto violation = [&](const std::string& what) {
    if (report.violations.size() < 20) report.violations.push_back(what);
  };
  while (!queue.empty()) {
    if (report.explored == budget) {
      report.budget_exceeded = true;
      break;
    }
    Config c = std::move(queue.front());
    queue.pop_front();
    ++report.explored;
    std::vector<std::pair<Config, Rational>> succ;
    try {
      succ = step(m, idx, c);
    } catch (const InvariantError& e) {
      violation("at " + render_config(m, c) + ": " + e.what());
      continue;
    }
    Rational total = 0;
    std::set<Config> targets;
    for (const auto& [d, p] : succ) {
      total += p;
      if (!targets.insert(d).second) {
        violation("determinism: two transitions from " + render_config(m, c) + " reach " + render_config(m, d));
      }
      if (seen.insert(d).second) queue.push_back(d);
    }
    if (total != 1) {
      violation("closure: probabilities from " + render_config(m, c) + " sum to " + to_string(total));
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Exact analysis

ScmDistribution scm_distribution(const Scm& m, const Config& from, const ConfigPredicate& stop, std::size_t budget) {
  Index idx(m);
  // Expanded nodes; stop configurations reached by a transition are leaves.
  std::map<Config, std::size_t> id;
  std::vector<Config> nodes;
  std::vector<std::vector<std::pair<std::size_t, Rational>>> edges;  // to node
  std::vector<std::vector<std::pair<Config, Rational>>> exits;       // to stop
  std::map<Config, std::size_t> stop_id;

  auto node = [&](const Config& c) {
    auto [it, inserted] = id.try_emplace(c, nodes.size());
    if (inserted) {
      if (nodes.size() >= budget) throw ResourceError("SCM exploration exceeded budget of " + std::to_string(budget));
      nodes.push_back(c);
      edges.emplace_back();
      exits.emplace_back();
    }
    return std::pair{it->second, inserted};
  };
  std::deque<std::size_t> queue{node(from).first};
  while (!queue.empty()) {
    std::size_t n = queue.front();
    queue.pop_front();
    for (auto& [d, p] : step(m, idx, nodes[n])) {
      if (stop(d)) {
        exits[n].emplace_back(std::move(d), p);
        continue;
      }
      auto [t, fresh] = node(d);
      edges[n].emplace_back(t, p);
      if (fresh) queue.push_back(t);
    }
  }

  const std::size_t n_nodes = nodes.size();
  std::vector<std::size_t> indegree(n_nodes, 0);
  for (const auto& row : edges) {
    for (const auto& [t, p] : row) ++indegree[t];
  }
  std::vector<Rational> prob(n_nodes, Rational(0));
  std::vector<std::size_t> depth(n_nodes, 0);
  prob[0] = 1;
  std::deque<std::size_t> ready;
  for (std::size_t n = 0; n < n_nodes; ++n) {
    if (indegree[n] == 0) ready.push_back(n);
  }
  ScmDistribution out;
  out.explored = n_nodes;
  std::size_t processed = 0;
  while (!ready.empty()) {
    std::size_t n = ready.front();
    ready.pop_front();
    ++processed;
    if (sgn(prob[n]) != 0) out.reward += prob[n] * scm_reward(m, nodes[n]);
    if (edges[n].empty() && exits[n].empty()) out.deficit += prob[n];
    for (const auto& [d, p] : exits[n]) {
      out.mass[d] += prob[n] * p;
      out.max_steps = std::max(out.max_steps, depth[n] + 1);
    }
    for (const auto& [t, p] : edges[n]) {
      prob[t] += prob[n] * p;
      depth[t] = std::max(depth[t], depth[n] + 1);
      if (--indegree[t] == 0) ready.push_back(t);
    }
  }
  if (processed != n_nodes) throw DomainError("configurations before the stop set form a cycle");
  return out;
}

namespace {

// Dense exact solve of A x = b; throws DomainError when singular.
std::vector<Rational> solve_dense(std::vector<std::vector<Rational>> a, std::vector<Rational> b) {
  const std::size_t n = b.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    while (pivot < n && sgn(a[pivot][col]) == 0) ++pivot;
    if (pivot == n) throw DomainError("singular reward system");
    std::swap(a[pivot], a[col]);
    std::swap(b[pivot], b[col]);
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col || sgn(a[r][col]) == 0) continue;
      Rational f = a[r][col] / a[col][col];
      for (std::size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
      b[r] -= f * b[col];
    }
  }
  std::vector<Rational> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = b[i] / a[i][i];
  return x;
}

}  // namespace

Rational scm_expected_reward(const Scm& m, const Config& from, std::size_t anchor, const ConfigPredicate& target,
                             std::size_t budget) {
  if (target(from)) return Rational(0);
  auto stop = [&](const Config& c) { return c.state == anchor || target(c); };
  std::map<Config, std::size_t> id{{from, 0}};
  std::vector<Config> nodes{from};
  std::vector<ScmDistribution> cycle;
  for (std::size_t n = 0; n < nodes.size(); ++n) {
    cycle.push_back(scm_distribution(m, nodes[n], stop));
    if (sgn(cycle.back().deficit) != 0) throw DomainError("SCM run gets stuck before reaching an anchor");
    for (const auto& [d, p] : cycle.back().mass) {
      if (target(d) || id.count(d)) continue;
      if (nodes.size() >= budget) throw ResourceError("reward system exceeded budget of " + std::to_string(budget));
      id.emplace(d, nodes.size());
      nodes.push_back(d);
    }
  }
  const std::size_t n = nodes.size();
  std::vector<std::vector<Rational>> a(n, std::vector<Rational>(n, Rational(0)));
  std::vector<Rational> b(n);
  for (std::size_t i = 0; i < n; ++i) {
    a[i][i] = 1;
    b[i] = cycle[i].reward;
    auto self = cycle[i].mass.find(nodes[i]);
    if (self != cycle[i].mass.end() && self->second == 1) {
      // Trapped: contributes nothing more if it earns nothing.
      if (sgn(b[i]) != 0) throw DomainError("reward accumulates forever at " + render_config(m, nodes[i]));
      continue;
    }
    for (const auto& [d, p] : cycle[i].mass) {
      if (target(d)) continue;
      a[i][id.at(d)] -= p;
    }
  }
  return solve_dense(std::move(a), std::move(b))[0];
}

// ---------------------------------------------------------------------------
// Simulation

ScmTrace scm_simulate(const Scm& m, std::uint64_t seed, std::size_t max_steps, const ConfigPredicate& stop,
                      std::optional<Config> from, bool record) {
  Index idx(m);
  Rng rng(seed);
  ScmTrace trace;
  Config c = from ? *from : Config{m.initial_state, m.initial_counters};
  if (record) trace.configs.push_back(c);
  for (;;) {
    if (stop && stop(c)) break;
    auto succ = step(m, idx, c);
    if (succ.empty()) break;
    if (succ.size() == 1 && succ[0].first == c) break;
    if (trace.steps == max_steps) throw ResourceError("simulation exceeded " + std::to_string(max_steps) + " steps");
    trace.reward += scm_reward(m, c);
    double u = rng.uniform();
    double cum = 0;
    std::size_t pick = succ.size() - 1;
    for (std::size_t t = 0; t < succ.size(); ++t) {
      cum += succ[t].second.get_d();
      if (u < cum) {
        pick = t;
        break;
      }
    }
    c = std::move(succ[pick].first);
    ++trace.steps;
    if (record) trace.configs.push_back(c);
  }
  trace.final = std::move(c);
  return trace;
}

// ---------------------------------------------------------------------------
// Text dump

namespace {

std::string render_linear(const SparseRow& row, const Rational& constant, const Scm& m) {
  std::string out;
  for (const auto& [x, a] : row) {
    if (sgn(a) == 0) continue;
    Rational mag = abs(a);
    if (out.empty()) {
      if (sgn(a) < 0) out += "-";
    } else {
      out += sgn(a) < 0 ? " - " : " + ";
    }
    if (mag != 1) out += to_string(mag) + "*";
    out += m.counters[x];
  }
  if (sgn(constant) != 0 || out.empty()) {
    if (out.empty()) {
      out = to_string(constant);
    } else {
      out += (sgn(constant) < 0 ? " - " : " + ") + to_string(Rational(abs(constant)));
    }
  }
  return out;
}

}  // namespace

std::string render_guard(const Guard& g, const Scm& m) {
  if (g.rows.empty()) return "true";
  std::string out;
  for (const auto& r : g.rows) {
    if (!out.empty()) out += " & ";
    bool flip = std::all_of(r.coeffs.begin(), r.coeffs.end(), [](const auto& t) { return sgn(t.second) <= 0; });
    if (flip) {
      SparseRow neg;
      for (const auto& [x, a] : r.coeffs) neg.emplace_back(x, Rational(-a));
      out += render_linear(neg, Rational(0), m) + " >= " + to_string(Rational(-r.bound));
    } else {
      out += render_linear(r.coeffs, Rational(0), m) + " <= " + to_string(r.bound);
    }
  }
  return out;
}

std::string render_update(const Update& u, const Scm& m) {
  std::string out;
  for (const auto& a : u.rows) {
    if (!out.empty()) out += ", ";
    out += m.counters[a.counter] + "' = " + render_linear(a.coeffs, a.constant, m);
  }
  return out;
}

std::string dump_scm(const Scm& m) {
  std::string out = "scm\n";
  out += "initial " + m.states[m.initial_state] + "\n";
  for (std::size_t i = 0; i < m.counters.size(); ++i) {
    out += "counter " + m.counters[i] + " = " + std::to_string(m.initial_counters[i]) + "\n";
  }
  std::vector<std::string> names(m.states);
  std::sort(names.begin(), names.end());
  for (const auto& s : names) out += "state " + s + "\n";

  using Key = std::tuple<std::string, std::string, Rational, std::string, std::string>;
  std::vector<Key> lines;
  for (const auto& t : m.transitions) {
    lines.emplace_back(m.states[t.source], m.states[t.target], t.prob, render_guard(t.guard, m),
                       render_update(t.update, m));
  }
  std::sort(lines.begin(), lines.end(), [](const Key& a, const Key& b) {
    if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) < std::get<0>(b);
    if (std::get<1>(a) != std::get<1>(b)) return std::get<1>(a) < std::get<1>(b);
    if (std::get<2>(a) != std::get<2>(b)) return std::get<2>(a) < std::get<2>(b);
    return std::tie(std::get<3>(a), std::get<4>(a)) < std::tie(std::get<3>(b), std::get<4>(b));
  });
  for (const auto& [src, dst, p, g, u] : lines) {
    out += "transition " + src + " -> " + dst + " p=" + to_string(p) + " [" + g + "] {" + u + "}\n";
  }
  std::vector<std::string> rewards;
  for (const auto& r : m.rewards) {
    rewards.push_back("reward " + m.states[r.state] + " [" + render_guard(r.guard, m) + "] " + to_string(r.value));
  }
  std::sort(rewards.begin(), rewards.end());
  for (const auto& r : rewards) out += r + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Gadgets

namespace {

// Adds the p branch and the 1 - p branch, skipping whichever is impossible.
void add_branches(Scm& m, std::size_t src, const Guard& g, const Rational& p, Update on_p, std::size_t to_p,
                  Update on_q, std::size_t to_q) {
  if (sgn(p) != 0) m.add_transition(src, g, std::move(on_p), to_p, p);
  if (p != 1) m.add_transition(src, g, std::move(on_q), to_q, Rational(1) - p);
}

void check_probability(const Rational& p) {
  if (sgn(p) < 0 || p > 1) throw DomainError("gadget probability must lie in [0,1]");
}

}  // namespace

Scm build_binomial_gadget(const Rational& p) {
  check_probability(p);
  Scm m;
  std::size_t q0 = m.add_state("q0"), q1 = m.add_state("q1"), q2 = m.add_state("q2");
  std::size_t c1 = m.add_counter("chi1"), c2 = m.add_counter("chi2"), c3 = m.add_counter("chi3");
  m.initial_state = q0;
  m.add_transition(q0, Guard::always(), Update().set(c2, 0).copy(c3, c1), q1);
  add_branches(m, q1, Guard::positive(c3), p, Update().add(c2, 1).add(c3, -1), q1, Update().add(c3, -1), q1);
  m.add_transition(q1, Guard::zero(c3), Update::identity(), q2);
  m.add_transition(q2, Guard::always(), Update::identity(), q2);
  return m;
}

Scm build_bernoulli_gadget(const std::vector<Rational>& ps) {
  if (ps.empty()) throw DomainError("Bernoulli gadget needs at least p0");
  for (const auto& p : ps) check_probability(p);
  const std::size_t n = ps.size() - 1;
  Scm m;
  std::vector<std::size_t> stage;
  std::size_t q0 = m.add_state("q0");
  for (std::size_t l = 1; l <= n; ++l) stage.push_back(m.add_state("q" + std::to_string(l)));
  std::size_t qx = m.add_state("qx"), qy = m.add_state("qy");
  std::vector<std::size_t> c;
  for (std::size_t l = 1; l <= n; ++l) c.push_back(m.add_counter("chi" + std::to_string(l)));
  std::size_t res = m.add_counter("chi" + std::to_string(n + 1));
  std::size_t tmp = m.add_counter("chi" + std::to_string(n + 2));
  m.initial_state = q0;

  const Update fail = Update().add(res, 1).set(tmp, 0);
  Update enter = n == 0 ? Update::identity() : Update().copy(tmp, c[0]);
  add_branches(m, q0, Guard::always(), ps[0], enter, n == 0 ? qy : stage[0], fail, qx);
  for (std::size_t l = 0; l < n; ++l) {
    add_branches(m, stage[l], Guard::positive(tmp), ps[l + 1], Update().add(tmp, -1), stage[l], fail, qx);
    if (l + 1 < n) {
      m.add_transition(stage[l], Guard::zero(tmp), Update().copy(tmp, c[l + 1]), stage[l + 1]);
    } else {
      m.add_transition(stage[l], Guard::zero(tmp), Update::identity(), qy);
    }
  }
  m.add_transition(qx, Guard::always(), Update::identity(), qx);
  m.add_transition(qy, Guard::always(), Update::identity(), qy);
  return m;
}

}  // namespace bichain
