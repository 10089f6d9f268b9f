#include "bichain/prism.hpp"

#include <algorithm>
#include <limits>
#include <map>

#include "bichain/error.hpp"

namespace bichain {

namespace {

constexpr Count kPrismIntMax = std::numeric_limits<std::int32_t>::max();

std::vector<std::size_t> outdegrees(const BinomialChain& chain) {
  std::vector<std::size_t> deg(chain.size(), 0);
  for (const auto& e : support(chain)) ++deg[e.first];
  return deg;
}

std::vector<std::size_t> topological_sequence(const BinomialChain& chain) {
  std::vector<std::size_t> pos = topo_order(chain);
  std::vector<std::size_t> seq(pos.size());
  for (std::size_t i = 0; i < pos.size(); ++i) seq[pos[i]] = i;
  return seq;
}

std::string render_sum(const SparseRow& row, const Rational& constant, const Scm& m) {
  std::string out;
  for (const auto& [x, a] : row) {
    if (sgn(a) == 0) continue;
    Rational mag = abs(a);
    if (out.empty()) {
      if (sgn(a) < 0) out += "-";
    } else {
      out += sgn(a) < 0 ? "-" : "+";
    }
    if (mag != 1) out += to_string(mag) + "*";
    out += m.counters[x];
  }
  if (out.empty()) return to_string(constant);
  if (sgn(constant) != 0) out += (sgn(constant) < 0 ? "-" : "+") + to_string(Rational(abs(constant)));
  return out;
}

std::string render_updates(const ScmTransition& t, const Scm& m) {
  std::string out = "(loc'=" + std::to_string(t.target) + ")";
  for (const auto& a : t.update.rows) out += " & (" + m.counters[a.counter] + "'=" + render_sum(a.coeffs, a.constant, m) + ")";
  return out;
}

std::string state_guard(std::size_t loc, const Guard& g, const Scm& m) {
  std::string out = "loc=" + std::to_string(loc);
  if (!g.rows.empty()) out += " & " + render_guard(g, m);
  return out;
}

// PRISM expression for "no live clause holds".
std::string absorbing_expression(const CompiledScm& c, const BinomialChain& chain) {
  const auto& names = chain.names();
  if (c.live_clauses.empty()) return "true";
  bool singles = std::all_of(c.live_clauses.begin(), c.live_clauses.end(), [](const auto& cl) { return cl.size() == 1; });
  if (singles) {
    std::string sum;
    for (const auto& cl : c.live_clauses) sum += (sum.empty() ? "" : " + ") + names[cl[0]];
    return "(" + sum + " = 0)";
  }
  std::string out;
  for (const auto& cl : c.live_clauses) {
    std::string conj;
    for (std::size_t x : cl) conj += (conj.empty() ? "" : " & ") + names[x] + " >= 1";
    out += (out.empty() ? "" : " | ") + ("(" + conj + ")");
  }
  return "!(" + out + ")";
}

// Compartments a clamp state may temporarily overwrite in the middle of a step.
std::vector<bool> volatile_compartments(const BinomialChain& chain) {
  auto deg = outdegrees(chain);
  std::vector<bool> out(chain.size());
  for (std::size_t j = 0; j < chain.size(); ++j) out[j] = deg[j] >= 2;
  return out;
}

bool mentions_volatile(const std::vector<std::size_t>& compartments, const std::vector<bool>& vol) {
  return std::any_of(compartments.begin(), compartments.end(), [&](std::size_t x) { return vol[x]; });
}

}  // namespace

PrismBounds certified_bounds(const CompiledScm& c, const BinomialChain& chain, std::optional<Count> cap) {
  const std::size_t k = chain.size();
  const Scm& m = c.scm;
  PrismBounds b{std::vector<Count>(m.counters.size(), 0)};
  const auto edges = support(chain);
  const auto deg = outdegrees(chain);

  std::vector<Count> cum(k, 0);
  if (is_closed(chain)) {
    cum.assign(k, one_norm(chain.initial()));
  } else {
    // Total that can ever enter j: its initial count plus everything that
    // ever leaves a predecessor.
    for (std::size_t i : topological_sequence(chain)) {
      cum[i] += chain.initial()[i];
      for (const auto& [from, to] : edges) {
        if (from == i) cum[to] += cum[i];
      }
    }
  }
  for (std::size_t j = 0; j < k; ++j) b.upper[j] = deg[j] >= 2 ? static_cast<Count>(deg[j]) * cum[j] : cum[j];
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const auto [i, j] = edges[e];
    b.upper[c.chi[e]] = cum[i];
    const LinearFn& fn = *chain.transfer(i, j);
    if (fn.is_constant()) {
      b.upper[c.alpha1] = std::max(b.upper[c.alpha1], cum[i]);
    } else {
      b.upper[c.alpha0] = std::max(b.upper[c.alpha0], cum[i]);
      for (std::size_t l : fn.coefficient_support()) b.upper[c.alpha1] = std::max(b.upper[c.alpha1], cum[l]);
    }
  }
  if (c.clamped) b.upper[*c.clamped] = 1;

  for (std::size_t x = 0; x < b.upper.size(); ++x) {
    if (b.upper[x] > kPrismIntMax) {
      throw DomainError("bound overflow: counter " + m.counters[x] + " needs " + std::to_string(b.upper[x]) +
                        ", beyond a 32-bit PRISM int");
    }
    if (cap && b.upper[x] > *cap) {
      throw DomainError("bound overflow: counter " + m.counters[x] + " needs " + std::to_string(b.upper[x]) +
                        ", above the cap " + std::to_string(*cap));
    }
  }
  return b;
}

std::string export_prism(const CompiledScm& c, const BinomialChain& chain, const PrismBounds& bounds) {
  const Scm& m = c.scm;
  const auto& names = chain.names();
  const std::size_t k = chain.size();
  if (bounds.upper.size() != m.counters.size()) throw DomainError("bounds do not match the counter count");

  std::string out = "dtmc\n\n";
  for (std::size_t i = 0; i < k; ++i) out += "const int " + names[i] + "_init = " + std::to_string(chain.initial()[i]) + ";\n";
  out += "const int N0 = " + std::to_string(one_norm(chain.initial())) + ";\n\n";

  out += "module bc\n";
  out += "  loc : [0.." + std::to_string(m.states.size() - 1) + "] init " + std::to_string(m.initial_state) + ";\n";
  for (std::size_t x = 0; x < m.counters.size(); ++x) {
    std::string init = x < k ? names[x] + "_init" : std::to_string(m.initial_counters[x]);
    out += "  " + m.counters[x] + " : [0.." + std::to_string(bounds.upper[x]) + "] init " + init + ";\n";
  }

  // Group branches sharing source and guard into one command, keeping
  // declaration order.
  std::vector<std::pair<std::pair<std::size_t, const Guard*>, std::vector<const ScmTransition*>>> commands;
  for (const auto& t : m.transitions) {
    auto it = std::find_if(commands.begin(), commands.end(), [&](const auto& cmd) {
      return cmd.first.first == t.source && *cmd.first.second == t.guard;
    });
    if (it == commands.end()) {
      commands.push_back({{t.source, &t.guard}, {&t}});
    } else {
      it->second.push_back(&t);
    }
  }
  std::stable_sort(commands.begin(), commands.end(),
                   [](const auto& a, const auto& b) { return a.first.first < b.first.first; });
  std::size_t last = m.states.size();
  for (const auto& [key, branches] : commands) {
    if (key.first != last) {
      out += "\n  // " + std::to_string(key.first) + ": " + m.states[key.first] + "\n";
      last = key.first;
    }
    out += "  [] " + state_guard(key.first, *key.second, m) + " -> ";
    if (branches.size() == 1 && branches.front()->prob == 1) {
      out += render_updates(*branches.front(), m);
    } else {
      for (std::size_t b = 0; b < branches.size(); ++b) {
        if (b) out += " + ";
        out += to_string(branches[b]->prob) + " : " + render_updates(*branches[b], m);
      }
    }
    out += ";\n";
  }
  out += "endmodule\n\n";

  if (c.error_state) out += "label \"error\" = loc=" + std::to_string(*c.error_state) + ";\n\n";

  out += "rewards \"time_step\"\n";
  for (const auto& r : m.rewards) out += "  " + state_guard(r.state, r.guard, m) + " : " + to_string(r.value) + ";\n";
  out += "endrewards\n";
  return out;
}

PropertyKind parse_property_kind(std::string_view name) {
  if (name == "PopInc") return PropertyKind::PopInc;
  if (name == "OS") return PropertyKind::OS;
  if (name == "EoE") return PropertyKind::EoE;
  throw DomainError("unknown property '" + std::string(name) + "' (expected PopInc, OS or EoE)");
}

std::string property_name(PropertyKind kind) {
  switch (kind) {
    case PropertyKind::PopInc: return "PopInc";
    case PropertyKind::OS: return "OS";
    case PropertyKind::EoE: return "EoE";
  }
  return "";
}

IndexPair one_shot_pair(const BinomialChain& chain) {
  const auto edges = support(chain);
  for (std::size_t i : topological_sequence(chain)) {
    for (const auto& e : edges) {
      if (e.first == i) return e;
    }
  }
  throw DomainError("the OS property needs at least one transfer");
}

std::string emit_property(const CompiledScm& c, const BinomialChain& chain, PropertyKind kind) {
  const auto vol = volatile_compartments(chain);
  const auto& names = chain.names();

  std::vector<std::size_t> live;
  for (const auto& cl : c.live_clauses) live.insert(live.end(), cl.begin(), cl.end());
  std::string absorbed = absorbing_expression(c, chain);
  if (mentions_volatile(live, vol)) absorbed = "(loc=" + std::to_string(c.main_state) + " & " + absorbed + ")";

  switch (kind) {
    case PropertyKind::PopInc: {
      std::string safe = c.error_state ? "!\"error\"" : "true";
      return "P=? [ " + safe + " U " + absorbed + " ]";
    }
    case PropertyKind::OS: {
      const auto [s, e] = one_shot_pair(chain);
      Predicate safe = Predicate::parse(names[s] + " >= " + names[s] + "_init", chain);
      Predicate target = Predicate::parse(names[e] + " = " + names[s] + "_init + " + names[e] + "_init", chain);
      std::string safe_text = safe.to_prism();
      std::string target_text = target.to_prism();
      if (vol[s]) safe_text = "(loc!=" + std::to_string(c.main_state) + " | " + safe_text + ")";
      if (vol[e]) target_text = "(loc=" + std::to_string(c.main_state) + " & " + target_text + ")";
      return "P=? [ " + safe_text + " U " + target_text + " ]";
    }
    case PropertyKind::EoE:
      return "R{\"time_step\"}=? [ F " + absorbed + " ]";
  }
  return "";
}

std::string emit_properties(const CompiledScm& c, const BinomialChain& chain, const std::vector<PropertyKind>& kinds) {
  std::string out;
  for (PropertyKind kind : kinds) out += "// " + property_name(kind) + "\n" + emit_property(c, chain, kind) + "\n";
  return out;
}

template <class Num>
Num evaluate_property(const Kernel<Num>& kernel, const ExplicitChain<Num>& ec, PropertyKind kind) {
  const BinomialChain& chain = kernel.chain();
  auto absorbed = [&](const StateVector& u) { return kernel.is_absorbing(u); };
  switch (kind) {
    case PropertyKind::PopInc:
      return clamp_free_until_probability(kernel, ec, absorbed);
    case PropertyKind::OS: {
      const auto [s, e] = one_shot_pair(chain);
      const auto& names = chain.names();
      Predicate safe = Predicate::parse(names[s] + " >= " + names[s] + "_init", chain);
      Predicate target = Predicate::parse(names[e] + " = " + names[s] + "_init + " + names[e] + "_init", chain);
      return until_probability(ec, safe, target);
    }
    case PropertyKind::EoE:
      return expected_hitting_times(ec)[ec.initial];
  }
  throw InvariantError("unknown property kind");
}

template Rational evaluate_property<Rational>(const Kernel<Rational>&, const ExplicitChain<Rational>&, PropertyKind);
template double evaluate_property<double>(const Kernel<double>&, const ExplicitChain<double>&, PropertyKind);

}  // namespace bichain
