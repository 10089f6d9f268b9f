#include "bichain/model.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <queue>
#include <set>

#include <json.hpp>

#include "bichain/error.hpp"

namespace bichain {

using nlohmann::json;
using nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// LinearFn

Rational LinearFn::operator()(const StateVector& x) const {
  Rational value = offset;
  for (std::size_t l = 0; l < coeffs.size(); ++l) {
    if (sgn(coeffs[l]) != 0 && x[l] != 0) value += coeffs[l] * static_cast<long>(x[l]);
  }
  return value;
}

bool LinearFn::is_zero() const { return sgn(offset) == 0 && is_constant(); }

bool LinearFn::is_constant() const {
  return std::all_of(coeffs.begin(), coeffs.end(), [](const Rational& a) { return sgn(a) == 0; });
}

std::vector<std::size_t> LinearFn::coefficient_support() const {
  std::vector<std::size_t> out;
  for (std::size_t l = 0; l < coeffs.size(); ++l) {
    if (sgn(coeffs[l]) != 0) out.push_back(l);
  }
  return out;
}

// ---------------------------------------------------------------------------
// BinomialChain

namespace {

constexpr std::array<std::string_view, 14> kReservedNames = {
    "loc", "alpha0", "alpha1", "clamped", "N0", "true", "false", "init",
    "const", "module", "endmodule", "formula", "rewards", "label"};

}  // namespace

bool is_valid_compartment_name(std::string_view name) {
  if (name.empty()) return false;
  if (!(std::isalpha(static_cast<unsigned char>(name[0])) || name[0] == '_')) return false;
  for (char c : name) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) return false;
  }
  if (std::find(kReservedNames.begin(), kReservedNames.end(), name) != kReservedNames.end()) return false;
  if (name.starts_with("chi_")) return false;
  if (name.ends_with("_init")) return false;
  return true;
}

BinomialChain::BinomialChain(std::vector<std::string> names, StateVector initial, TransferMatrix transfers,
                             std::optional<ExpTable> exp_table)
    : names_(std::move(names)),
      initial_(std::move(initial)),
      transfers_(std::move(transfers)),
      exp_table_(std::move(exp_table)) {
  const std::size_t k = names_.size();
  if (k == 0) throw ModelError("a chain needs at least one compartment");

  std::set<std::string_view> seen;
  for (const auto& n : names_) {
    if (!is_valid_compartment_name(n)) throw ModelError("invalid compartment name '" + n + "'");
    if (!seen.insert(n).second) throw ModelError("duplicate compartment name '" + n + "'");
  }
  if (initial_.size() != k) throw ModelError("initial vector has wrong length");
  for (std::size_t i = 0; i < k; ++i) {
    if (initial_[i] < 0) throw ModelError("negative initial population for '" + names_[i] + "'");
  }

  if (transfers_.size() != k) throw ModelError("transfer matrix has wrong number of rows");
  for (std::size_t i = 0; i < k; ++i) {
    if (transfers_[i].size() != k) throw ModelError("transfer matrix has wrong number of columns");
    for (std::size_t j = 0; j < k; ++j) {
      const auto& entry = transfers_[i][j];
      if (!entry) continue;
      const std::string label = names_[i] + "->" + names_[j];
      if (entry->coeffs.size() != k) throw ModelError("transfer " + label + " has wrong coefficient count");
      for (const auto& a : entry->coeffs) {
        if (sgn(a) < 0) throw ModelError("negative coefficient in transfer " + label);
      }
      if (sgn(entry->offset) < 0) throw ModelError("negative offset in transfer " + label);
      if (entry->is_zero()) throw ModelError("transfer " + label + " is identically zero; omit it instead");
    }
  }

  if (exp_table_) {
    if (exp_table_->error_exponent < 1) throw ModelError("exp_table error_exponent must be >= 1");
    for (const auto& [ij, slots] : exp_table_->entries) {
      const auto [i, j] = ij;
      if (i >= k || j >= k || !transfers_[i][j]) {
        throw ModelError("exp_table entry for a transfer outside the support");
      }
      const std::string label = names_[i] + "->" + names_[j];
      if (slots.size() != k + 1) throw ModelError("exp_table entry " + label + " has wrong slot count");
      const LinearFn& fn = *transfers_[i][j];
      for (std::size_t l = 0; l <= k; ++l) {
        if (!slots[l]) continue;
        const Rational& p = *slots[l];
        if (sgn(p) < 0 || p > 1) throw ModelError("exp_table value outside [0,1] for " + label);
        const Rational& exponent = l == 0 ? fn.offset : fn.coeffs[l - 1];
        if (sgn(exponent) == 0 && p != 1) {
          throw ModelError("exp_table value for zero exponent must be 1 (" + label + ")");
        }
      }
    }
  }
}

std::optional<std::size_t> BinomialChain::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return i;
  }
  return std::nullopt;
}

BinomialChain BinomialChain::with_initial(StateVector initial) const {
  return BinomialChain(names_, std::move(initial), transfers_, exp_table_);
}

BinomialChain BinomialChain::with_exp_table(std::optional<ExpTable> table) const {
  return BinomialChain(names_, initial_, transfers_, std::move(table));
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

void reject_unknown_keys(const json& obj, std::initializer_list<std::string_view> allowed, const std::string& where) {
  for (const auto& [key, _] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ModelError("unknown key '" + key + "' in " + where);
    }
  }
}

const json& require(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ModelError(std::string("missing key '") + key + "' in " + where);
  return *it;
}

std::string require_string(const json& value, const std::string& where) {
  if (!value.is_string()) throw ModelError("expected a string in " + where);
  return value.get<std::string>();
}

Rational rational_field(const json& value, const std::string& where) {
  std::string text = require_string(value, where);
  try {
    return parse_rational(text);
  } catch (const SyntaxError&) {
    throw ModelError("malformed rational '" + text + "' in " + where);
  }
}

std::size_t compartment(const std::vector<std::string>& names, const std::string& name, const std::string& where) {
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw ModelError("unknown compartment '" + name + "' in " + where);
  return static_cast<std::size_t>(it - names.begin());
}

}  // namespace

BinomialChain parse_model(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw SyntaxError(std::string("model file is not valid JSON: ") + e.what(), e.byte);
  }
  if (!doc.is_object()) throw ModelError("model file must be a JSON object");
  reject_unknown_keys(doc, {"description", "compartments", "initial", "transfers", "exp_table"}, "model");
  if (auto d = doc.find("description"); d != doc.end() && !d->is_string()) {
    throw ModelError("'description' must be a string");
  }

  const json& jnames = require(doc, "compartments", "model");
  if (!jnames.is_array()) throw ModelError("'compartments' must be an array");
  std::vector<std::string> names;
  for (const auto& n : jnames) names.push_back(require_string(n, "'compartments'"));
  const std::size_t k = names.size();
  {
    std::set<std::string> unique(names.begin(), names.end());
    if (unique.size() != names.size()) throw ModelError("duplicate compartment name in 'compartments'");
  }

  StateVector initial(k, 0);
  const json& jinit = require(doc, "initial", "model");
  if (!jinit.is_object()) throw ModelError("'initial' must be an object");
  for (const auto& [name, value] : jinit.items()) {
    std::size_t i = compartment(names, name, "'initial'");
    if (!value.is_number_integer()) throw ModelError("initial population of '" + name + "' must be an integer");
    initial[i] = value.get<Count>();
  }

  BinomialChain::TransferMatrix transfers(k, std::vector<std::optional<LinearFn>>(k));
  if (auto it = doc.find("transfers"); it != doc.end()) {
    if (!it->is_array()) throw ModelError("'transfers' must be an array");
    for (const auto& jt : *it) {
      if (!jt.is_object()) throw ModelError("each transfer must be an object");
      reject_unknown_keys(jt, {"from", "to", "coeffs", "offset"}, "transfer");
      std::size_t i = compartment(names, require_string(require(jt, "from", "transfer"), "transfer 'from'"), "transfer");
      std::size_t j = compartment(names, require_string(require(jt, "to", "transfer"), "transfer 'to'"), "transfer");
      const std::string label = names[i] + "->" + names[j];
      if (transfers[i][j]) throw ModelError("duplicate transfer " + label);
      LinearFn fn{std::vector<Rational>(k), Rational(0)};
      if (auto c = jt.find("coeffs"); c != jt.end()) {
        if (!c->is_object()) throw ModelError("'coeffs' of " + label + " must be an object");
        for (const auto& [name, value] : c->items()) {
          fn.coeffs[compartment(names, name, "coeffs of " + label)] = rational_field(value, "coeffs of " + label);
        }
      }
      if (auto o = jt.find("offset"); o != jt.end()) fn.offset = rational_field(*o, "offset of " + label);
      transfers[i][j] = std::move(fn);
    }
  }

  std::optional<ExpTable> table;
  if (auto it = doc.find("exp_table"); it != doc.end()) {
    if (!it->is_object()) throw ModelError("'exp_table' must be an object");
    reject_unknown_keys(*it, {"error_exponent", "entries"}, "exp_table");
    ExpTable t;
    if (auto r = it->find("error_exponent"); r != it->end()) {
      if (!r->is_number_integer()) throw ModelError("exp_table error_exponent must be an integer");
      t.error_exponent = r->get<int>();
    }
    if (auto e = it->find("entries"); e != it->end()) {
      if (!e->is_array()) throw ModelError("exp_table 'entries' must be an array");
      for (const auto& je : *e) {
        reject_unknown_keys(je, {"from", "to", "var", "value"}, "exp_table entry");
        std::size_t i = compartment(names, require_string(require(je, "from", "exp_table entry"), "exp_table"), "exp_table");
        std::size_t j = compartment(names, require_string(require(je, "to", "exp_table entry"), "exp_table"), "exp_table");
        std::string var = require_string(require(je, "var", "exp_table entry"), "exp_table");
        std::size_t slot = var == "offset" ? 0 : compartment(names, var, "exp_table") + 1;
        auto& slots = t.entries[{i, j}];
        if (slots.empty()) slots.resize(k + 1);
        if (slots[slot]) throw ModelError("duplicate exp_table entry for " + names[i] + "->" + names[j] + " var " + var);
        slots[slot] = rational_field(require(je, "value", "exp_table entry"), "exp_table");
      }
    }
    table = std::move(t);
  }

  return BinomialChain(std::move(names), std::move(initial), std::move(transfers), std::move(table));
}

std::string serialize_model(const BinomialChain& chain) {
  const auto& names = chain.names();
  const std::size_t k = chain.size();
  ordered_json doc;
  doc["compartments"] = names;
  ordered_json init = ordered_json::object();
  for (std::size_t i = 0; i < k; ++i) init[names[i]] = chain.initial()[i];
  doc["initial"] = init;
  ordered_json transfers = ordered_json::array();
  for (const auto& [i, j] : support(chain)) {
    const LinearFn& fn = *chain.transfer(i, j);
    ordered_json jt;
    jt["from"] = names[i];
    jt["to"] = names[j];
    ordered_json coeffs = ordered_json::object();
    for (std::size_t l : fn.coefficient_support()) coeffs[names[l]] = to_string(fn.coeffs[l]);
    jt["coeffs"] = coeffs;
    jt["offset"] = to_string(fn.offset);
    transfers.push_back(jt);
  }
  doc["transfers"] = transfers;
  if (const auto& table = chain.exp_table()) {
    ordered_json jtable;
    jtable["error_exponent"] = table->error_exponent;
    ordered_json entries = ordered_json::array();
    for (const auto& [ij, slots] : table->entries) {
      for (std::size_t l = 0; l < slots.size(); ++l) {
        if (!slots[l]) continue;
        ordered_json je;
        je["from"] = names[ij.first];
        je["to"] = names[ij.second];
        je["var"] = l == 0 ? std::string("offset") : names[l - 1];
        je["value"] = to_string(*slots[l]);
        entries.push_back(je);
      }
    }
    jtable["entries"] = entries;
    doc["exp_table"] = jtable;
  }
  return doc.dump(2) + "\n";
}

std::vector<std::string> model_warnings(const BinomialChain& chain) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < chain.size(); ++i) {
    if (chain.transfer(i, i)) {
      out.push_back("diagonal transfer " + chain.names()[i] + "->" + chain.names()[i] +
                    " makes the chain cyclic");
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Classification

std::vector<IndexPair> support(const BinomialChain& chain) {
  std::vector<IndexPair> out;
  for (std::size_t i = 0; i < chain.size(); ++i) {
    for (std::size_t j = 0; j < chain.size(); ++j) {
      const auto& entry = chain.transfer(i, j);
      if (entry && !entry->is_zero()) out.emplace_back(i, j);
    }
  }
  return out;
}

bool is_simple(const BinomialChain& chain) {
  for (const auto& [i, j] : support(chain)) {
    for (std::size_t l : chain.transfer(i, j)->coefficient_support()) {
      if (l != i) return false;
    }
  }
  return true;
}

bool is_closed(const BinomialChain& chain) {
  std::vector<int> row_count(chain.size(), 0);
  for (const auto& [i, j] : support(chain)) {
    if (++row_count[i] > 1) return false;
  }
  return true;
}

namespace {

// Kahn's algorithm, smallest original index first. Returns compartments in
// topological order, or nullopt on a cycle.
std::optional<std::vector<std::size_t>> stable_topological_sequence(const BinomialChain& chain) {
  const std::size_t k = chain.size();
  std::vector<std::vector<std::size_t>> out(k);
  std::vector<std::size_t> indegree(k, 0);
  for (const auto& [i, j] : support(chain)) {
    out[i].push_back(j);
    ++indegree[j];
  }
  std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
  for (std::size_t i = 0; i < k; ++i) {
    if (indegree[i] == 0) ready.push(i);
  }
  std::vector<std::size_t> sequence;
  while (!ready.empty()) {
    std::size_t i = ready.top();
    ready.pop();
    sequence.push_back(i);
    for (std::size_t j : out[i]) {
      if (--indegree[j] == 0) ready.push(j);
    }
  }
  if (sequence.size() != k) return std::nullopt;
  return sequence;
}

}  // namespace

bool is_acyclic(const BinomialChain& chain) { return stable_topological_sequence(chain).has_value(); }

std::vector<std::size_t> topo_order(const BinomialChain& chain) {
  auto sequence = stable_topological_sequence(chain);
  if (!sequence) throw ModelError("transfer graph has a cycle; no topological order exists");
  std::vector<std::size_t> pos(chain.size());
  for (std::size_t p = 0; p < sequence->size(); ++p) pos[(*sequence)[p]] = p;
  return pos;
}

std::size_t dag_depth(const BinomialChain& chain) {
  auto sequence = stable_topological_sequence(chain);
  if (!sequence) throw ModelError("transfer graph has a cycle; depth is unbounded");
  std::vector<std::size_t> depth(chain.size(), 0);
  std::size_t best = 0;
  for (std::size_t i : *sequence) {
    for (std::size_t j = 0; j < chain.size(); ++j) {
      const auto& entry = chain.transfer(i, j);
      if (entry && !entry->is_zero()) {
        depth[j] = std::max(depth[j], depth[i] + 1);
        best = std::max(best, depth[j]);
      }
    }
  }
  return best;
}

Count one_norm(const StateVector& v) {
  Count total = 0;
  for (Count x : v) total += x;
  return total;
}

}  // namespace bichain
