#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "bichain/rational.hpp"

namespace bichain {

using Count = std::int64_t;
using StateVector = std::vector<Count>;
using IndexPair = std::pair<std::size_t, std::size_t>;

/// Nonnegative affine map x -> a.x + b over compartment counts.
struct LinearFn {
  std::vector<Rational> coeffs;
  Rational offset;

  Rational operator()(const StateVector& x) const;
  /// Identically zero on N^k (all coefficients and offset zero).
  bool is_zero() const;
  /// No coefficient is nonzero.
  bool is_constant() const;
  /// Indices with a nonzero coefficient.
  std::vector<std::size_t> coefficient_support() const;

  friend bool operator==(const LinearFn&, const LinearFn&) = default;
};

/// Precomputed exponentials for a transfer matrix. Slot 0 of each entry holds
/// e^{-b} (offset), slot l+1 holds e^{-a_l}. Slots for zero exponents are
/// left empty and read as 1.
struct ExpTable {
  std::map<IndexPair, std::vector<std::optional<Rational>>> entries;
  int error_exponent = 64;

  friend bool operator==(const ExpTable&, const ExpTable&) = default;
};

/// A binomial chain (v, T): k named compartments, an initial vector and a k x k
/// matrix of optional transfer functions. Absent entries are the zero function.
/// Immutable once constructed; the constructor validates everything.
class BinomialChain {
 public:
  using TransferMatrix = std::vector<std::vector<std::optional<LinearFn>>>;

  BinomialChain(std::vector<std::string> names, StateVector initial, TransferMatrix transfers,
                std::optional<ExpTable> exp_table = std::nullopt);

  std::size_t size() const noexcept { return names_.size(); }
  const std::vector<std::string>& names() const noexcept { return names_; }
  const StateVector& initial() const noexcept { return initial_; }
  const TransferMatrix& transfers() const noexcept { return transfers_; }
  const std::optional<LinearFn>& transfer(std::size_t i, std::size_t j) const { return transfers_.at(i).at(j); }
  const std::optional<ExpTable>& exp_table() const noexcept { return exp_table_; }

  std::optional<std::size_t> index_of(std::string_view name) const;

  BinomialChain with_initial(StateVector initial) const;
  BinomialChain with_exp_table(std::optional<ExpTable> table) const;

  friend bool operator==(const BinomialChain&, const BinomialChain&) = default;

 private:
  std::vector<std::string> names_;
  StateVector initial_;
  TransferMatrix transfers_;
  std::optional<ExpTable> exp_table_;
};

/// Parses the JSON model-file format. Throws SyntaxError (with byte offset) or
/// ModelError.
BinomialChain parse_model(std::string_view text);

/// Inverse of parse_model; deterministic, two-space indented.
std::string serialize_model(const BinomialChain& chain);

/// Non-fatal remarks about a valid chain (e.g. diagonal transfer entries).
std::vector<std::string> model_warnings(const BinomialChain& chain);

/// Pairs (i, j) with a present, non-identically-zero transfer; row-major.
std::vector<IndexPair> support(const BinomialChain& chain);

bool is_simple(const BinomialChain& chain);
bool is_closed(const BinomialChain& chain);
bool is_acyclic(const BinomialChain& chain);

/// pos[i] = position of compartment i in a stable topological order of the
/// support graph. Throws ModelError if the graph has a cycle.
std::vector<std::size_t> topo_order(const BinomialChain& chain);

/// Longest path (in edges) of the support graph. Requires acyclicity.
std::size_t dag_depth(const BinomialChain& chain);

Count one_norm(const StateVector& v);

/// Compartment names must be usable as identifiers in predicates and in the
/// exported PRISM model.
bool is_valid_compartment_name(std::string_view name);

}  // namespace bichain
