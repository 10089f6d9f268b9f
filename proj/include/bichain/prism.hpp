#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bichain/compile.hpp"
#include "bichain/model.hpp"
#include "bichain/predicate.hpp"
#include "bichain/reach.hpp"

namespace bichain {

/// Inclusive upper bound per SCM counter; lower bounds are always 0.
struct PrismBounds {
  std::vector<Count> upper;
};

/// Bounds no reachable configuration can exceed. With `cap`, fails when some
/// certified bound is larger than the cap; every bound must also fit a
/// 32-bit PRISM int. Both failures throw DomainError ("bound overflow").
PrismBounds certified_bounds(const CompiledScm& c, const BinomialChain& chain, std::optional<Count> cap = std::nullopt);

/// DTMC model text: initial-count constants, one module with `loc` and one
/// bounded variable per counter, one command per (location, guard) whose
/// alternatives are the SCM branches, and the reward structure "time_step".
std::string export_prism(const CompiledScm& c, const BinomialChain& chain, const PrismBounds& bounds);

enum class PropertyKind { PopInc, OS, EoE };

/// Throws DomainError on anything but "PopInc", "OS", "EoE".
PropertyKind parse_property_kind(std::string_view name);
std::string property_name(PropertyKind kind);

/// Property text over the compiled form of `chain`, one line. PopInc and
/// EoE target the absorbing states (no live clause holds). The OS pair is the
/// first compartment in topological order with an outgoing entry and its
/// first successor.
std::string emit_property(const CompiledScm& c, const BinomialChain& chain, PropertyKind kind);

/// Property file text: the properties in order, one per line.
std::string emit_properties(const CompiledScm& c, const BinomialChain& chain, const std::vector<PropertyKind>& kinds);

/// (S, E) compartments of the OS property.
IndexPair one_shot_pair(const BinomialChain& chain);

/// The same query answered on the explicit chain: PopInc by the clamp-free
/// until probability, OS by until_probability, EoE by expected hitting time.
template <class Num>
Num evaluate_property(const Kernel<Num>& kernel, const ExplicitChain<Num>& ec, PropertyKind kind);

}  // namespace bichain
