#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "bichain/model.hpp"

namespace bichain {

/// Conjunction of integer-linear comparisons over compartment counts.
///
///   pred  := 'true' | 'false' | cmp ('&&' cmp)*
///   cmp   := expr OP expr        OP in = != <= >= < >
///   expr  := ['-'] term (('+' | '-') term)*
///   term  := INT | INT '*' atom | atom
///   atom  := compartment name | 'N0' | name '_init'
///
/// `N0` is the initial total population and `X_init` the initial count of X;
/// both are constants fixed by the chain the predicate was parsed against.
class Predicate {
 public:
  enum class Op { Eq, Ne, Le, Ge, Lt, Gt };

  struct Term {
    enum class Kind { Count, Initial, Total, Constant };
    Kind kind;
    std::size_t index;  ///< compartment for Count / Initial
    std::int64_t coeff;
  };
  using Expr = std::vector<Term>;

  struct Comparison {
    Expr lhs;
    Op op;
    Expr rhs;
  };

  static Predicate parse(std::string_view text, const BinomialChain& chain);
  static Predicate always(const BinomialChain& chain);

  bool operator()(const StateVector& x) const;

  /// PRISM expression syntax ("&" for conjunction, names verbatim).
  std::string to_prism() const;
  const std::string& text() const noexcept { return text_; }
  const std::vector<Comparison>& comparisons() const noexcept { return conj_; }
  bool is_false() const noexcept { return false_; }

 private:
  std::int64_t eval(const Expr& e, const StateVector& x) const;

  std::string text_;
  std::vector<std::string> names_;
  StateVector initial_;
  std::vector<Comparison> conj_;
  bool false_ = false;
};

}  // namespace bichain
