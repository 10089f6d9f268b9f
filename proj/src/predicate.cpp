#include "bichain/predicate.hpp"

#include <cctype>
#include <limits>

#include "bichain/error.hpp"

namespace bichain {

namespace {

class Parser {
 public:
  Parser(std::string_view text, const BinomialChain& chain) : s_(text), chain_(chain) {}

  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool at_end() {
    skip();
    return pos_ >= s_.size();
  }
  bool accept(std::string_view tok) {
    skip();
    if (s_.substr(pos_, tok.size()) == tok) {
      pos_ += tok.size();
      return true;
    }
    return false;
  }
  bool accept_keyword(std::string_view word) {
    skip();
    std::size_t end = pos_ + word.size();
    if (s_.substr(pos_, word.size()) != word) return false;
    if (end < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[end])) || s_[end] == '_')) return false;
    pos_ = end;
    return true;
  }
  [[noreturn]] void fail(const std::string& what) { throw SyntaxError("predicate: " + what, pos_); }

  std::string identifier() {
    skip();
    std::size_t start = pos_;
    if (pos_ < s_.size() && (std::isalpha(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) {
      ++pos_;
      while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
    }
    return std::string(s_.substr(start, pos_ - start));
  }

  std::int64_t integer() {
    skip();
    std::size_t start = pos_;
    while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    if (start == pos_) fail("expected a number");
    try {
      return std::stoll(std::string(s_.substr(start, pos_ - start)));
    } catch (const std::out_of_range&) {
      pos_ = start;
      fail("integer literal out of range");
    }
  }

  Predicate::Term atom(std::int64_t coeff) {
    std::size_t start = pos_;
    std::string name = identifier();
    if (name.empty()) fail("expected a compartment name");
    if (name == "N0") return {Predicate::Term::Kind::Total, 0, coeff};
    if (auto i = chain_.index_of(name)) return {Predicate::Term::Kind::Count, *i, coeff};
    if (name.ends_with("_init")) {
      if (auto i = chain_.index_of(std::string_view(name).substr(0, name.size() - 5))) {
        return {Predicate::Term::Kind::Initial, *i, coeff};
      }
    }
    pos_ = start;
    fail("unknown name '" + name + "'");
  }

  Predicate::Term term(std::int64_t sign) {
    skip();
    if (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) {
      std::int64_t c = integer();
      if (accept("*")) return atom(sign * c);
      return {Predicate::Term::Kind::Constant, 0, sign * c};
    }
    return atom(sign);
  }

  Predicate::Expr expr() {
    Predicate::Expr e;
    std::int64_t sign = accept("-") ? -1 : 1;
    e.push_back(term(sign));
    for (;;) {
      if (accept("+")) {
        e.push_back(term(1));
      } else if (accept("-")) {
        e.push_back(term(-1));
      } else {
        return e;
      }
    }
  }

  Predicate::Op op() {
    using Op = Predicate::Op;
    if (accept("!=")) return Op::Ne;
    if (accept("<=")) return Op::Le;
    if (accept(">=")) return Op::Ge;
    if (accept("==") || accept("=")) return Op::Eq;
    if (accept("<")) return Op::Lt;
    if (accept(">")) return Op::Gt;
    fail("expected a comparison operator");
  }

  std::size_t pos() const { return pos_; }

 private:
  std::string_view s_;
  const BinomialChain& chain_;
  std::size_t pos_ = 0;
};

std::string render_expr(const Predicate::Expr& e, const std::vector<std::string>& names) {
  std::string out;
  for (std::size_t t = 0; t < e.size(); ++t) {
    const auto& term = e[t];
    std::int64_t c = term.coeff;
    if (t == 0) {
      if (c < 0) out += "-";
    } else {
      out += c < 0 ? " - " : " + ";
    }
    std::int64_t mag = c < 0 ? -c : c;
    std::string atom;
    switch (term.kind) {
      case Predicate::Term::Kind::Count: atom = names[term.index]; break;
      case Predicate::Term::Kind::Initial: atom = names[term.index] + "_init"; break;
      case Predicate::Term::Kind::Total: atom = "N0"; break;
      case Predicate::Term::Kind::Constant: out += std::to_string(mag); continue;
    }
    if (mag != 1) out += std::to_string(mag) + "*";
    out += atom;
  }
  return out;
}

const char* render_op(Predicate::Op op) {
  switch (op) {
    case Predicate::Op::Eq: return "=";
    case Predicate::Op::Ne: return "!=";
    case Predicate::Op::Le: return "<=";
    case Predicate::Op::Ge: return ">=";
    case Predicate::Op::Lt: return "<";
    case Predicate::Op::Gt: return ">";
  }
  return "?";
}

}  // namespace

Predicate Predicate::parse(std::string_view text, const BinomialChain& chain) {
  Predicate p;
  p.text_ = std::string(text);
  p.names_ = chain.names();
  p.initial_ = chain.initial();
  Parser in(text, chain);
  if (in.at_end()) in.fail("empty predicate");
  do {
    if (in.accept_keyword("true")) continue;
    if (in.accept_keyword("false")) {
      p.false_ = true;
      continue;
    }
    Comparison c;
    c.lhs = in.expr();
    c.op = in.op();
    c.rhs = in.expr();
    p.conj_.push_back(std::move(c));
  } while (in.accept("&&"));
  if (!in.at_end()) in.fail("unexpected trailing input");
  return p;
}

Predicate Predicate::always(const BinomialChain& chain) { return parse("true", chain); }

std::int64_t Predicate::eval(const Expr& e, const StateVector& x) const {
  std::int64_t total = 0;
  for (const auto& t : e) {
    std::int64_t v = 0;
    switch (t.kind) {
      case Term::Kind::Count: v = x[t.index]; break;
      case Term::Kind::Initial: v = initial_[t.index]; break;
      case Term::Kind::Total: v = one_norm(initial_); break;
      case Term::Kind::Constant: v = 1; break;
    }
    total += t.coeff * v;
  }
  return total;
}

bool Predicate::operator()(const StateVector& x) const {
  if (false_) return false;
  for (const auto& c : conj_) {
    std::int64_t l = eval(c.lhs, x);
    std::int64_t r = eval(c.rhs, x);
    bool ok = false;
    switch (c.op) {
      case Op::Eq: ok = l == r; break;
      case Op::Ne: ok = l != r; break;
      case Op::Le: ok = l <= r; break;
      case Op::Ge: ok = l >= r; break;
      case Op::Lt: ok = l < r; break;
      case Op::Gt: ok = l > r; break;
    }
    if (!ok) return false;
  }
  return true;
}

std::string Predicate::to_prism() const {
  if (false_) return "false";
  if (conj_.empty()) return "true";
  std::string out;
  for (std::size_t c = 0; c < conj_.size(); ++c) {
    if (c) out += " & ";
    out += "(" + render_expr(conj_[c].lhs, names_) + " " + render_op(conj_[c].op) + " " + render_expr(conj_[c].rhs, names_) + ")";
  }
  return out;
}

}  // namespace bichain
