#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace bichain {

/// Base of every error raised by the library. The category decides the CLI
/// exit code: input problems map to 2, exceeded caps to 3, broken internal
/// invariants to 4.
class Error : public std::runtime_error {
 public:
  enum class Category { Input, Resource, Invariant };

  Error(Category category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  Category category() const noexcept { return category_; }

  int exit_code() const noexcept {
    switch (category_) {
      case Category::Input: return 2;
      case Category::Resource: return 3;
      case Category::Invariant: return 4;
    }
    return 4;
  }

 private:
  Category category_;
};

class InputError : public Error {
 public:
  explicit InputError(const std::string& what) : Error(Category::Input, what) {}
};

/// Malformed model text; `offset` is the byte position reported by the parser.
class SyntaxError : public InputError {
 public:
  SyntaxError(const std::string& what, std::size_t offset)
      : InputError(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// Well-formed text that violates a model constraint (negative coefficient,
/// unknown compartment, duplicate transfer, ...).
class ModelError : public InputError {
 public:
  explicit ModelError(const std::string& what) : InputError(what) {}
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public InputError {
 public:
  explicit DomainError(const std::string& what) : InputError(what) {}
};

class ResourceError : public Error {
 public:
  explicit ResourceError(const std::string& what) : Error(Category::Resource, what) {}
};

class InvariantError : public Error {
 public:
  explicit InvariantError(const std::string& what) : Error(Category::Invariant, what) {}
};

}  // namespace bichain
