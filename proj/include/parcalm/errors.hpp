#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace parcalm {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed expression text, unknown identifier or wrong function arity.
class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::size_t offset)
      : Error(message + " at offset " + std::to_string(offset)),
        offset_(offset) {}

  /// Byte offset into the parsed text.
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// Evaluation outside the domain of an elementary function.
class DomainError : public Error {
 public:
  DomainError(const std::string& what, std::string subexpression)
      : Error(what + " in '" + subexpression + "'"),
        subexpression_(std::move(subexpression)) {}

  const std::string& subexpression() const noexcept { return subexpression_; }

 private:
  std::string subexpression_;
};

/// Invalid problem description (missing key, bad dimension, ...).
class ProblemError : public Error {
 public:
  using Error::Error;
};

/// A point does not satisfy the lower-level constraints.
class InfeasiblePointError : public Error {
 public:
  using Error::Error;
};

/// A documented precondition of an operation does not hold.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Singular systems, divergent iterations and similar failures.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// The numerical evidence is not strong enough to decide.
class InconclusiveError : public Error {
 public:
  using Error::Error;
};

}  // namespace parcalm
