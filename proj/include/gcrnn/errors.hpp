#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gcrnn {

/// Thrown when a caller hands in arguments that violate an operation's preconditions
/// (shape mismatch, out-of-range probability, unknown config key, ...).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when a computation produces NaN/Inf or otherwise diverges.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file. Carries the 1-based line number when known (0 otherwise).
class ParseError : public InvalidArgument {
 public:
  ParseError(const std::string& what, std::size_t line)
      : InvalidArgument(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

namespace detail {

inline void require(bool ok, const std::string& message) {
  if (!ok) throw InvalidArgument(message);
}

}  // namespace detail
}  // namespace gcrnn
