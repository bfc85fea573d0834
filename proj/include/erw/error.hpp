#pragma once

#include <stdexcept>
#include <string>

namespace erw {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the operation's domain (j = 0, n < 1, strength outside (0,1), ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// An iterative computation stopped before reaching its tolerance.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double best) : Error(what), best_(best) {}
  /// Best tolerance-relevant quantity reached (tail bound or remaining mass).
  double best() const noexcept { return best_; }

 private:
  double best_;
};

/// The environment does not provide a capability the caller needs (e.g. a tail-bound rule).
class UnsupportedError : public Error {
 public:
  using Error::Error;
};

/// A configured resource cap (sites, trials, generation size) was exceeded.
class ResourceError : public Error {
 public:
  using Error::Error;
};

/// Two routes to the same quantity disagreed beyond rounding.
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

/// Variance too small to form theta(n).
class DegenerateError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, int line, std::string key)
      : Error(what), line_(line), key_(std::move(key)) {}
  int line() const noexcept { return line_; }
  const std::string& key() const noexcept { return key_; }

 private:
  int line_;
  std::string key_;
};

}  // namespace erw
