#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mimpact {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Malformed input row. `line()` is 1-based.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Timestamps going backwards in an input stream.
class OrderingError : public ParseError {
 public:
  using ParseError::ParseError;
};

class InsufficientData : public Error {
 public:
  using Error::Error;
};

/// Least-squares design without full column rank. `block()` names the
/// regressor group whose column was found dependent.
class RankDeficient : public Error {
 public:
  RankDeficient(std::string block, const std::string& what)
      : Error(what), block_(std::move(block)) {}
  const std::string& block() const noexcept { return block_; }

 private:
  std::string block_;
};

/// The requested computation needs a stationary (or at most critical) system.
class NonStationary : public Error {
 public:
  using Error::Error;
};

/// A closed-form expression evaluated at (or numerically too close to) a pole.
class Singularity : public Error {
 public:
  using Error::Error;
};

/// Numerical blow-up in an iterative solver.
class Instability : public Error {
 public:
  using Error::Error;
};

}  // namespace mimpact
