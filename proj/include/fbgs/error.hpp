#pragma once

#include <stdexcept>
#include <string>

namespace fbgs {

/// Base class for all errors raised by the solver library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file; carries the 1-based line number.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, int line)
      : Error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

/// Argument outside the domain of a mathematical function or a mesh invariant.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Singular kernel, elimination, or near-singular boundary term.
class SingularError : public Error {
 public:
  using Error::Error;
};

/// Critical-point detection produced an unusable plasma topology.
class TopologyError : public Error {
 public:
  using Error::Error;
};

/// Iterative solver failure (breakdown, stagnation).
class SolverError : public Error {
 public:
  using Error::Error;
};

}  // namespace fbgs
