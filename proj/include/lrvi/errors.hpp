#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace lrvi {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Value outside an atom domain, continuous atom where a discrete one is
// required, invalid probability vector, ...
class DomainError : public Error {
 public:
  using Error::Error;
};

// Potential arity / atom tuple mismatch.
class ArityError : public Error {
 public:
  using Error::Error;
};

// A hard size cap (state space, population, grid dimension) was exceeded.
class CapacityError : public Error {
 public:
  using Error::Error;
};

// Numerical failure inside a fit, sampler or solver.
class ComputationError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

// An error annotated with the pipeline stage (and parfactor, when there is
// one) that raised it. `computation` separates numerical failures from bad
// input.
class StageError : public Error {
 public:
  StageError(std::string stage, std::string parfactor, const std::string& what, bool computation)
      : Error(what), stage_(std::move(stage)), parfactor_(std::move(parfactor)), computation_(computation) {}

  const std::string& stage() const { return stage_; }
  const std::string& parfactor() const { return parfactor_; }
  bool computation() const { return computation_; }

 private:
  std::string stage_;
  std::string parfactor_;
  bool computation_;
};

}  // namespace lrvi
