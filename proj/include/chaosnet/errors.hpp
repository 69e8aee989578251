#pragma once

#include <stdexcept>
#include <string>

namespace chaosnet {

// Invalid argument outside a function's mathematical domain (negative radius, empty vector, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Tensor shapes that do not match a layer or operation contract.
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Operation invoked in the wrong lifecycle state, e.g. backward before forward.
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Linear solve hit a pivot below tolerance.
class SingularSystemError : public std::runtime_error {
 public:
  SingularSystemError(std::size_t pivot_index, const std::string& what)
      : std::runtime_error(what), pivot_index_(pivot_index) {}
  std::size_t pivot_index() const noexcept { return pivot_index_; }

 private:
  std::size_t pivot_index_;
};

// Malformed input data: bad CSV, missing columns, degenerate scaling.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite values during optimisation.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid or inconsistent run configuration / checkpoint.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace chaosnet
