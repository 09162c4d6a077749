#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace stackwave {

/// Argument outside the mathematical domain of an evaluator (e.g. t > T).
class DomainError : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

/// Invalid configuration: bad grid, bad key, CFL violation, ...
class ConfigError : public std::invalid_argument {
public:
  explicit ConfigError(const std::string& what, std::string key = {})
      : std::invalid_argument(what), key_(std::move(key)) {}

  const std::string& key() const noexcept { return key_; }

private:
  std::string key_;
};

/// A precondition on the shape or support of an argument was violated.
class ContractError : public std::logic_error {
public:
  using std::logic_error::logic_error;
};

class ShapeError : public ContractError {
public:
  using ContractError::ContractError;
};

/// NaN or overflow detected while time stepping.
class InstabilityError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// An iterative solver ran out of iterations. Carries the residual history.
class NonConvergence : public std::runtime_error {
public:
  NonConvergence(const std::string& what, std::vector<double> history)
      : std::runtime_error(what), history_(std::move(history)) {}

  const std::vector<double>& history() const noexcept { return history_; }

private:
  std::vector<double> history_;
};

}  // namespace stackwave
