#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace dynbool {

/// Argument outside the documented domain of an operation (negative duration,
/// index outside its range, ...).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Mathematically undefined request, e.g. a capacity with d <= alpha or an
/// infinite radius moment.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A numerical routine did not reach its accuracy target.
class NumericFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The window planner could not bound the truncation error.
class PlannerFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Configuration does not match the schema. `field()` names the offending key.
class SchemaError : public std::runtime_error {
 public:
  SchemaError(std::string field, const std::string& what)
      : std::runtime_error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace dynbool
