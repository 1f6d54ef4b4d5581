#pragma once

#include <stdexcept>
#include <string>

namespace stochflow {

/// Coarse classification used by the CLI to pick an exit code.
enum class ErrorCategory { Validation, Simulation, Solver, Internal };

class Error : public std::runtime_error {
public:
  explicit Error(const std::string& what, ErrorCategory category = ErrorCategory::Internal)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

private:
  ErrorCategory category_;
};

#define STOCHFLOW_DEFINE_ERROR(Name, Category)                                       \
  class Name : public Error {                                                        \
  public:                                                                            \
    explicit Name(const std::string& what) : Error(#Name ": " + what, Category) {}   \
  };

// grid-model
STOCHFLOW_DEFINE_ERROR(ParseError, ErrorCategory::Validation)
STOCHFLOW_DEFINE_ERROR(ValidationError, ErrorCategory::Validation)
STOCHFLOW_DEFINE_ERROR(DimensionMismatch, ErrorCategory::Validation)

// powerflow
STOCHFLOW_DEFINE_ERROR(SingularBranch, ErrorCategory::Validation)
STOCHFLOW_DEFINE_ERROR(NonConvergence, ErrorCategory::Solver)

// chaos
STOCHFLOW_DEFINE_ERROR(UnsupportedDistribution, ErrorCategory::Validation)
STOCHFLOW_DEFINE_ERROR(DegreeOutOfRange, ErrorCategory::Validation)
STOCHFLOW_DEFINE_ERROR(EigenFailure, ErrorCategory::Solver)
STOCHFLOW_DEFINE_ERROR(IndexOverflow, ErrorCategory::Validation)

// tensor
STOCHFLOW_DEFINE_ERROR(IndexOutOfRange, ErrorCategory::Validation)
STOCHFLOW_DEFINE_ERROR(CountTooLarge, ErrorCategory::Validation)

// recovery
STOCHFLOW_DEFINE_ERROR(PreconditionError, ErrorCategory::Validation)
STOCHFLOW_DEFINE_ERROR(SingularNormalMatrix, ErrorCategory::Solver)
STOCHFLOW_DEFINE_ERROR(ZeroDenominator, ErrorCategory::Validation)

// pipeline
STOCHFLOW_DEFINE_ERROR(SimulationFailure, ErrorCategory::Simulation)

#undef STOCHFLOW_DEFINE_ERROR

/// Wraps an error raised inside a pipeline stage; keeps the inner category.
class StageError : public Error {
public:
  StageError(std::string stage, const Error& inner)
      : Error("[" + stage + "] " + inner.what(), inner.category()), stage_(std::move(stage)) {}
  StageError(std::string stage, const std::string& what, ErrorCategory category)
      : Error("[" + stage + "] " + what, category), stage_(std::move(stage)) {}

  const std::string& stage() const noexcept { return stage_; }

private:
  std::string stage_;
};

} // namespace stochflow
