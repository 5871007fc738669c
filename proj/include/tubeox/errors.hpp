#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace tubeox {

/// Broad category of a failure, used by the CLI to pick an exit code.
enum class ErrorCategory { Input, Solver, Io };

class Error : public std::runtime_error {
 public:
  Error(std::string kind, ErrorCategory category, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)), category_(category) {}

  const std::string& kind() const noexcept { return kind_; }
  ErrorCategory category() const noexcept { return category_; }

 private:
  std::string kind_;
  ErrorCategory category_;
};

#define TUBEOX_DEFINE_ERROR(Name, Category)                  \
  class Name : public Error {                                \
   public:                                                   \
    explicit Name(const std::string& what)                   \
        : Error(#Name, ErrorCategory::Category, what) {}     \
  };

TUBEOX_DEFINE_ERROR(TagError, Input)
TUBEOX_DEFINE_ERROR(TopologyError, Input)
TUBEOX_DEFINE_ERROR(GeometryError, Input)
TUBEOX_DEFINE_ERROR(EmptySelectionError, Input)
TUBEOX_DEFINE_ERROR(SelectionError, Input)
TUBEOX_DEFINE_ERROR(ResolutionError, Input)
TUBEOX_DEFINE_ERROR(ConstraintError, Input)
TUBEOX_DEFINE_ERROR(AlignmentError, Input)
TUBEOX_DEFINE_ERROR(ConfigError, Input)
TUBEOX_DEFINE_ERROR(BudgetError, Solver)
TUBEOX_DEFINE_ERROR(SolverError, Solver)
TUBEOX_DEFINE_ERROR(StepRejectedError, Solver)
TUBEOX_DEFINE_ERROR(IoError, Io)

#undef TUBEOX_DEFINE_ERROR

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("ParseError", ErrorCategory::Input,
              "line " + std::to_string(line) + ": " + what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class SingularElementError : public Error {
 public:
  SingularElementError(std::size_t element, const std::string& what)
      : Error("SingularElementError", ErrorCategory::Solver, what), element_(element) {}
  std::size_t element() const noexcept { return element_; }

 private:
  std::size_t element_;
};

class SingularMatrixError : public Error {
 public:
  SingularMatrixError(std::size_t pivot, const std::string& what)
      : Error("SingularMatrixError", ErrorCategory::Solver, what), pivot_(pivot) {}
  std::size_t pivot() const noexcept { return pivot_; }

 private:
  std::size_t pivot_;
};

/// Iteration failed to reach tolerance. Carries the residual history so the
/// caller can report how far it got.
class NonConvergenceError : public Error {
 public:
  NonConvergenceError(const std::string& what, std::vector<double> residuals)
      : Error("NonConvergenceError", ErrorCategory::Solver, what),
        residuals_(std::move(residuals)) {}
  const std::vector<double>& residuals() const noexcept { return residuals_; }

 private:
  std::vector<double> residuals_;
};

}  // namespace tubeox
