#pragma once

#include <stdexcept>
#include <string>

namespace tplmon {

/// Broad failure category, used by the CLI to pick an exit code.
enum class ErrorKind { Usage, Data, Numeric, Infeasible };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define TPLMON_DEFINE_ERROR(Name, Kind)                 \
  class Name : public Error {                           \
   public:                                              \
    explicit Name(const std::string& what)              \
        : Error(ErrorKind::Kind, what) {}               \
  }

TPLMON_DEFINE_ERROR(ArgumentError, Usage);
TPLMON_DEFINE_ERROR(SchemaError, Data);
TPLMON_DEFINE_ERROR(EmptyDatasetError, Data);
TPLMON_DEFINE_ERROR(InsufficientDataError, Data);
TPLMON_DEFINE_ERROR(NoOverlapError, Data);
TPLMON_DEFINE_ERROR(CoverageError, Data);
TPLMON_DEFINE_ERROR(DegenerateVarianceError, Numeric);
TPLMON_DEFINE_ERROR(SingularCovarianceError, Numeric);
TPLMON_DEFINE_ERROR(FitFailureError, Numeric);
TPLMON_DEFINE_ERROR(BootstrapFailureError, Numeric);
TPLMON_DEFINE_ERROR(ThresholdFailureError, Numeric);
TPLMON_DEFINE_ERROR(IncompleteThresholdError, Numeric);

#undef TPLMON_DEFINE_ERROR

/// A CSV row that failed to parse or violated a record invariant.
class RowError : public Error {
 public:
  RowError(std::size_t line, const std::string& what)
      : Error(ErrorKind::Data, "line " + std::to_string(line) + ": " + what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Evaluation outside the domain of the dimension models. `extrapolation` is
/// set when the offending parameters came from a design-dimension trend.
class DomainError : public Error {
 public:
  explicit DomainError(const std::string& what, bool extrapolation = false)
      : Error(ErrorKind::Infeasible, what), extrapolation_(extrapolation) {}
  bool extrapolation() const noexcept { return extrapolation_; }

 private:
  bool extrapolation_;
};

}  // namespace tplmon
