#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace jjres {

/// Category of a library failure. The numeric values are the CLI exit codes.
enum class ErrorKind : int {
  kData = 2,
  kUsage = 2,
  kConvergence = 3,
  kDomain = 4,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  virtual const char* type_name() const noexcept = 0;

 private:
  ErrorKind kind_;
};

/// Malformed, missing or inconsistent input data (schema, monotonicity, too few points).
class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorKind::kData, what) {}
  const char* type_name() const noexcept override { return "data_error"; }
};

/// Input file whose columns are missing, duplicated, ambiguous or unknown.
class SchemaError : public DataError {
 public:
  explicit SchemaError(const std::string& what) : DataError(what) {}
  const char* type_name() const noexcept override { return "schema_error"; }
};

/// Point set with no unique circle (fewer than three points, or collinear).
class DegenerateGeometryError : public DataError {
 public:
  explicit DegenerateGeometryError(const std::string& what) : DataError(what) {}
  const char* type_name() const noexcept override { return "degenerate_geometry"; }
};

/// Invalid option or argument combination.
class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error(ErrorKind::kUsage, what) {}
  const char* type_name() const noexcept override { return "usage_error"; }
};

/// Input outside the validity domain of a physical formula.
class DomainError : public Error {
 public:
  explicit DomainError(const std::string& what) : Error(ErrorKind::kDomain, what) {}
  const char* type_name() const noexcept override { return "domain_error"; }
};

/// An iterative fit stopped without meeting its convergence criteria.
/// Carries the last iterate in the fit's physical parameterization.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, std::vector<double> last_iterate, int iterations)
      : Error(ErrorKind::kConvergence, what),
        last_iterate_(std::move(last_iterate)),
        iterations_(iterations) {}

  const char* type_name() const noexcept override { return "convergence_error"; }
  const std::vector<double>& last_iterate() const noexcept { return last_iterate_; }
  int iterations() const noexcept { return iterations_; }

 private:
  std::vector<double> last_iterate_;
  int iterations_;
};

}  // namespace jjres
