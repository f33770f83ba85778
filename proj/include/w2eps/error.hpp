#pragma once

#include <stdexcept>
#include <string>

namespace w2eps {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid scalar parameter (opening, tolerance, ladder, ...).
class ParameterError : public Error {
 public:
  explicit ParameterError(const std::string& what) : Error("parameter error: " + what) {}
};

/// Geometry or extent mismatch between grids, domains and queries.
class DomainError : public Error {
 public:
  explicit DomainError(const std::string& what) : Error("domain error: " + what) {}
};

/// A closed-form descriptor produced a non-finite value at a node.
class SamplingError : public Error {
 public:
  explicit SamplingError(const std::string& what) : Error("sampling error: " + what) {}
};

/// Input violates a documented precondition (asymmetric matrix, non-PSD input, ...).
class ContractViolation : public Error {
 public:
  explicit ContractViolation(const std::string& what) : Error("contract violation: " + what) {}
};

/// Linear solve did not reach the requested residual.
class SolverError : public Error {
 public:
  SolverError(const std::string& what, double residual)
      : Error("solver error: " + what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/// Least-squares exponent fit could not be performed.
class FitError : public Error {
 public:
  explicit FitError(const std::string& what) : Error("fit error: " + what) {}
};

/// Rescaling radius is not aligned with the grid spacing.
class AlignmentError : public Error {
 public:
  explicit AlignmentError(const std::string& what) : Error("alignment error: " + what) {}
};

/// Malformed file or config input.
class FormatError : public Error {
 public:
  explicit FormatError(const std::string& what) : Error("format error: " + what) {}
};

}  // namespace w2eps
