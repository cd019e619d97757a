#pragma once

#include <stdexcept>
#include <string>

namespace tal {

// Every failure raised by the library carries one of these kinds. The CLI maps
// each kind onto a distinct process exit code (see docs/exit_codes.md).
enum class ErrorKind {
  kDomain,        // parameter outside its admissible domain (lambda, r, C, ...)
  kDimension,     // vector/matrix shapes disagree
  kEmptyInput,    // empty sequence, batch or prediction list
  kNumericInput,  // non-finite input values
  kIndex,         // label or class id out of range
  kSchedule,      // malformed task schedule
  kPrecondition,  // hypothesis of an operation not met
  kSolver,        // root finder failed to converge
  kInvariant,     // an internal invariant was violated (a bug)
  kTraining,      // training diverged
  kGeneration,    // synthetic data could not be generated
  kConfig,        // malformed experiment specification
  kIo,            // filesystem failure
};

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Convergence failure of the calibration root finder; keeps the last residual.
class SolverError : public Error {
 public:
  SolverError(const std::string& what, double last_residual)
      : Error(ErrorKind::kSolver, what), last_residual_(last_residual) {}

  double last_residual() const noexcept { return last_residual_; }

 private:
  double last_residual_;
};

// Non-finite loss during training; keeps the global step index.
class TrainingError : public Error {
 public:
  TrainingError(const std::string& what, long step)
      : Error(ErrorKind::kTraining, what), step_(step) {}

  long step() const noexcept { return step_; }

 private:
  long step_;
};

}  // namespace tal
