#include "tal/error.hpp"

namespace tal {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::kDomain: return "domain";
    case ErrorKind::kDimension: return "dimension";
    case ErrorKind::kEmptyInput: return "empty_input";
    case ErrorKind::kNumericInput: return "numeric_input";
    case ErrorKind::kIndex: return "index";
    case ErrorKind::kSchedule: return "schedule";
    case ErrorKind::kPrecondition: return "precondition";
    case ErrorKind::kSolver: return "solver";
    case ErrorKind::kInvariant: return "invariant";
    case ErrorKind::kTraining: return "training";
    case ErrorKind::kGeneration: return "generation";
    case ErrorKind::kConfig: return "config";
    case ErrorKind::kIo: return "io";
  }
  return "unknown";
}

}  // namespace tal
