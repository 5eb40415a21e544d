#include "csrobust/error.hpp"

namespace csr {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidSpec: return "invalid-spec";
    case ErrorCode::ShapeMismatch: return "shape-mismatch";
    case ErrorCode::Parse: return "parse";
    case ErrorCode::NumericalFailure: return "numerical-failure";
    case ErrorCode::UndefinedRatio: return "undefined-ratio";
    case ErrorCode::Capability: return "capability";
    case ErrorCode::Io: return "io";
    case ErrorCode::MissingInput: return "missing-input";
    case ErrorCode::Schema: return "schema";
    case ErrorCode::Internal: return "internal";
  }
  return "unknown";
}

}  // namespace csr
