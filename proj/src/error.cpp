#include "ospca/error.hpp"

namespace ospca {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::Config: return "configuration error";
    case ErrorCode::Precondition: return "precondition violated";
    case ErrorCode::Numerical: return "numerical failure";
    case ErrorCode::DegenerateState: return "degenerate state";
    case ErrorCode::StepSize: return "step size error";
    case ErrorCode::Io: return "i/o error";
  }
  return "unknown error";
}

}  // namespace ospca
