#pragma once

#include <stdexcept>
#include <string>

namespace ospca {

enum class ErrorCode {
  Config,           // invalid user-supplied parameters
  Precondition,     // call made outside an operation's domain
  Numerical,        // quadrature, consistency or convergence failure
  DegenerateState,  // estimate collapsed to zero after thresholding
  StepSize,         // explicit time step exceeds the stability bound
  Io,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) fail(code, message);
}

const char* to_string(ErrorCode code) noexcept;

}  // namespace ospca
