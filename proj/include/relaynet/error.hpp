#pragma once

#include <stdexcept>
#include <string>

namespace relaynet {

enum class ErrorCode {
  InvalidArgument,
  DimensionMismatch,
  NotSquare,
  NotHermitian,
  NotPsd,
  NotHpd,
  NoConvergence,
  Infeasible,
  SolverFailure,
  Config,
  Io,
};

const char* to_string(ErrorCode code);

// Single exception type for the library; the code lets callers branch on the
// failure class without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace relaynet
