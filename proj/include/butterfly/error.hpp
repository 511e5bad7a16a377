#pragma once

#include <stdexcept>
#include <string>

namespace butterfly {

enum class ErrorCode {
  InvalidArgument,
  OutOfRange,
  CapacityExceeded,
  AssumptionViolation,
  Numeric,
  Io,
  Parse,
};

// All library failures are reported through this exception; the C API maps
// the code onto its status enum.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline void require(bool condition, ErrorCode code, const std::string& what) {
  if (!condition) fail(code, what);
}

}  // namespace butterfly
