#pragma once

#include <stdexcept>
#include <string>

namespace stc {

// Error codes shared with the C API (see stc.h); values must stay in sync.
enum class ErrorCode {
  InvalidArgument = 1,
  Parse = 2,
  Io = 3,
  IndexOutOfBounds = 4,
  DuplicateIndex = 5,
  NonFinite = 6,
  ShapeMismatch = 7,
  EmptySet = 8,
  Internal = 9,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string message)
      : std::runtime_error(std::move(message)), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace stc
