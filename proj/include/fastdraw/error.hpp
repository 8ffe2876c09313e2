#pragma once

#include <stdexcept>
#include <string>

namespace fastdraw {

// Values mirror the FD_ERR_* codes of the C API.
enum class ErrorCode : int {
  invalid_argument = 1,
  invalid_annotation = 2,
  degenerate_transform = 3,
  shape = 4,
  index = 5,
  format = 6,
  io = 7,
  seed = 8,
  unsupported_slope = 9,
  config = 10,
  divergence = 11,
  unknown_preset = 12,
  mismatch = 13,
};

const char* to_string(ErrorCode code) noexcept;

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

}  // namespace fastdraw
