#include "fastdraw/error.hpp"

namespace fastdraw {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid-argument";
    case ErrorCode::invalid_annotation: return "invalid-annotation";
    case ErrorCode::degenerate_transform: return "degenerate-transform";
    case ErrorCode::shape: return "shape";
    case ErrorCode::index: return "index";
    case ErrorCode::format: return "format";
    case ErrorCode::io: return "io";
    case ErrorCode::seed: return "seed";
    case ErrorCode::unsupported_slope: return "unsupported-slope";
    case ErrorCode::config: return "config";
    case ErrorCode::divergence: return "divergence";
    case ErrorCode::unknown_preset: return "unknown-preset";
    case ErrorCode::mismatch: return "mismatch";
  }
  return "unknown";
}

}  // namespace fastdraw
