#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace unitygraph {

enum class ErrorKind {
  malformed_file,
  shape_mismatch,
  non_finite_value,
  insufficient_frames,
  too_few_frames,
  horizon_out_of_range,
  step_overflow,
  config_invalid,
  data_missing,
  empty_dataset,
  shape_incompatible_checkpoint,
  numeric_failure,
  io_failure,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::malformed_file: return "malformed-file";
    case ErrorKind::shape_mismatch: return "shape-mismatch";
    case ErrorKind::non_finite_value: return "non-finite-value";
    case ErrorKind::insufficient_frames: return "insufficient-frames";
    case ErrorKind::too_few_frames: return "too-few-frames";
    case ErrorKind::horizon_out_of_range: return "horizon-out-of-range";
    case ErrorKind::step_overflow: return "step-overflow";
    case ErrorKind::config_invalid: return "config-invalid";
    case ErrorKind::data_missing: return "data-missing";
    case ErrorKind::empty_dataset: return "empty-dataset";
    case ErrorKind::shape_incompatible_checkpoint: return "shape-incompatible-checkpoint";
    case ErrorKind::numeric_failure: return "numeric-failure";
    case ErrorKind::io_failure: return "io-failure";
  }
  return "unknown";
}

/// Exception carrying a machine-readable error category.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Process exit code for the CLI: 2 config, 3 data, 4 numeric.
inline int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config_invalid:
      return 2;
    case ErrorKind::numeric_failure:
      return 4;
    default:
      return 3;
  }
}

}  // namespace unitygraph
