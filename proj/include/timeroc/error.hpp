#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace timeroc {

/// Machine-readable failure categories. The string form is what the CLI emits.
enum class ErrorCode {
  invalid_spec,
  degenerate_knots,
  invalid_input,
  no_convergence,
  degenerate_gcv,
  empty_breakpoints,
  invalid_record,
  degenerate_variance,
  undefined_sensitivity,
  invalid_grid,
  bootstrap_unreliable,
  generation_failure,
  calibration_failure,
  schema_error,
  parse_error,
  validation_error,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_spec: return "invalid-spec";
    case ErrorCode::degenerate_knots: return "degenerate-knots";
    case ErrorCode::invalid_input: return "invalid-input";
    case ErrorCode::no_convergence: return "no-convergence";
    case ErrorCode::degenerate_gcv: return "degenerate-gcv";
    case ErrorCode::empty_breakpoints: return "empty-breakpoints";
    case ErrorCode::invalid_record: return "invalid-record";
    case ErrorCode::degenerate_variance: return "degenerate-variance";
    case ErrorCode::undefined_sensitivity: return "undefined-sensitivity";
    case ErrorCode::invalid_grid: return "invalid-grid";
    case ErrorCode::bootstrap_unreliable: return "bootstrap-unreliable";
    case ErrorCode::generation_failure: return "generation-failure";
    case ErrorCode::calibration_failure: return "calibration-failure";
    case ErrorCode::schema_error: return "schema-error";
    case ErrorCode::parse_error: return "parse-error";
    case ErrorCode::validation_error: return "validation-error";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Counts boundary clamps during basis evaluation outside the training domain.
struct ClampCounter {
  std::size_t count = 0;
  void add(std::size_t n = 1) noexcept { count += n; }
};

}  // namespace timeroc
