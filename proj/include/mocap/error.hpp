#pragma once

#include <stdexcept>
#include <string>

namespace mocap {

/// Failure categories shared by every module. The CLI maps these onto exit codes.
enum class errc {
  invalid_argument,
  invalid_dimension,
  invalid_sweep,
  shape_mismatch,
  non_finite_value,
  malformed_input,
  io_failure,
  format_mismatch,
  invariant_violation,
  svd_failure,
  symbol_missing,
  truncated_stream,
  corrupt_stream,
  model_mismatch,
};

inline const char* to_string(errc code) {
  switch (code) {
    case errc::invalid_argument: return "InvalidArgument";
    case errc::invalid_dimension: return "InvalidDimension";
    case errc::invalid_sweep: return "InvalidSweep";
    case errc::shape_mismatch: return "ShapeMismatch";
    case errc::non_finite_value: return "NonFiniteValue";
    case errc::malformed_input: return "MalformedInput";
    case errc::io_failure: return "IoFailure";
    case errc::format_mismatch: return "FormatMismatch";
    case errc::invariant_violation: return "InvariantViolation";
    case errc::svd_failure: return "SvdFailure";
    case errc::symbol_missing: return "SymbolMissing";
    case errc::truncated_stream: return "TruncatedStream";
    case errc::corrupt_stream: return "CorruptStream";
    case errc::model_mismatch: return "ModelMismatch";
  }
  return "Unknown";
}

class error : public std::runtime_error {
 public:
  error(errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  errc code() const noexcept { return code_; }

 private:
  errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string& what) { throw error(code, what); }

inline void require(bool cond, errc code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace mocap
