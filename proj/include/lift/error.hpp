#pragma once

#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace lift {

enum class ErrorCode {
  ShapeMismatch,
  InvalidArgument,
  BadMagic,
  BadVersion,
  BadDtype,
  Truncated,
  NameMismatch,
  LabelOutOfRange,
  EmptySelection,
  MotifTableExhausted,
  MissingGradient,
  IoFailure,
};

inline const char* error_code_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::ShapeMismatch: return "shape_mismatch";
    case ErrorCode::InvalidArgument: return "invalid_argument";
    case ErrorCode::BadMagic: return "bad_magic";
    case ErrorCode::BadVersion: return "bad_version";
    case ErrorCode::BadDtype: return "bad_dtype";
    case ErrorCode::Truncated: return "truncated";
    case ErrorCode::NameMismatch: return "name_mismatch";
    case ErrorCode::LabelOutOfRange: return "label_out_of_range";
    case ErrorCode::EmptySelection: return "empty_selection";
    case ErrorCode::MotifTableExhausted: return "motif_table_exhausted";
    case ErrorCode::MissingGradient: return "missing_gradient";
    case ErrorCode::IoFailure: return "io_failure";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + what), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

inline std::string shape_str(const std::vector<int>& shape) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

}  // namespace lift
