#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace boter {

enum class ErrorKind {
  invalid_argument,
  parse,
  duplicate_id,
  missing_file,
  dimension_mismatch,
  config,
  io,
  locked,
};

std::string_view to_string(ErrorKind kind);

/// Library-wide exception. The kind drives the CLI exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_argument: return "invalid_argument";
    case ErrorKind::parse: return "parse";
    case ErrorKind::duplicate_id: return "duplicate_id";
    case ErrorKind::missing_file: return "missing_file";
    case ErrorKind::dimension_mismatch: return "dimension_mismatch";
    case ErrorKind::config: return "config";
    case ErrorKind::io: return "io";
    case ErrorKind::locked: return "locked";
  }
  return "unknown";
}

}  // namespace boter
