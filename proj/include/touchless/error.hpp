#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace touchless {

enum class ErrorKind {
  MalformedRecord,
  SchemaViolation,
  NonMonotonicTime,
  InvalidThresholds,
  DegenerateHand,
  DegenerateEye,
  DegenerateMouth,
  DegenerateFace,
  DegenerateIris,
  DegenerateJoint,
  EmptyTemplate,
  ConfigError,
  IoError,
};

inline constexpr std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::MalformedRecord: return "MalformedRecord";
    case ErrorKind::SchemaViolation: return "SchemaViolation";
    case ErrorKind::NonMonotonicTime: return "NonMonotonicTime";
    case ErrorKind::InvalidThresholds: return "InvalidThresholds";
    case ErrorKind::DegenerateHand: return "DegenerateHand";
    case ErrorKind::DegenerateEye: return "DegenerateEye";
    case ErrorKind::DegenerateMouth: return "DegenerateMouth";
    case ErrorKind::DegenerateFace: return "DegenerateFace";
    case ErrorKind::DegenerateIris: return "DegenerateIris";
    case ErrorKind::DegenerateJoint: return "DegenerateJoint";
    case ErrorKind::EmptyTemplate: return "EmptyTemplate";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

// All library failures surface as this one exception type. `field()` names
// the offending record/config field when there is one (empty otherwise).
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string message, std::string field = {})
      : std::runtime_error(std::string(to_string(kind)) + ": " + message),
        kind_(kind),
        field_(std::move(field)),
        detail_(std::move(message)) {}

  [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }
  [[nodiscard]] const std::string& field() const noexcept { return field_; }
  [[nodiscard]] const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorKind kind_;
  std::string field_;
  std::string detail_;
};

}  // namespace touchless
