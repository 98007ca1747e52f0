#pragma once

#include <stdexcept>
#include <string>

namespace visbench {

/// Base for every error raised by the library. `code()` is a stable,
/// machine-readable identifier that the service and CLI forward verbatim.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

/// Input outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  explicit DomainError(const std::string& message) : Error("domain_error", message) {}
};

/// Operation not permitted in the current state (e.g. response after termination).
class StateError : public Error {
 public:
  explicit StateError(const std::string& message) : Error("state_error", message) {}
};

/// Invalid configuration or request field.
class ValidationError : public Error {
 public:
  ValidationError(std::string field, const std::string& message)
      : Error("validation_error", message), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// File or stream failure; the message carries the path.
class IoError : public Error {
 public:
  explicit IoError(const std::string& message) : Error("io_error", message) {}
};

}  // namespace visbench
