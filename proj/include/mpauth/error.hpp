#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mpauth {

enum class ErrorCode {
  InvalidInput,
  RoleMismatch,
  UnregisteredRealm,
  AlreadyRegistered,
  UnknownCloud,
  UnknownSubdomain,
  UnknownTenant,
  EmptyMetadata,
  DisallowedPair,
  ParseError,
  ValidationError,
  UnknownMetric,
  IoError,
};

std::string_view to_string(ErrorCode code);

/// Exception carrying a machine-checkable error code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace mpauth
