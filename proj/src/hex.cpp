#include "mpauth/hex.hpp"

#include "mpauth/error.hpp"

namespace mpauth {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidInput: return "InvalidInput";
    case ErrorCode::RoleMismatch: return "RoleMismatch";
    case ErrorCode::UnregisteredRealm: return "UnregisteredRealm";
    case ErrorCode::AlreadyRegistered: return "AlreadyRegistered";
    case ErrorCode::UnknownCloud: return "UnknownCloud";
    case ErrorCode::UnknownSubdomain: return "UnknownSubdomain";
    case ErrorCode::UnknownTenant: return "UnknownTenant";
    case ErrorCode::EmptyMetadata: return "EmptyMetadata";
    case ErrorCode::DisallowedPair: return "DisallowedPair";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ValidationError: return "ValidationError";
    case ErrorCode::UnknownMetric: return "UnknownMetric";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

std::string to_hex(std::span<const std::uint8_t> data) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(data.size() * 2);
  for (auto b : data) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0x0f]);
  }
  return out;
}

namespace {
int nibble(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}
}  // namespace

Bytes from_hex(std::string_view text) {
  if (text.size() % 2 != 0) throw Error(ErrorCode::ParseError, "odd-length hex string");
  Bytes out;
  out.reserve(text.size() / 2);
  for (std::size_t i = 0; i < text.size(); i += 2) {
    int hi = nibble(text[i]);
    int lo = nibble(text[i + 1]);
    if (hi < 0 || lo < 0) throw Error(ErrorCode::ParseError, "invalid hex digit");
    out.push_back(static_cast<std::uint8_t>((hi << 4) | lo));
  }
  return out;
}

}  // namespace mpauth
