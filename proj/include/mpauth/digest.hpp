#pragma once

#include <array>
#include <cstdint>
#include <span>

namespace mpauth {

using Digest = std::array<std::uint8_t, 32>;

Digest hmac_sha256(std::span<const std::uint8_t> key, std::span<const std::uint8_t> message);

/// Incremental SHA-256.
class Sha256 {
 public:
  Sha256();
  ~Sha256();
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  Sha256& update(std::span<const std::uint8_t> data);
  Sha256& update_u32(std::uint32_t value);
  /// 4-byte big-endian length followed by the data.
  Sha256& update_prefixed(std::span<const std::uint8_t> data);
  Digest finish();

 private:
  void* ctx_;
};

}  // namespace mpauth
