#pragma once

// Hierarchical cloud keys: a cloud root part, a sub-domain part and a leaf
// (tenant private part or session part). Every derivation is HMAC-SHA256 with a
// per-role domain-separation label, so all operations are pure functions.

#include <array>
#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

namespace mpauth::keys {

inline constexpr std::size_t kPartSize = 32;
inline constexpr std::size_t kSessionFieldSize = 16;

using PartBytes = std::array<std::uint8_t, kPartSize>;
using SessionField = std::array<std::uint8_t, kSessionFieldSize>;

enum class PartRole : std::uint8_t { Root, SubDomain, Private, Session };

std::string_view to_string(PartRole role);
std::optional<PartRole> part_role_from_string(std::string_view name);

class KeyPart {
 public:
  KeyPart(PartRole role, const PartBytes& bytes) : role_(role), bytes_(bytes) {}

  /// Throws Error(InvalidInput) unless `bytes` is exactly kPartSize long.
  static KeyPart from_bytes(PartRole role, std::span<const std::uint8_t> bytes);

  PartRole role() const noexcept { return role_; }
  const PartBytes& bytes() const noexcept { return bytes_; }
  std::string hex() const;

  friend bool operator==(const KeyPart&, const KeyPart&) = default;
  friend auto operator<=>(const KeyPart&, const KeyPart&) = default;

 private:
  PartRole role_;
  PartBytes bytes_;
};

struct DigitalSignature {
  PartBytes bytes{};

  friend bool operator==(const DigitalSignature&, const DigitalSignature&) = default;
};

/// Root + sub-domain + leaf. Only constructible through compose_key, which
/// enforces the role triple.
class HierarchicalKey {
 public:
  const KeyPart& root() const noexcept { return root_; }
  const KeyPart& subdomain() const noexcept { return subdomain_; }
  const KeyPart& leaf() const noexcept { return leaf_; }

  /// Session field and generation are only present on Session leaves.
  std::optional<SessionField> session_field() const;
  std::optional<std::uint32_t> generation() const;

  std::string hex() const;
  /// Short stable fingerprint (first 8 bytes of the leaf, hex) used in logs.
  std::string fingerprint() const;

  friend bool operator==(const HierarchicalKey&, const HierarchicalKey&) = default;

 private:
  friend HierarchicalKey compose_key(const KeyPart&, const KeyPart&, const KeyPart&);
  HierarchicalKey(KeyPart r, KeyPart s, KeyPart l)
      : root_(std::move(r)), subdomain_(std::move(s)), leaf_(std::move(l)) {}

  KeyPart root_;
  KeyPart subdomain_;
  KeyPart leaf_;
};

struct Participant {
  std::string identity;
  std::string cloud_id;
  std::string subdomain_id;

  friend bool operator==(const Participant&, const Participant&) = default;
};

struct SessionKeySet {
  SessionField session_id{};
  std::map<std::string, HierarchicalKey> keys;
  std::vector<Participant> participants;
  std::uint32_t generation = 0;
};

/// Read-only lookup of authoritative root and sub-domain parts (the vault).
class RealmDirectory {
 public:
  virtual ~RealmDirectory() = default;
  virtual std::optional<KeyPart> root_key(std::string_view cloud_id) const = 0;
  virtual std::optional<KeyPart> subdomain_key(std::string_view cloud_id,
                                               std::string_view subdomain_id) const = 0;
};

KeyPart derive_root_key(std::string_view cloud_id, std::span<const std::uint8_t> master_secret);
KeyPart derive_subdomain_key(const KeyPart& root, std::string_view subdomain_id);

/// Digest of the tenant id followed by every (metadata class, value) pair in
/// class-name order, each length-prefixed.
DigitalSignature make_signature(std::string_view tenant_id,
                                const std::map<std::string, std::string>& personal_secrets);

KeyPart issue_private_key(const DigitalSignature& signature, const KeyPart& subdomain);

HierarchicalKey compose_key(const KeyPart& root, const KeyPart& subdomain, const KeyPart& leaf);
std::tuple<KeyPart, KeyPart, KeyPart> decompose_key(const HierarchicalKey& key);

/// Session leaf layout: session field (16) | generation, big-endian (4) |
/// binding tag (12) = PRF(sub-domain part, session field | generation | identity).
KeyPart make_session_leaf(const SessionField& session_id, std::uint32_t generation,
                          std::string_view identity, const KeyPart& subdomain);

SessionKeySet mint_session_keys(const SessionField& session_id,
                                const std::vector<Participant>& participants,
                                const RealmDirectory& directory);

/// Re-mints for `new_participants` under generation + 1. Always bumps the
/// generation, even when membership is unchanged.
SessionKeySet refresh_session(const SessionKeySet& set,
                              const std::vector<Participant>& new_participants,
                              const RealmDirectory& directory);

bool verify_session_key(const HierarchicalKey& key, const SessionKeySet& set);

}  // namespace mpauth::keys
