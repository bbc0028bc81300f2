#include "mpauth/keys.hpp"

#include <algorithm>

#include "mpauth/digest.hpp"
#include "mpauth/error.hpp"
#include "mpauth/hex.hpp"

namespace mpauth::keys {

namespace {

constexpr std::string_view kRootLabel = "mpauth/root";
constexpr std::string_view kSubdomainLabel = "mpauth/subdomain";
constexpr std::string_view kPrivateLabel = "mpauth/private";
constexpr std::string_view kSessionLabel = "mpauth/session";
constexpr std::string_view kSignatureLabel = "mpauth/signature";

constexpr std::size_t kGenerationOffset = kSessionFieldSize;
constexpr std::size_t kTagOffset = kSessionFieldSize + 4;

// label || 0x00 || data
PartBytes prf(std::span<const std::uint8_t> key, std::string_view label,
              std::span<const std::uint8_t> data) {
  Bytes message;
  message.reserve(label.size() + 1 + data.size());
  message.insert(message.end(), label.begin(), label.end());
  message.push_back(0);
  message.insert(message.end(), data.begin(), data.end());
  return hmac_sha256(key, message);
}

void require_role(const KeyPart& part, PartRole expected, std::string_view what) {
  if (part.role() != expected) {
    throw Error(ErrorCode::RoleMismatch, std::string(what) + " must have role " +
                                             std::string(to_string(expected)) + ", got " +
                                             std::string(to_string(part.role())));
  }
}

void append_u32(Bytes& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

SessionKeySet mint_generation(const SessionField& session_id, std::uint32_t generation,
                              const std::vector<Participant>& participants,
                              const RealmDirectory& directory) {
  if (participants.empty()) throw Error(ErrorCode::InvalidInput, "participant list is empty");

  SessionKeySet set;
  set.session_id = session_id;
  set.generation = generation;
  set.participants = participants;
  for (const auto& p : participants) {
    if (p.identity.empty()) throw Error(ErrorCode::InvalidInput, "participant identity is empty");
    auto root = directory.root_key(p.cloud_id);
    if (!root) throw Error(ErrorCode::UnregisteredRealm, "cloud '" + p.cloud_id + "' is not in the vault");
    auto sub = directory.subdomain_key(p.cloud_id, p.subdomain_id);
    if (!sub) {
      throw Error(ErrorCode::UnregisteredRealm,
                  "sub-domain '" + p.cloud_id + "/" + p.subdomain_id + "' is not in the vault");
    }
    auto leaf = make_session_leaf(session_id, generation, p.identity, *sub);
    auto [it, inserted] = set.keys.emplace(p.identity, compose_key(*root, *sub, leaf));
    if (!inserted) throw Error(ErrorCode::InvalidInput, "duplicate participant '" + p.identity + "'");
  }
  return set;
}

}  // namespace

std::string_view to_string(PartRole role) {
  switch (role) {
    case PartRole::Root: return "Root";
    case PartRole::SubDomain: return "SubDomain";
    case PartRole::Private: return "Private";
    case PartRole::Session: return "Session";
  }
  return "?";
}

std::optional<PartRole> part_role_from_string(std::string_view name) {
  for (auto r : {PartRole::Root, PartRole::SubDomain, PartRole::Private, PartRole::Session}) {
    if (to_string(r) == name) return r;
  }
  return std::nullopt;
}

KeyPart KeyPart::from_bytes(PartRole role, std::span<const std::uint8_t> bytes) {
  if (bytes.size() != kPartSize) {
    throw Error(ErrorCode::InvalidInput,
                "key part must be " + std::to_string(kPartSize) + " bytes, got " + std::to_string(bytes.size()));
  }
  PartBytes out{};
  std::copy(bytes.begin(), bytes.end(), out.begin());
  return {role, out};
}

std::string KeyPart::hex() const { return to_hex(bytes_); }

std::optional<SessionField> HierarchicalKey::session_field() const {
  if (leaf_.role() != PartRole::Session) return std::nullopt;
  SessionField field{};
  std::copy_n(leaf_.bytes().begin(), kSessionFieldSize, field.begin());
  return field;
}

std::optional<std::uint32_t> HierarchicalKey::generation() const {
  if (leaf_.role() != PartRole::Session) return std::nullopt;
  const auto& b = leaf_.bytes();
  return (std::uint32_t{b[kGenerationOffset]} << 24) | (std::uint32_t{b[kGenerationOffset + 1]} << 16) |
         (std::uint32_t{b[kGenerationOffset + 2]} << 8) | std::uint32_t{b[kGenerationOffset + 3]};
}

std::string HierarchicalKey::hex() const { return root_.hex() + subdomain_.hex() + leaf_.hex(); }

std::string HierarchicalKey::fingerprint() const {
  return to_hex(std::span(leaf_.bytes()).first(4)) + to_hex(std::span(leaf_.bytes()).last(4));
}

KeyPart derive_root_key(std::string_view cloud_id, std::span<const std::uint8_t> master_secret) {
  if (cloud_id.empty()) throw Error(ErrorCode::InvalidInput, "cloud id is empty");
  if (master_secret.empty()) throw Error(ErrorCode::InvalidInput, "master secret is empty");
  return {PartRole::Root, prf(master_secret, kRootLabel, as_bytes(cloud_id))};
}

KeyPart derive_subdomain_key(const KeyPart& root, std::string_view subdomain_id) {
  require_role(root, PartRole::Root, "parent");
  if (subdomain_id.empty()) throw Error(ErrorCode::InvalidInput, "sub-domain id is empty");
  return {PartRole::SubDomain, prf(root.bytes(), kSubdomainLabel, as_bytes(subdomain_id))};
}

DigitalSignature make_signature(std::string_view tenant_id,
                                const std::map<std::string, std::string>& personal_secrets) {
  Sha256 h;
  h.update(as_bytes(kSignatureLabel)).update(std::array<std::uint8_t, 1>{0});
  h.update_prefixed(as_bytes(tenant_id));
  for (const auto& [cls, value] : personal_secrets) {
    h.update_prefixed(as_bytes(cls)).update_prefixed(as_bytes(value));
  }
  return {h.finish()};
}

KeyPart issue_private_key(const DigitalSignature& signature, const KeyPart& subdomain) {
  require_role(subdomain, PartRole::SubDomain, "sub-domain part");
  return {PartRole::Private, prf(subdomain.bytes(), kPrivateLabel, signature.bytes)};
}

HierarchicalKey compose_key(const KeyPart& root, const KeyPart& subdomain, const KeyPart& leaf) {
  require_role(root, PartRole::Root, "root part");
  require_role(subdomain, PartRole::SubDomain, "sub-domain part");
  if (leaf.role() != PartRole::Private && leaf.role() != PartRole::Session) {
    throw Error(ErrorCode::RoleMismatch,
                "leaf part must be Private or Session, got " + std::string(to_string(leaf.role())));
  }
  return {root, subdomain, leaf};
}

std::tuple<KeyPart, KeyPart, KeyPart> decompose_key(const HierarchicalKey& key) {
  return {key.root(), key.subdomain(), key.leaf()};
}

KeyPart make_session_leaf(const SessionField& session_id, std::uint32_t generation,
                          std::string_view identity, const KeyPart& subdomain) {
  require_role(subdomain, PartRole::SubDomain, "sub-domain part");
  Bytes head(session_id.begin(), session_id.end());
  append_u32(head, generation);

  Bytes tag_input = head;
  tag_input.insert(tag_input.end(), identity.begin(), identity.end());
  auto tag = prf(subdomain.bytes(), kSessionLabel, tag_input);

  PartBytes leaf{};
  std::copy(head.begin(), head.end(), leaf.begin());
  std::copy_n(tag.begin(), kPartSize - kTagOffset, leaf.begin() + kTagOffset);
  return {PartRole::Session, leaf};
}

SessionKeySet mint_session_keys(const SessionField& session_id,
                                const std::vector<Participant>& participants,
                                const RealmDirectory& directory) {
  return mint_generation(session_id, 0, participants, directory);
}

SessionKeySet refresh_session(const SessionKeySet& set,
                              const std::vector<Participant>& new_participants,
                              const RealmDirectory& directory) {
  return mint_generation(set.session_id, set.generation + 1, new_participants, directory);
}

bool verify_session_key(const HierarchicalKey& key, const SessionKeySet& set) {
  if (key.session_field() != set.session_id || key.generation() != set.generation) return false;
  return std::any_of(set.keys.begin(), set.keys.end(),
                     [&](const auto& entry) { return entry.second == key; });
}

}  // namespace mpauth::keys
