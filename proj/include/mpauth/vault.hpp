#pragma once

// The session authority's security vault: one folder per cloud holding its
// root key, one subfolder per sub-domain holding the sub-domain key, and the
// tenant records registered under each sub-domain.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>

#include <json.hpp>

#include "mpauth/keys.hpp"

namespace mpauth::vault {

using Fields = std::map<std::string, std::string>;

struct TenantRecord {
  std::string tenant_id;
  std::string cloud_id;
  std::string subdomain_id;
  Fields primary_details;
  Fields extension_metadata;
  keys::DigitalSignature signature;
  keys::KeyPart idr;  // cloud membership
  keys::KeyPart ids;  // sub-domain membership
};

struct TenantCredentials {
  keys::KeyPart idr;
  keys::KeyPart ids;
  keys::KeyPart private_key;
};

struct RealmRef {
  std::string cloud_id;
  std::string subdomain_id;

  friend bool operator==(const RealmRef&, const RealmRef&) = default;
};

enum class Membership { Valid, Invalid };
enum class SecretMatch { Matched, Rejected };

/// Thread-safe: verification and lookups take a shared lock, registrations an
/// exclusive one. Nothing is ever deleted.
class Vault final : public keys::RealmDirectory {
 public:
  Vault() = default;
  /// Restores a snapshot produced by to_json(). Throws Error(ParseError).
  explicit Vault(const nlohmann::json& snapshot);

  Vault(const Vault&) = delete;
  Vault& operator=(const Vault&) = delete;

  keys::KeyPart register_cloud(const std::string& cloud_id, std::span<const std::uint8_t> master_secret);
  keys::KeyPart register_subdomain(const std::string& cloud_id, const std::string& subdomain_id);
  TenantCredentials register_tenant(const std::string& cloud_id, const std::string& subdomain_id,
                                    const std::string& tenant_id, Fields primary_details,
                                    Fields extension_metadata);

  Membership verify_membership(const keys::KeyPart& idr, const keys::KeyPart& ids) const;
  /// The realm a valid (IDr, IDs) pair belongs to.
  std::optional<RealmRef> resolve_membership(const keys::KeyPart& idr, const keys::KeyPart& ids) const;

  SecretMatch match_personal_secrets(const std::string& tenant_id, const Fields& answers) const;

  std::optional<TenantRecord> tenant(std::string_view tenant_id) const;

  std::optional<keys::KeyPart> root_key(std::string_view cloud_id) const override;
  std::optional<keys::KeyPart> subdomain_key(std::string_view cloud_id,
                                             std::string_view subdomain_id) const override;

  std::size_t cloud_count() const;
  std::size_t subdomain_count() const;
  std::size_t tenant_count() const;

  nlohmann::json to_json() const;
  void save_snapshot(const std::filesystem::path& path) const;

 private:
  struct SubdomainFolder {
    keys::KeyPart subdomain_key;
    std::map<std::string, TenantRecord, std::less<>> tenants;
  };
  struct CloudFolder {
    keys::KeyPart root_key;
    std::map<std::string, SubdomainFolder, std::less<>> subdomains;
  };

  const TenantRecord* find_tenant_locked(std::string_view tenant_id) const;

  mutable std::shared_mutex mutex_;
  std::map<std::string, CloudFolder, std::less<>> clouds_;
  std::map<std::string, RealmRef, std::less<>> tenant_index_;
};

std::unique_ptr<Vault> load_snapshot(const std::filesystem::path& path);

}  // namespace mpauth::vault
