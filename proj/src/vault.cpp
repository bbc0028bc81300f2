#include "mpauth/vault.hpp"

#include <fstream>
#include <mutex>

#include "mpauth/error.hpp"
#include "mpauth/hex.hpp"

namespace mpauth::vault {

using nlohmann::json;

namespace {

keys::KeyPart part_from_hex(keys::PartRole role, const json& j, std::string_view field) {
  if (!j.is_string()) throw Error(ErrorCode::ParseError, "field '" + std::string(field) + "' must be a hex string");
  try {
    return keys::KeyPart::from_bytes(role, from_hex(j.get<std::string>()));
  } catch (const Error& e) {
    throw Error(ErrorCode::ParseError, "field '" + std::string(field) + "': " + e.what());
  }
}

Fields fields_from_json(const json& j) {
  Fields out;
  for (const auto& [k, v] : j.items()) out.emplace(k, v.get<std::string>());
  return out;
}

}  // namespace

Vault::Vault(const json& snapshot) {
  try {
    const auto& clouds = snapshot.at("clouds");
    for (const auto& [cloud_id, cloud] : clouds.items()) {
      CloudFolder folder{part_from_hex(keys::PartRole::Root, cloud.at("root_key"), "root_key"), {}};
      for (const auto& [sub_id, sub] : cloud.at("subdomains").items()) {
        SubdomainFolder sf{part_from_hex(keys::PartRole::SubDomain, sub.at("subdomain_key"), "subdomain_key"), {}};
        for (const auto& [tenant_id, t] : sub.at("tenants").items()) {
          auto sig = from_hex(t.at("signature").get<std::string>());
          if (sig.size() != keys::kPartSize) throw Error(ErrorCode::ParseError, "signature length");
          TenantRecord rec{tenant_id,
                           cloud_id,
                           sub_id,
                           fields_from_json(t.at("primary_details")),
                           fields_from_json(t.at("extension_metadata")),
                           {},
                           folder.root_key,
                           sf.subdomain_key};
          std::copy(sig.begin(), sig.end(), rec.signature.bytes.begin());
          if (!tenant_index_.emplace(tenant_id, RealmRef{cloud_id, sub_id}).second) {
            throw Error(ErrorCode::ParseError, "duplicate tenant '" + tenant_id + "'");
          }
          sf.tenants.emplace(tenant_id, std::move(rec));
        }
        folder.subdomains.emplace(sub_id, std::move(sf));
      }
      clouds_.emplace(cloud_id, std::move(folder));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("vault snapshot: ") + e.what());
  }
}

keys::KeyPart Vault::register_cloud(const std::string& cloud_id, std::span<const std::uint8_t> master_secret) {
  auto root = keys::derive_root_key(cloud_id, master_secret);
  std::unique_lock lock(mutex_);
  if (clouds_.contains(cloud_id)) throw Error(ErrorCode::AlreadyRegistered, "cloud '" + cloud_id + "'");
  clouds_.emplace(cloud_id, CloudFolder{root, {}});
  return root;
}

keys::KeyPart Vault::register_subdomain(const std::string& cloud_id, const std::string& subdomain_id) {
  std::unique_lock lock(mutex_);
  auto cloud = clouds_.find(cloud_id);
  if (cloud == clouds_.end()) throw Error(ErrorCode::UnknownCloud, "cloud '" + cloud_id + "'");
  if (cloud->second.subdomains.contains(subdomain_id)) {
    throw Error(ErrorCode::AlreadyRegistered, "sub-domain '" + cloud_id + "/" + subdomain_id + "'");
  }
  auto key = keys::derive_subdomain_key(cloud->second.root_key, subdomain_id);
  cloud->second.subdomains.emplace(subdomain_id, SubdomainFolder{key, {}});
  return key;
}

TenantCredentials Vault::register_tenant(const std::string& cloud_id, const std::string& subdomain_id,
                                         const std::string& tenant_id, Fields primary_details,
                                         Fields extension_metadata) {
  if (tenant_id.empty()) throw Error(ErrorCode::InvalidInput, "tenant id is empty");
  if (extension_metadata.empty()) {
    throw Error(ErrorCode::EmptyMetadata, "tenant '" + tenant_id + "' has no extension metadata");
  }
  std::unique_lock lock(mutex_);
  auto cloud = clouds_.find(cloud_id);
  if (cloud == clouds_.end()) throw Error(ErrorCode::UnknownCloud, "cloud '" + cloud_id + "'");
  auto sub = cloud->second.subdomains.find(subdomain_id);
  if (sub == cloud->second.subdomains.end()) {
    throw Error(ErrorCode::UnknownSubdomain, "sub-domain '" + cloud_id + "/" + subdomain_id + "'");
  }
  if (tenant_index_.contains(tenant_id)) throw Error(ErrorCode::AlreadyRegistered, "tenant '" + tenant_id + "'");

  auto signature = keys::make_signature(tenant_id, extension_metadata);
  auto private_key = keys::issue_private_key(signature, sub->second.subdomain_key);
  TenantRecord rec{tenant_id,
                   cloud_id,
                   subdomain_id,
                   std::move(primary_details),
                   std::move(extension_metadata),
                   signature,
                   cloud->second.root_key,
                   sub->second.subdomain_key};
  TenantCredentials creds{rec.idr, rec.ids, private_key};
  sub->second.tenants.emplace(tenant_id, std::move(rec));
  tenant_index_.emplace(tenant_id, RealmRef{cloud_id, subdomain_id});
  return creds;
}

std::optional<RealmRef> Vault::resolve_membership(const keys::KeyPart& idr, const keys::KeyPart& ids) const {
  if (idr.role() != keys::PartRole::Root || ids.role() != keys::PartRole::SubDomain) return std::nullopt;
  std::shared_lock lock(mutex_);
  for (const auto& [cloud_id, cloud] : clouds_) {
    if (cloud.root_key != idr) continue;
    for (const auto& [sub_id, sub] : cloud.subdomains) {
      if (sub.subdomain_key == ids && !sub.tenants.empty()) return RealmRef{cloud_id, sub_id};
    }
  }
  return std::nullopt;
}

Membership Vault::verify_membership(const keys::KeyPart& idr, const keys::KeyPart& ids) const {
  return resolve_membership(idr, ids) ? Membership::Valid : Membership::Invalid;
}

const TenantRecord* Vault::find_tenant_locked(std::string_view tenant_id) const {
  auto idx = tenant_index_.find(tenant_id);
  if (idx == tenant_index_.end()) return nullptr;
  const auto& sub = clouds_.find(idx->second.cloud_id)->second.subdomains.find(idx->second.subdomain_id)->second;
  return &sub.tenants.find(tenant_id)->second;
}

SecretMatch Vault::match_personal_secrets(const std::string& tenant_id, const Fields& answers) const {
  std::shared_lock lock(mutex_);
  const auto* rec = find_tenant_locked(tenant_id);
  if (rec == nullptr) throw Error(ErrorCode::UnknownTenant, "tenant '" + tenant_id + "'");
  for (const auto& [cls, value] : rec->extension_metadata) {
    auto it = answers.find(cls);
    if (it == answers.end() || it->second != value) return SecretMatch::Rejected;
  }
  return SecretMatch::Matched;
}

std::optional<TenantRecord> Vault::tenant(std::string_view tenant_id) const {
  std::shared_lock lock(mutex_);
  const auto* rec = find_tenant_locked(tenant_id);
  if (rec == nullptr) return std::nullopt;
  return *rec;
}

std::optional<keys::KeyPart> Vault::root_key(std::string_view cloud_id) const {
  std::shared_lock lock(mutex_);
  auto it = clouds_.find(cloud_id);
  if (it == clouds_.end()) return std::nullopt;
  return it->second.root_key;
}

std::optional<keys::KeyPart> Vault::subdomain_key(std::string_view cloud_id, std::string_view subdomain_id) const {
  std::shared_lock lock(mutex_);
  auto cloud = clouds_.find(cloud_id);
  if (cloud == clouds_.end()) return std::nullopt;
  auto sub = cloud->second.subdomains.find(subdomain_id);
  if (sub == cloud->second.subdomains.end()) return std::nullopt;
  return sub->second.subdomain_key;
}

std::size_t Vault::cloud_count() const {
  std::shared_lock lock(mutex_);
  return clouds_.size();
}

std::size_t Vault::subdomain_count() const {
  std::shared_lock lock(mutex_);
  std::size_t n = 0;
  for (const auto& [_, c] : clouds_) n += c.subdomains.size();
  return n;
}

std::size_t Vault::tenant_count() const {
  std::shared_lock lock(mutex_);
  return tenant_index_.size();
}

json Vault::to_json() const {
  std::shared_lock lock(mutex_);
  json clouds = json::object();
  for (const auto& [cloud_id, cloud] : clouds_) {
    json subs = json::object();
    for (const auto& [sub_id, sub] : cloud.subdomains) {
      json tenants = json::object();
      for (const auto& [tenant_id, t] : sub.tenants) {
        tenants[tenant_id] = {{"primary_details", t.primary_details},
                              {"extension_metadata", t.extension_metadata},
                              {"signature", to_hex(t.signature.bytes)}};
      }
      subs[sub_id] = {{"subdomain_key", sub.subdomain_key.hex()}, {"tenants", std::move(tenants)}};
    }
    clouds[cloud_id] = {{"root_key", cloud.root_key.hex()}, {"subdomains", std::move(subs)}};
  }
  return {{"clouds", std::move(clouds)}};
}

void Vault::save_snapshot(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << to_json().dump(2) << '\n';
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

std::unique_ptr<Vault> load_snapshot(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
  return std::make_unique<Vault>(doc);
}

}  // namespace mpauth::vault
