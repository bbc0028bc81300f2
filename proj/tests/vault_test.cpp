#include <doctest.h>

#include <filesystem>
#include <functional>
#include <random>
#include <set>
#include <thread>

#include "mpauth/error.hpp"
#include "mpauth/hex.hpp"
#include "mpauth/vault.hpp"

using namespace mpauth;
using namespace mpauth::vault;

namespace {

// Same reference values as keys_test (Python oracle).
constexpr const char* kRootA = "8ebd07e85f0d3e539be64086b43c26cd308e622c21f280949c64f2469df65ea0";
constexpr const char* kSubHr = "caf6312606fa525083e024d30e5c34d607938877a689253a1df046fc6595a2e9";
constexpr const char* kPrivAlice = "e0d8b303e878915b8d33363b2ce1534e8395e3f1ac00601e3e469a0d2c753572";

const Fields kAliceSecrets = {{"spouse", "bob"}, {"dog", "rex"}, {"first_school", "elm street"}};

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::IoError;
}

void two_by_two(Vault& v) {
  v.register_cloud("CloudA", as_bytes("master-secret-A"));
  v.register_cloud("CloudB", as_bytes("master-secret-B"));
  for (const auto* c : {"CloudA", "CloudB"}) {
    for (const auto* s : {"hr", "ops"}) {
      v.register_subdomain(c, s);
      v.register_tenant(c, s, std::string(c) + "-" + s + "-user", {}, {{"pet", "cat"}});
    }
  }
}

}  // namespace

TEST_CASE("cloud registration") {
  Vault v;
  auto root = v.register_cloud("CloudA", as_bytes("master-secret-A"));
  v.register_cloud("CloudB", as_bytes("master-secret-B"));
  CHECK(v.cloud_count() == 2);
  CHECK(root.hex() == kRootA);
  CHECK(root == keys::derive_root_key("CloudA", as_bytes("master-secret-A")));
  CHECK(v.root_key("CloudA") == root);
  CHECK(code_of([&] { v.register_cloud("CloudA", as_bytes("other")); }) == ErrorCode::AlreadyRegistered);
}

TEST_CASE("sub-domain registration") {
  Vault v;
  v.register_cloud("CloudA", as_bytes("master-secret-A"));
  auto hr = v.register_subdomain("CloudA", "hr");
  CHECK(hr.hex() == kSubHr);
  CHECK(v.subdomain_key("CloudA", "hr") == hr);
  CHECK(v.subdomain_count() == 1);
  CHECK(code_of([&] { v.register_subdomain("CloudX", "hr"); }) == ErrorCode::UnknownCloud);
  CHECK(code_of([&] { v.register_subdomain("CloudA", "hr"); }) == ErrorCode::AlreadyRegistered);

  Vault w;
  w.register_cloud("CloudA", as_bytes("master-secret-A"));
  CHECK(w.register_subdomain("CloudA", "hr") == hr);
}

TEST_CASE("tenant registration issues reference credentials") {
  Vault v;
  v.register_cloud("CloudA", as_bytes("master-secret-A"));
  v.register_subdomain("CloudA", "hr");
  auto creds = v.register_tenant("CloudA", "hr", "alice", {{"name", "Alice"}}, kAliceSecrets);
  CHECK(creds.private_key.hex() == kPrivAlice);
  CHECK(creds.idr.hex() == kRootA);
  CHECK(creds.ids.hex() == kSubHr);
  CHECK(v.verify_membership(creds.idr, creds.ids) == Membership::Valid);
  CHECK(v.resolve_membership(creds.idr, creds.ids) == RealmRef{"CloudA", "hr"});
  auto rec = v.tenant("alice");
  REQUIRE(rec);
  CHECK(rec->primary_details.at("name") == "Alice");
  CHECK(rec->signature == keys::make_signature("alice", kAliceSecrets));
}

TEST_CASE("tenant registration errors") {
  Vault v;
  v.register_cloud("CloudA", as_bytes("s"));
  v.register_subdomain("CloudA", "hr");
  CHECK(code_of([&] { v.register_tenant("CloudA", "hr", "alice", {}, {}); }) == ErrorCode::EmptyMetadata);
  CHECK(code_of([&] { v.register_tenant("CloudZ", "hr", "alice", {}, kAliceSecrets); }) == ErrorCode::UnknownCloud);
  CHECK(code_of([&] { v.register_tenant("CloudA", "ops", "alice", {}, kAliceSecrets); }) ==
        ErrorCode::UnknownSubdomain);
  v.register_tenant("CloudA", "hr", "alice", {}, kAliceSecrets);
  CHECK(code_of([&] { v.register_tenant("CloudA", "hr", "alice", {}, kAliceSecrets); }) ==
        ErrorCode::AlreadyRegistered);
}

TEST_CASE("tenant id enters the signature") {
  Vault v;
  v.register_cloud("CloudA", as_bytes("s"));
  v.register_subdomain("CloudA", "hr");
  std::set<std::string> seen;
  for (int i = 0; i < 50; ++i) {
    auto c = v.register_tenant("CloudA", "hr", "t" + std::to_string(i), {}, {{"dog", "rex"}});
    CHECK(seen.insert(c.private_key.hex()).second);
  }
}

TEST_CASE("membership is Invalid for random and cross-realm pairs") {
  Vault v;
  two_by_two(v);
  std::mt19937_64 rng(7);
  keys::PartBytes a{}, b{};
  for (auto& x : a) x = static_cast<std::uint8_t>(rng());
  for (auto& x : b) x = static_cast<std::uint8_t>(rng());
  CHECK(v.verify_membership({keys::PartRole::Root, a}, {keys::PartRole::SubDomain, b}) == Membership::Invalid);

  for (const auto* c1 : {"CloudA", "CloudB"}) {
    for (const auto* c2 : {"CloudA", "CloudB"}) {
      for (const auto* s : {"hr", "ops"}) {
        auto expected = std::string(c1) == c2 ? Membership::Valid : Membership::Invalid;
        CHECK(v.verify_membership(*v.root_key(c1), *v.subdomain_key(c2, s)) == expected);
      }
    }
  }
}

TEST_CASE("a sub-domain without tenants is not a membership") {
  Vault v;
  v.register_cloud("CloudA", as_bytes("s"));
  auto sub = v.register_subdomain("CloudA", "empty");
  CHECK(v.verify_membership(*v.root_key("CloudA"), sub) == Membership::Invalid);
}

TEST_CASE("personal secret matching") {
  Vault v;
  v.register_cloud("CloudA", as_bytes("s"));
  v.register_subdomain("CloudA", "hr");
  v.register_tenant("CloudA", "hr", "alice", {}, kAliceSecrets);
  CHECK(v.match_personal_secrets("alice", kAliceSecrets) == SecretMatch::Matched);
  auto wrong = kAliceSecrets;
  wrong["dog"] = "fido";
  CHECK(v.match_personal_secrets("alice", wrong) == SecretMatch::Rejected);
  // Every proper subset of the three classes is rejected.
  std::vector<std::string> classes;
  for (const auto& [k, _] : kAliceSecrets) classes.push_back(k);
  for (unsigned mask = 0; mask < 7; ++mask) {
    Fields answers;
    for (unsigned i = 0; i < 3; ++i) {
      if (mask & (1u << i)) answers[classes[i]] = kAliceSecrets.at(classes[i]);
    }
    CHECK(v.match_personal_secrets("alice", answers) == SecretMatch::Rejected);
  }
  CHECK(code_of([&] { v.match_personal_secrets("nobody", {}); }) == ErrorCode::UnknownTenant);
}

TEST_CASE("snapshot round-trip") {
  Vault v;
  two_by_two(v);
  auto path = std::filesystem::temp_directory_path() / "mpauth_vault_snapshot.json";
  v.save_snapshot(path);
  auto restored = load_snapshot(path);
  std::filesystem::remove(path);
  CHECK(restored->to_json() == v.to_json());
  CHECK(restored->tenant_count() == 4);
  auto rec = restored->tenant("CloudB-ops-user");
  REQUIRE(rec);
  CHECK(restored->verify_membership(rec->idr, rec->ids) == Membership::Valid);
  CHECK_THROWS_AS(Vault(nlohmann::json::parse(R"({"clouds": {"C": {"root_key": "zz"}}})")), Error);
}

TEST_CASE("concurrent registration and verification") {
  Vault v;
  v.register_cloud("CloudA", as_bytes("s"));
  v.register_subdomain("CloudA", "hr");
  auto seed = v.register_tenant("CloudA", "hr", "seed", {}, {{"k", "v"}});
  std::vector<std::thread> threads;
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&, t] {
      for (int i = 0; i < 100; ++i) {
        v.register_tenant("CloudA", "hr", "u" + std::to_string(t) + "-" + std::to_string(i), {}, {{"k", "v"}});
        CHECK(v.verify_membership(seed.idr, seed.ids) == Membership::Valid);
      }
    });
  }
  for (auto& th : threads) th.join();
  CHECK(v.tenant_count() == 401);
}
