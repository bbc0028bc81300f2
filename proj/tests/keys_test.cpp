#include <doctest.h>

#include <random>
#include <set>

#include "mpauth/error.hpp"
#include "mpauth/hex.hpp"
#include "mpauth/keys.hpp"

using namespace mpauth;
using namespace mpauth::keys;

namespace {

// Reference values from tests/oracles/keyed_hash_oracle.py (Python hmac/hashlib).
constexpr const char* kRootZero = "90c406043687ac37eaa38d711bfea85e7be8743f4455ce5d06d99839dc6e923d";
constexpr const char* kRootA = "8ebd07e85f0d3e539be64086b43c26cd308e622c21f280949c64f2469df65ea0";
constexpr const char* kSubHr = "caf6312606fa525083e024d30e5c34d607938877a689253a1df046fc6595a2e9";
constexpr const char* kSigAlice = "4b97e5373d52b7b8841e701c509a3a0ddea32d0cedf7318b9762c0a9748f559d";
constexpr const char* kPrivAlice = "e0d8b303e878915b8d33363b2ce1534e8395e3f1ac00601e3e469a0d2c753572";
constexpr const char* kLeafGen0 = "000102030405060708090a0b0c0d0e0f000000005d4a57358f7cbb247a1506cf";
constexpr const char* kLeafGen3 = "000102030405060708090a0b0c0d0e0f000000039ceff78cc1dba843e29b3d9c";

const std::map<std::string, std::string> kAliceSecrets = {
    {"spouse", "bob"}, {"dog", "rex"}, {"first_school", "elm street"}};

SessionField counting_field() {
  SessionField f{};
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = static_cast<std::uint8_t>(i);
  return f;
}

KeyPart hr_part() { return derive_subdomain_key(derive_root_key("CloudA", as_bytes("master-secret-A")), "hr"); }

class MapDirectory : public RealmDirectory {
 public:
  void add(const std::string& cloud, const std::vector<std::string>& subs) {
    auto root = derive_root_key(cloud, as_bytes("secret-" + cloud));
    roots_.emplace(cloud, root);
    for (const auto& s : subs) subs_.emplace(cloud + "/" + s, derive_subdomain_key(root, s));
  }
  std::optional<KeyPart> root_key(std::string_view cloud) const override {
    auto it = roots_.find(std::string(cloud));
    return it == roots_.end() ? std::nullopt : std::optional(it->second);
  }
  std::optional<KeyPart> subdomain_key(std::string_view cloud, std::string_view sub) const override {
    auto it = subs_.find(std::string(cloud) + "/" + std::string(sub));
    return it == subs_.end() ? std::nullopt : std::optional(it->second);
  }

 private:
  std::map<std::string, KeyPart> roots_;
  std::map<std::string, KeyPart> subs_;
};

MapDirectory two_cloud_directory() {
  MapDirectory d;
  d.add("CloudA", {"hr", "finance"});
  d.add("CloudB", {"ops"});
  return d;
}

PartBytes random_bytes(std::mt19937_64& rng) {
  PartBytes b{};
  for (auto& x : b) x = static_cast<std::uint8_t>(rng());
  return b;
}

}  // namespace

TEST_CASE("root and sub-domain derivations match the reference") {
  CHECK(derive_root_key("CloudA", PartBytes{}).hex() == kRootZero);
  auto root = derive_root_key("CloudA", as_bytes("master-secret-A"));
  CHECK(root.hex() == kRootA);
  CHECK(root.role() == PartRole::Root);
  auto hr = derive_subdomain_key(root, "hr");
  CHECK(hr.hex() == kSubHr);
  CHECK(hr.role() == PartRole::SubDomain);
}

TEST_CASE("signature and private part match the reference") {
  auto sig = make_signature("alice", kAliceSecrets);
  CHECK(to_hex(sig.bytes) == kSigAlice);
  auto priv = issue_private_key(sig, hr_part());
  CHECK(priv.hex() == kPrivAlice);
  CHECK(priv.role() == PartRole::Private);
}

TEST_CASE("session leaf layout matches the reference") {
  CHECK(make_session_leaf(counting_field(), 0, "alice", hr_part()).hex() == kLeafGen0);
  CHECK(make_session_leaf(counting_field(), 3, "alice", hr_part()).hex() == kLeafGen3);
}

TEST_CASE("derivations are deterministic and label-separated") {
  auto root = derive_root_key("CloudA", as_bytes("s"));
  CHECK(root == derive_root_key("CloudA", as_bytes("s")));
  CHECK(root != derive_root_key("CloudB", as_bytes("s")));
  CHECK(derive_subdomain_key(root, "hr") != derive_subdomain_key(root, "finance"));
  CHECK(make_signature("alice", kAliceSecrets) != make_signature("alice", {{"dog", "rex"}}));
  // Length prefixes keep ("ab", "c") and ("a", "bc") apart.
  CHECK(make_signature("t", {{"ab", "c"}}) != make_signature("t", {{"a", "bc"}}));
}

TEST_CASE("derivation inputs are validated") {
  CHECK_THROWS_AS(derive_root_key("", as_bytes("s")), Error);
  CHECK_THROWS_AS(derive_root_key("CloudA", Bytes{}), Error);
  auto root = derive_root_key("CloudA", as_bytes("s"));
  try {
    derive_subdomain_key(derive_subdomain_key(root, "hr"), "x");
    FAIL("expected RoleMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::RoleMismatch);
  }
  CHECK_THROWS_AS(KeyPart::from_bytes(PartRole::Root, Bytes(31)), Error);
}

TEST_CASE("compose enforces the role triple") {
  auto root = derive_root_key("CloudA", as_bytes("s"));
  auto sub = derive_subdomain_key(root, "hr");
  auto priv = issue_private_key(make_signature("alice", kAliceSecrets), sub);
  CHECK_NOTHROW(compose_key(root, sub, priv));
  CHECK_THROWS_AS(compose_key(sub, root, priv), Error);
  CHECK_THROWS_AS(compose_key(root, sub, root), Error);
  CHECK_THROWS_AS(compose_key(root, root, priv), Error);
  CHECK_FALSE(compose_key(root, sub, priv).session_field().has_value());
}

TEST_CASE("compose and decompose round-trip on random parts") {
  std::mt19937_64 rng(20240917);
  for (int i = 0; i < 1000; ++i) {
    KeyPart r(PartRole::Root, random_bytes(rng));
    KeyPart s(PartRole::SubDomain, random_bytes(rng));
    KeyPart l(i % 2 ? PartRole::Private : PartRole::Session, random_bytes(rng));
    auto [r2, s2, l2] = decompose_key(compose_key(r, s, l));
    REQUIRE(r2 == r);
    REQUIRE(s2 == s);
    REQUIRE(l2 == l);
  }
}

TEST_CASE("minted keys share the session field and root in their own realm") {
  auto dir = two_cloud_directory();
  std::vector<Participant> ps = {{"alice", "CloudA", "hr"}, {"bob", "CloudA", "finance"}, {"carol", "CloudB", "ops"}};
  auto set = mint_session_keys(counting_field(), ps, dir);
  REQUIRE(set.keys.size() == 3);
  CHECK(set.generation == 0);
  for (const auto& p : ps) {
    const auto& k = set.keys.at(p.identity);
    CHECK(k.session_field() == counting_field());
    CHECK(k.generation() == 0u);
    CHECK(k.root() == *dir.root_key(p.cloud_id));
    CHECK(k.subdomain() == *dir.subdomain_key(p.cloud_id, p.subdomain_id));
    CHECK(verify_session_key(k, set));
  }
  CHECK(set.keys.at("alice") != set.keys.at("bob"));
}

TEST_CASE("minting rejects empty, duplicate and unknown participants") {
  auto dir = two_cloud_directory();
  auto code_of = [&](const std::vector<Participant>& ps) {
    try {
      mint_session_keys(counting_field(), ps, dir);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::IoError;
  };
  CHECK(code_of({}) == ErrorCode::InvalidInput);
  CHECK(code_of({{"a", "CloudA", "hr"}, {"a", "CloudB", "ops"}}) == ErrorCode::InvalidInput);
  CHECK(code_of({{"a", "CloudZ", "hr"}}) == ErrorCode::UnregisteredRealm);
  CHECK(code_of({{"a", "CloudA", "ops"}}) == ErrorCode::UnregisteredRealm);
}

TEST_CASE("refresh invalidates every earlier generation") {
  auto dir = two_cloud_directory();
  std::vector<Participant> ps = {{"alice", "CloudA", "hr"}, {"carol", "CloudB", "ops"}};
  std::vector<SessionKeySet> generations = {mint_session_keys(counting_field(), ps, dir)};
  for (int i = 0; i < 5; ++i) generations.push_back(refresh_session(generations.back(), ps, dir));
  const auto& latest = generations.back();
  CHECK(latest.generation == 5);
  for (std::size_t g = 0; g + 1 < generations.size(); ++g) {
    for (const auto& [id, key] : generations[g].keys) CHECK_FALSE(verify_session_key(key, latest));
  }
  for (const auto& [id, key] : latest.keys) CHECK(verify_session_key(key, latest));
}

TEST_CASE("a key from another session does not verify") {
  auto dir = two_cloud_directory();
  std::vector<Participant> ps = {{"alice", "CloudA", "hr"}};
  auto other = counting_field();
  other[0] = 0xff;
  auto a = mint_session_keys(counting_field(), ps, dir);
  auto b = mint_session_keys(other, ps, dir);
  CHECK_FALSE(verify_session_key(b.keys.at("alice"), a));
}
