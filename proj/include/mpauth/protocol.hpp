#pragma once

// The 13-phase session approval protocol as per-role state machines.
//
// Each phase is one request from `source` to `destination` answered by one
// final response. The destination of phase k is always the source of phase
// k + 1, so a role that answers phase k also emits the phase k + 1 request in
// the same transition; the driver holds that request back until phase k's
// response has reached its source (start condition PreviousPhaseEnds).

#include <array>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "mpauth/keys.hpp"
#include "mpauth/vault.hpp"

namespace mpauth::protocol {

enum class Role : std::uint8_t { A, F, SAC, SAC_DB, SAC_SH, CloudA, CloudB };

inline constexpr std::array<Role, 7> kAllRoles = {Role::A,      Role::F,      Role::SAC,   Role::SAC_DB,
                                                  Role::SAC_SH, Role::CloudA, Role::CloudB};

std::string_view to_string(Role role);
std::optional<Role> role_from_string(std::string_view name);

inline constexpr int kPhaseCount = 13;
inline constexpr std::size_t kRequestBytes = 1024;
inline constexpr std::size_t kAckBytes = 1024;
inline constexpr std::size_t kCredentialBytes = 4096;
inline constexpr double kLocalizedTimeoutS = 200.0;

enum class StartCondition { ApplicationStart, PreviousPhaseEnds };

struct TimeoutMode {
  enum class Kind { None, PerPhase, LocalizedAtF };

  Kind kind = Kind::None;
  double seconds = 0.0;

  static TimeoutMode none() { return {}; }
  static TimeoutMode per_phase(double s) { return {Kind::PerPhase, s}; }
  static TimeoutMode localized_at_f(double s = kLocalizedTimeoutS) { return {Kind::LocalizedAtF, s}; }

  /// "none", "per-phase:<s>" or "localized-f:<s>". Throws Error(ParseError).
  static TimeoutMode parse(std::string_view text);
  std::string to_string() const;

  friend bool operator==(const TimeoutMode&, const TimeoutMode&) = default;
};

struct PhaseSpec {
  int index = 0;
  std::string name;
  Role source = Role::A;
  Role destination = Role::F;
  StartCondition start_condition = StartCondition::PreviousPhaseEnds;
  bool timeout_used = false;
  double timeout_s = 0.0;
  std::size_t request_bytes = kRequestBytes;
  std::size_t response_bytes = kAckBytes;

  /// "A>F: Secure (Request, R1, R2)"
  std::string label() const;
};

/// The 13 phases in order. Per-phase timeouts are set only for
/// TimeoutMode::PerPhase; the localized watchdog at F is not a phase property.
std::vector<PhaseSpec> protocol_table(const TimeoutMode& mode = TimeoutMode::none());

/// Row `index` (1-based) of the no-timeout table.
const PhaseSpec& phase_spec(int index);

using SessionId = keys::SessionField;
std::string to_hex(const SessionId& id);

enum class MessageKind { Request, Response };
std::string_view to_string(MessageKind kind);

struct Payload {
  std::vector<std::string> resources;
  std::string requester;
  std::string principal;
  std::optional<keys::KeyPart> idr;
  std::optional<keys::KeyPart> ids;
  std::optional<bool> credentials_valid;
  std::optional<keys::HierarchicalKey> idsess;
  std::vector<std::string> granted;

  friend bool operator==(const Payload&, const Payload&) = default;
};

struct ProtocolMessage {
  SessionId session_id{};
  int phase_index = 0;
  MessageKind kind = MessageKind::Request;
  Role source = Role::A;
  Role destination = Role::F;
  Payload payload;
  std::size_t payload_bytes = 0;

  friend bool operator==(const ProtocolMessage&, const ProtocolMessage&) = default;
};

/// Canonical one-line text form; equal messages serialize identically.
std::string serialize(const ProtocolMessage& msg);

struct DropReason {
  enum class Kind { PhaseTimeout, LocalizedTimeout, InvalidCredentials, AccessRefused, UnregisteredRealm };

  Kind kind = Kind::PhaseTimeout;
  int phase = 0;  // only meaningful for PhaseTimeout

  std::string to_string() const;
  friend bool operator==(const DropReason&, const DropReason&) = default;
};

enum class ViolationKind {
  UnknownSession,
  OutOfOrderPhase,
  NotForwardedByPrincipal,
  UnexpectedSource,
  Misaddressed,
  PhaseSkip,
  SessionClosed,
};

std::string_view to_string(ViolationKind kind);

struct Violation {
  ViolationKind kind;
  std::string detail;
};

// ---------------------------------------------------------------------------
// Session keys held by the SAC

/// Current SessionKeySet per session. Minting is deterministic, so re-minting
/// a session reproduces the same set.
class SessionKeyRegistry {
 public:
  explicit SessionKeyRegistry(const keys::RealmDirectory& directory) : directory_(directory) {}

  keys::SessionKeySet mint(const SessionId& session, const std::vector<keys::Participant>& participants);
  keys::SessionKeySet refresh(const SessionId& session, const std::vector<keys::Participant>& participants);
  std::optional<keys::SessionKeySet> current(const SessionId& session) const;

 private:
  const keys::RealmDirectory& directory_;
  mutable std::mutex mutex_;
  std::map<SessionId, keys::SessionKeySet> sets_;
};

// ---------------------------------------------------------------------------
// Resource clouds

struct CloudState {
  Role role = Role::CloudA;
  std::set<std::string, std::less<>> resources;
};

/// CloudA hosts R1, CloudB hosts R2.
CloudState default_cloud_state(Role cloud);

enum class AccessDecision { Granted, Refused };

/// Granted only when SAC-SH presents a current-generation session key for a
/// resource this cloud hosts.
AccessDecision grant_access(const CloudState& cloud, Role presenter, const keys::HierarchicalKey& idsess,
                            std::string_view resource, const SessionKeyRegistry& registry);

// ---------------------------------------------------------------------------
// Per-role state machines

struct RoleSession {
  Role role = Role::A;
  SessionId session_id{};
  std::size_t cursor = 0;  // position in the role's expected inbound sequence
  bool closed = false;
  Payload known;

  friend bool operator==(const RoleSession&, const RoleSession&) = default;
};

/// Trace facts the gatekeeping properties are checked against.
struct TraceNote {
  enum class Kind { Forward, Granted, Refused, Minted };

  Kind kind;
  Role cloud = Role::CloudA;  // Forward target / deciding cloud
  std::string key_fingerprint;
  std::string resource;
};

std::string_view to_string(TraceNote::Kind kind);

struct Transition {
  std::optional<RoleSession> state;  // nullopt only when no session could be opened
  std::vector<ProtocolMessage> outgoing;
  std::optional<DropReason> drop;
  std::optional<Violation> violation;
  std::vector<TraceNote> notes;
  std::optional<keys::SessionKeySet> minted;
};

struct Context {
  const vault::Vault& vault;
  SessionKeyRegistry& keys;
  CloudState cloud_a = default_cloud_state(Role::CloudA);
  CloudState cloud_b = default_cloud_state(Role::CloudB);
};

struct Requester {
  std::string identity;
  keys::KeyPart idr{keys::PartRole::Root, {}};
  keys::KeyPart ids{keys::PartRole::SubDomain, {}};
};

/// Role A's opening move: its session state and the phase-1 request.
Transition open_session(const SessionId& session, const Requester& requester, const std::string& principal,
                        const std::vector<std::string>& resources = {"R1", "R2"});

/// The ordered (phase, kind) sequence a role receives in a complete session.
std::vector<std::pair<int, MessageKind>> inbound_sequence(Role role);

/// Pure transition for one role. Messages that do not match the role's next
/// expected (phase, kind) are discarded: the state is returned unchanged and
/// the violation is reported.
Transition handle_message(Role self, const std::optional<RoleSession>& state, const ProtocolMessage& msg,
                          Context& ctx);

// ---------------------------------------------------------------------------
// Session-level progress

enum class Status { InProgress, Completed, Dropped };
std::string_view to_string(Status status);

struct SessionState {
  SessionId session_id{};
  Requester requester;
  std::string principal;
  std::array<std::string, 2> resources{"R1", "R2"};
  int current_phase = 0;
  Status status = Status::InProgress;
  std::optional<DropReason> drop_reason;
  std::optional<keys::SessionKeySet> idsess;
  double started_at = 0.0;
  std::optional<double> ended_at;
};

struct PhaseAdvance {
  SessionState session;
  std::optional<Violation> violation;
};

/// Completes phase current_phase + 1 on its final response. At phase 13 the
/// session becomes Completed; ended_at is left for the caller to stamp.
PhaseAdvance advance_phase(const SessionState& session, const ProtocolMessage& final_response);

/// Dropped(PhaseTimeout(phase)) when the phase uses a timeout and `elapsed`
/// exceeds it; otherwise unchanged.
SessionState on_timeout(const SessionState& session, int phase_index, double elapsed, const PhaseSpec& spec);

/// Watchdog at F between forwarding to the SAC and receiving the cloud grants.
SessionState localized_timeout_at_F(const SessionState& session, double waiting_since, double now,
                                    double limit_s = kLocalizedTimeoutS);

}  // namespace mpauth::protocol
