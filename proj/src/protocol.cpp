#include "mpauth/protocol.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "mpauth/error.hpp"
#include "mpauth/hex.hpp"

namespace mpauth::protocol {

namespace {

struct Row {
  const char* name;
  Role source;
  Role destination;
  std::size_t response_bytes;
};

// Responses that carry credentials, keys or grants are 4096 bytes; bare
// acknowledgements are 1024.
constexpr std::array<Row, kPhaseCount> kRows = {{
    {"Secure (Request, R1, R2)", Role::A, Role::F, kAckBytes},
    {"Secure (Request, IDr, IDs)", Role::F, Role::A, kAckBytes},
    {"Secure (Response, IDr, IDs)", Role::A, Role::F, kCredentialBytes},
    {"Fetch (R1, R2): IF Valid (IDr, IDs)", Role::F, Role::SAC, kAckBytes},
    {"Verify (IDr, IDs)", Role::SAC, Role::SAC_DB, kAckBytes},
    {"Valid (IDr, IDs)", Role::SAC_DB, Role::SAC, kCredentialBytes},
    {"Invoke (Key, IDsess): Fetch (R1, R2)", Role::SAC, Role::SAC_SH, kCredentialBytes},
    {"Secure (Access, R1)", Role::SAC_SH, Role::CloudA, kAckBytes},
    {"Secure (Access, R1)", Role::CloudA, Role::SAC_SH, kCredentialBytes},
    {"Secure (Request, R2): IF Key (IDsess)", Role::SAC_SH, Role::CloudB, kAckBytes},
    {"Secure (Access, R2)", Role::CloudB, Role::SAC_SH, kCredentialBytes},
    {"Secure (Access, R1, R2): Key (IDsess)", Role::SAC_SH, Role::F, kCredentialBytes},
    {"Secure (Access, R1, R2): Key (IDsess)", Role::F, Role::A, kCredentialBytes},
}};

std::string format_seconds(double s) {
  std::array<char, 32> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), s);
  return std::string(buf.data(), end);
}

ProtocolMessage make_message(const SessionId& session, int phase, MessageKind kind, Payload payload) {
  const auto& spec = phase_spec(phase);
  ProtocolMessage msg;
  msg.session_id = session;
  msg.phase_index = phase;
  msg.kind = kind;
  msg.source = kind == MessageKind::Request ? spec.source : spec.destination;
  msg.destination = kind == MessageKind::Request ? spec.destination : spec.source;
  msg.payload = std::move(payload);
  msg.payload_bytes = kind == MessageKind::Request ? spec.request_bytes : spec.response_bytes;
  return msg;
}

ProtocolMessage response_to(const ProtocolMessage& request, Payload payload = {}) {
  return make_message(request.session_id, request.phase_index, MessageKind::Response, std::move(payload));
}

ProtocolMessage request_for(const SessionId& session, int phase, Payload payload) {
  return make_message(session, phase, MessageKind::Request, std::move(payload));
}

Transition discard(const std::optional<RoleSession>& state, ViolationKind kind, std::string detail) {
  Transition t;
  t.state = state;
  t.violation = Violation{kind, std::move(detail)};
  return t;
}

std::string describe(const ProtocolMessage& msg) {
  return std::string(to_string(msg.kind)) + " " + std::to_string(msg.phase_index) + " " +
         std::string(to_string(msg.source)) + ">" + std::string(to_string(msg.destination));
}

// Role-specific reaction to an in-sequence message. `t.state` already holds
// the advanced cursor.
void react(Role self, const ProtocolMessage& msg, Context& ctx, Transition& t) {
  auto& st = *t.state;
  auto& known = st.known;
  const auto& in = msg.payload;
  const int phase = msg.phase_index;
  const auto& sid = msg.session_id;

  if (msg.kind == MessageKind::Response) {
    // Final response to a phase this role sourced; nothing further to emit.
    // The last inbound message closes the role's part in the session.
    if (st.cursor == inbound_sequence(self).size()) st.closed = true;
    return;
  }

  switch (self) {
    case Role::A:
      if (phase == 2) {
        t.outgoing.push_back(response_to(msg));
        t.outgoing.push_back(request_for(sid, 3, {.requester = known.requester, .idr = known.idr, .ids = known.ids}));
      } else if (phase == 13) {
        known.idsess = in.idsess;
        known.granted = in.granted;
        t.outgoing.push_back(response_to(msg, {.idsess = in.idsess}));
        st.closed = true;
      }
      break;

    case Role::F:
      if (phase == 1) {
        known.resources = in.resources;
        known.principal = in.principal;
        t.outgoing.push_back(response_to(msg));
        t.outgoing.push_back(request_for(sid, 2, {.resources = known.resources}));
      } else if (phase == 3) {
        known.requester = in.requester;
        known.idr = in.idr;
        known.ids = in.ids;
        t.outgoing.push_back(response_to(msg));
        t.outgoing.push_back(request_for(sid, 4,
                                         {.resources = known.resources,
                                          .requester = known.requester,
                                          .principal = known.principal,
                                          .idr = known.idr,
                                          .ids = known.ids}));
      } else if (phase == 12) {
        known.idsess = in.idsess;
        known.granted = in.granted;
        t.outgoing.push_back(response_to(msg));
        t.outgoing.push_back(
            request_for(sid, 13, {.resources = known.resources, .idsess = known.idsess, .granted = known.granted}));
      }
      break;

    case Role::SAC:
      if (phase == 4) {
        known.resources = in.resources;
        known.requester = in.requester;
        known.principal = in.principal;
        known.idr = in.idr;
        known.ids = in.ids;
        t.outgoing.push_back(response_to(msg));
        t.outgoing.push_back(request_for(sid, 5, {.idr = known.idr, .ids = known.ids}));
      } else if (phase == 6) {
        t.outgoing.push_back(response_to(msg));
        if (!in.credentials_valid.value_or(false)) {
          t.drop = DropReason{DropReason::Kind::InvalidCredentials};
          st.closed = true;
          return;
        }
        auto realm = ctx.vault.resolve_membership(*known.idr, *known.ids);
        auto principal = ctx.vault.tenant(known.principal);
        if (!realm || !principal) {
          t.drop = DropReason{DropReason::Kind::UnregisteredRealm};
          st.closed = true;
          return;
        }
        std::vector<keys::Participant> participants{
            {known.principal, principal->cloud_id, principal->subdomain_id},
            {known.requester, realm->cloud_id, realm->subdomain_id},
        };
        if (known.principal == known.requester) participants.pop_back();
        keys::SessionKeySet set;
        try {
          set = ctx.keys.mint(sid, participants);
        } catch (const Error& e) {
          if (e.code() != ErrorCode::UnregisteredRealm && e.code() != ErrorCode::InvalidInput) throw;
          t.drop = DropReason{DropReason::Kind::UnregisteredRealm};
          st.closed = true;
          return;
        }
        known.idsess = set.keys.at(known.requester);
        t.notes.push_back({TraceNote::Kind::Minted, Role::SAC, known.idsess->fingerprint(), {}});
        t.minted = std::move(set);
        t.outgoing.push_back(request_for(
            sid, 7, {.resources = known.resources, .requester = known.requester, .idsess = known.idsess}));
      }
      break;

    case Role::SAC_DB:
      if (phase == 5) {
        bool valid = in.idr && in.ids && ctx.vault.verify_membership(*in.idr, *in.ids) == vault::Membership::Valid;
        t.outgoing.push_back(response_to(msg));
        t.outgoing.push_back(request_for(sid, 6, {.idr = in.idr, .ids = in.ids, .credentials_valid = valid}));
      }
      break;

    case Role::SAC_SH:
      if (phase == 7) {
        known.resources = in.resources;
        known.requester = in.requester;
        known.idsess = in.idsess;
        t.outgoing.push_back(response_to(msg));
        t.outgoing.push_back(request_for(sid, 8, {.resources = {"R1"}, .idsess = known.idsess}));
        t.notes.push_back({TraceNote::Kind::Forward, Role::CloudA, known.idsess->fingerprint(), "R1"});
      } else if (phase == 9) {
        known.granted.insert(known.granted.end(), in.granted.begin(), in.granted.end());
        t.outgoing.push_back(response_to(msg));
        t.outgoing.push_back(request_for(sid, 10, {.resources = {"R2"}, .idsess = known.idsess}));
        t.notes.push_back({TraceNote::Kind::Forward, Role::CloudB, known.idsess->fingerprint(), "R2"});
      } else if (phase == 11) {
        known.granted.insert(known.granted.end(), in.granted.begin(), in.granted.end());
        t.outgoing.push_back(response_to(msg));
        t.outgoing.push_back(request_for(
            sid, 12, {.resources = known.resources, .idsess = known.idsess, .granted = known.granted}));
      }
      break;

    case Role::CloudA:
    case Role::CloudB: {
      const auto& cloud = self == Role::CloudA ? ctx.cloud_a : ctx.cloud_b;
      const std::string resource = in.resources.empty() ? std::string{} : in.resources.front();
      const int next = phase + 1;
      known.idsess = in.idsess;
      auto decision = in.idsess ? grant_access(cloud, msg.source, *in.idsess, resource, ctx.keys)
                                : AccessDecision::Refused;
      const std::string fp = in.idsess ? in.idsess->fingerprint() : std::string{};
      t.outgoing.push_back(response_to(msg));
      if (decision == AccessDecision::Granted) {
        known.granted = {resource};
        t.notes.push_back({TraceNote::Kind::Granted, self, fp, resource});
        t.outgoing.push_back(request_for(sid, next, {.idsess = in.idsess, .granted = known.granted}));
      } else {
        t.notes.push_back({TraceNote::Kind::Refused, self, fp, resource});
        t.drop = DropReason{DropReason::Kind::AccessRefused};
        st.closed = true;
      }
      break;
    }
  }
}

}  // namespace

std::string_view to_string(Role role) {
  switch (role) {
    case Role::A: return "A";
    case Role::F: return "F";
    case Role::SAC: return "SAC";
    case Role::SAC_DB: return "SAC-DB";
    case Role::SAC_SH: return "SAC-SH";
    case Role::CloudA: return "CloudA";
    case Role::CloudB: return "CloudB";
  }
  return "?";
}

std::optional<Role> role_from_string(std::string_view name) {
  for (auto r : kAllRoles) {
    if (to_string(r) == name) return r;
  }
  if (name == "SAC_DB") return Role::SAC_DB;
  if (name == "SAC_SH") return Role::SAC_SH;
  return std::nullopt;
}

TimeoutMode TimeoutMode::parse(std::string_view text) {
  if (text == "none") return none();
  auto colon = text.find(':');
  if (colon == std::string_view::npos) throw Error(ErrorCode::ParseError, "timeout mode '" + std::string(text) + "'");
  auto head = text.substr(0, colon);
  auto tail = text.substr(colon + 1);
  double seconds = 0.0;
  auto [ptr, ec] = std::from_chars(tail.data(), tail.data() + tail.size(), seconds);
  if (ec != std::errc{} || ptr != tail.data() + tail.size() || !(seconds > 0.0) || !std::isfinite(seconds)) {
    throw Error(ErrorCode::ParseError, "timeout seconds in '" + std::string(text) + "'");
  }
  if (head == "per-phase") return per_phase(seconds);
  if (head == "localized-f") return localized_at_f(seconds);
  throw Error(ErrorCode::ParseError, "timeout mode '" + std::string(text) + "'");
}

std::string TimeoutMode::to_string() const {
  switch (kind) {
    case Kind::None: return "none";
    case Kind::PerPhase: return "per-phase:" + format_seconds(seconds);
    case Kind::LocalizedAtF: return "localized-f:" + format_seconds(seconds);
  }
  return "none";
}

std::string PhaseSpec::label() const {
  return std::string(protocol::to_string(source)) + ">" + std::string(protocol::to_string(destination)) + ": " + name;
}

std::vector<PhaseSpec> protocol_table(const TimeoutMode& mode) {
  std::vector<PhaseSpec> table;
  table.reserve(kPhaseCount);
  for (int i = 0; i < kPhaseCount; ++i) {
    const auto& row = kRows[static_cast<std::size_t>(i)];
    PhaseSpec spec;
    spec.index = i + 1;
    spec.name = row.name;
    spec.source = row.source;
    spec.destination = row.destination;
    spec.start_condition = i == 0 ? StartCondition::ApplicationStart : StartCondition::PreviousPhaseEnds;
    spec.timeout_used = mode.kind == TimeoutMode::Kind::PerPhase;
    spec.timeout_s = spec.timeout_used ? mode.seconds : 0.0;
    spec.request_bytes = kRequestBytes;
    spec.response_bytes = row.response_bytes;
    table.push_back(std::move(spec));
  }
  return table;
}

const PhaseSpec& phase_spec(int index) {
  static const auto kTable = protocol_table();
  if (index < 1 || index > kPhaseCount) {
    throw Error(ErrorCode::InvalidInput, "phase index " + std::to_string(index) + " outside 1..13");
  }
  return kTable[static_cast<std::size_t>(index - 1)];
}

std::string to_hex(const SessionId& id) { return mpauth::to_hex(id); }

std::string_view to_string(MessageKind kind) { return kind == MessageKind::Request ? "request" : "response"; }

std::string serialize(const ProtocolMessage& msg) {
  std::ostringstream out;
  out << to_hex(msg.session_id) << '|' << msg.phase_index << '|' << to_string(msg.kind) << '|'
      << to_string(msg.source) << '>' << to_string(msg.destination) << '|' << msg.payload_bytes << '|';
  const auto& p = msg.payload;
  out << "resources=";
  for (std::size_t i = 0; i < p.resources.size(); ++i) out << (i ? "," : "") << p.resources[i];
  out << ";requester=" << p.requester << ";principal=" << p.principal;
  out << ";idr=" << (p.idr ? p.idr->hex() : "-") << ";ids=" << (p.ids ? p.ids->hex() : "-");
  out << ";valid=" << (p.credentials_valid ? (*p.credentials_valid ? "1" : "0") : "-");
  out << ";idsess=" << (p.idsess ? p.idsess->hex() : "-") << ";granted=";
  for (std::size_t i = 0; i < p.granted.size(); ++i) out << (i ? "," : "") << p.granted[i];
  return out.str();
}

std::string DropReason::to_string() const {
  switch (kind) {
    case Kind::PhaseTimeout: return "PhaseTimeout(" + std::to_string(phase) + ")";
    case Kind::LocalizedTimeout: return "LocalizedTimeout";
    case Kind::InvalidCredentials: return "InvalidCredentials";
    case Kind::AccessRefused: return "AccessRefused";
    case Kind::UnregisteredRealm: return "UnregisteredRealm";
  }
  return "?";
}

std::string_view to_string(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::UnknownSession: return "UnknownSession";
    case ViolationKind::OutOfOrderPhase: return "OutOfOrderPhase";
    case ViolationKind::NotForwardedByPrincipal: return "NotForwardedByPrincipal";
    case ViolationKind::UnexpectedSource: return "UnexpectedSource";
    case ViolationKind::Misaddressed: return "Misaddressed";
    case ViolationKind::PhaseSkip: return "PhaseSkip";
    case ViolationKind::SessionClosed: return "SessionClosed";
  }
  return "?";
}

std::string_view to_string(TraceNote::Kind kind) {
  switch (kind) {
    case TraceNote::Kind::Forward: return "forward";
    case TraceNote::Kind::Granted: return "granted";
    case TraceNote::Kind::Refused: return "refused";
    case TraceNote::Kind::Minted: return "minted";
  }
  return "?";
}

std::string_view to_string(Status status) {
  switch (status) {
    case Status::InProgress: return "InProgress";
    case Status::Completed: return "Completed";
    case Status::Dropped: return "Dropped";
  }
  return "?";
}

keys::SessionKeySet SessionKeyRegistry::mint(const SessionId& session,
                                             const std::vector<keys::Participant>& participants) {
  auto set = keys::mint_session_keys(session, participants, directory_);
  std::lock_guard lock(mutex_);
  sets_.insert_or_assign(session, set);
  return set;
}

keys::SessionKeySet SessionKeyRegistry::refresh(const SessionId& session,
                                                const std::vector<keys::Participant>& participants) {
  std::unique_lock lock(mutex_);
  auto it = sets_.find(session);
  if (it == sets_.end()) throw Error(ErrorCode::InvalidInput, "no session key set for " + to_hex(session));
  auto current = it->second;
  lock.unlock();
  auto next = keys::refresh_session(current, participants, directory_);
  lock.lock();
  sets_.insert_or_assign(session, next);
  return next;
}

std::optional<keys::SessionKeySet> SessionKeyRegistry::current(const SessionId& session) const {
  std::lock_guard lock(mutex_);
  auto it = sets_.find(session);
  if (it == sets_.end()) return std::nullopt;
  return it->second;
}

CloudState default_cloud_state(Role cloud) {
  if (cloud == Role::CloudA) return {Role::CloudA, {"R1"}};
  if (cloud == Role::CloudB) return {Role::CloudB, {"R2"}};
  throw Error(ErrorCode::InvalidInput, std::string(to_string(cloud)) + " is not a resource cloud");
}

AccessDecision grant_access(const CloudState& cloud, Role presenter, const keys::HierarchicalKey& idsess,
                            std::string_view resource, const SessionKeyRegistry& registry) {
  if (presenter != Role::SAC_SH) return AccessDecision::Refused;
  if (!cloud.resources.contains(resource)) return AccessDecision::Refused;
  auto session = idsess.session_field();
  if (!session) return AccessDecision::Refused;
  auto set = registry.current(*session);
  if (!set || !keys::verify_session_key(idsess, *set)) return AccessDecision::Refused;
  return AccessDecision::Granted;
}

Transition open_session(const SessionId& session, const Requester& requester, const std::string& principal,
                        const std::vector<std::string>& resources) {
  Transition t;
  RoleSession st;
  st.role = Role::A;
  st.session_id = session;
  st.known.resources = resources;
  st.known.requester = requester.identity;
  st.known.principal = principal;
  st.known.idr = requester.idr;
  st.known.ids = requester.ids;
  t.outgoing.push_back(request_for(session, 1, {.resources = resources, .principal = principal}));
  t.state = std::move(st);
  return t;
}

std::vector<std::pair<int, MessageKind>> inbound_sequence(Role role) {
  std::vector<std::pair<int, MessageKind>> seq;
  for (int i = 1; i <= kPhaseCount; ++i) {
    const auto& spec = phase_spec(i);
    if (spec.destination == role) seq.emplace_back(i, MessageKind::Request);
    if (spec.source == role) seq.emplace_back(i, MessageKind::Response);
  }
  return seq;
}

Transition handle_message(Role self, const std::optional<RoleSession>& state, const ProtocolMessage& msg,
                          Context& ctx) {
  if (msg.destination != self) {
    return discard(state, ViolationKind::Misaddressed, describe(msg) + " delivered to " + std::string(to_string(self)));
  }
  if (msg.phase_index < 1 || msg.phase_index > kPhaseCount) {
    return discard(state, ViolationKind::OutOfOrderPhase, describe(msg));
  }

  const auto expected = inbound_sequence(self);
  const auto& spec = phase_spec(msg.phase_index);
  const bool is_entry = !expected.empty() && expected.front() == std::pair{msg.phase_index, msg.kind};

  // The SAC only entertains session requests forwarded by the principal's front-end.
  if (self == Role::SAC && msg.kind == MessageKind::Request && msg.phase_index == 4 && msg.source != Role::F) {
    return discard(state, ViolationKind::NotForwardedByPrincipal,
                   "phase-4 request from " + std::string(to_string(msg.source)));
  }

  if (!state) {
    if (!is_entry || msg.kind != MessageKind::Request) {
      return discard(state, ViolationKind::UnknownSession, describe(msg) + " for unknown session " + to_hex(msg.session_id));
    }
  } else {
    if (state->session_id != msg.session_id) {
      return discard(state, ViolationKind::UnknownSession, describe(msg) + " does not belong to " + to_hex(state->session_id));
    }
    if (state->closed) return discard(state, ViolationKind::SessionClosed, describe(msg));
    if (state->cursor >= expected.size() || expected[state->cursor] != std::pair{msg.phase_index, msg.kind}) {
      return discard(state, ViolationKind::OutOfOrderPhase, describe(msg));
    }
  }

  // Clouds judge the presenter themselves (grant_access); everyone else
  // discards requests from a role other than the phase's source.
  const bool cloud = self == Role::CloudA || self == Role::CloudB;
  const Role expected_peer = msg.kind == MessageKind::Request ? spec.source : spec.destination;
  if (!cloud && msg.source != expected_peer) {
    return discard(state, ViolationKind::UnexpectedSource, describe(msg));
  }

  Transition t;
  if (state) {
    t.state = state;
  } else {
    RoleSession fresh;
    fresh.role = self;
    fresh.session_id = msg.session_id;
    t.state = std::move(fresh);
  }
  ++t.state->cursor;
  react(self, msg, ctx, t);
  return t;
}

PhaseAdvance advance_phase(const SessionState& session, const ProtocolMessage& final_response) {
  if (session.status != Status::InProgress) {
    return {session, Violation{ViolationKind::SessionClosed, "session is " + std::string(to_string(session.status))}};
  }
  const int expected = session.current_phase + 1;
  if (final_response.kind != MessageKind::Response || final_response.phase_index != expected ||
      final_response.session_id != session.session_id) {
    return {session, Violation{ViolationKind::PhaseSkip, "expected response " + std::to_string(expected) + ", got " +
                                                             describe(final_response)}};
  }
  SessionState next = session;
  next.current_phase = expected;
  if (expected == kPhaseCount) {
    if (!next.idsess) {
      return {session, Violation{ViolationKind::PhaseSkip, "phase 13 completed without a session key"}};
    }
    next.status = Status::Completed;
  }
  return {std::move(next), std::nullopt};
}

SessionState on_timeout(const SessionState& session, int phase_index, double elapsed, const PhaseSpec& spec) {
  if (session.status != Status::InProgress || !spec.timeout_used) return session;
  if (phase_index != session.current_phase + 1) return session;  // that phase already finished
  if (!(elapsed > spec.timeout_s)) return session;
  SessionState next = session;
  next.status = Status::Dropped;
  next.drop_reason = DropReason{DropReason::Kind::PhaseTimeout, phase_index};
  return next;
}

SessionState localized_timeout_at_F(const SessionState& session, double waiting_since, double now, double limit_s) {
  if (session.status != Status::InProgress) return session;
  if (session.current_phase < 4 || session.current_phase >= 12) return session;
  if (!(now - waiting_since > limit_s)) return session;
  SessionState next = session;
  next.status = Status::Dropped;
  next.drop_reason = DropReason{DropReason::Kind::LocalizedTimeout};
  return next;
}

}  // namespace mpauth::protocol
