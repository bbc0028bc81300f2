#include "mpauth/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <queue>
#include <random>
#include <sstream>

#include "mpauth/digest.hpp"
#include "mpauth/error.hpp"
#include "mpauth/hex.hpp"

namespace mpauth::simnet {

using protocol::DropReason;
using protocol::MessageKind;
using protocol::ProtocolMessage;
using protocol::Status;

namespace {

// Timers fire just after their limit so "elapsed > limit" holds at the fire time.
constexpr double kTimerSlack = 1e-9;

std::size_t idx(Role r) { return static_cast<std::size_t>(r); }

/// mt19937_64 with explicit, library-independent mappings to doubles and ranges.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x = engine_();
    while (x >= limit) x = engine_();
    return x % n;
  }

 private:
  std::mt19937_64 engine_;
};

std::vector<int> sessions_per_principal(const Scenario& sc, Rng& rng) {
  const auto n = static_cast<std::size_t>(sc.principals);
  if (sc.sessions_per_principal.kind == SessionsPerPrincipal::Kind::Fixed) {
    return std::vector<int>(n, sc.sessions_per_principal.count);
  }
  std::vector<int> counts(n, 2);
  const std::size_t pairs = n / 4;
  std::fill_n(counts.begin(), pairs, 1);
  std::fill_n(counts.begin() + static_cast<std::ptrdiff_t>(pairs), pairs, 3);
  for (std::size_t i = n; i > 1; --i) std::swap(counts[i - 1], counts[rng.below(i)]);
  return counts;
}

protocol::SessionId session_id_for(std::uint64_t seed, std::uint64_t index) {
  Sha256 h;
  h.update(as_bytes("mpauth/session-id"));
  h.update_u32(static_cast<std::uint32_t>(seed >> 32)).update_u32(static_cast<std::uint32_t>(seed));
  h.update_u32(static_cast<std::uint32_t>(index >> 32)).update_u32(static_cast<std::uint32_t>(index));
  auto d = h.finish();
  protocol::SessionId id{};
  std::copy_n(d.begin(), id.size(), id.begin());
  return id;
}

Bytes master_secret_for(std::string_view cloud) {
  Sha256 h;
  h.update(as_bytes("mpauth/master-secret")).update(as_bytes(cloud));
  auto d = h.finish();
  return {d.begin(), d.end()};
}

vault::Fields personal_secrets_for(const std::string& tenant) {
  return {{"favourite_colour", "colour-of-" + tenant}, {"first_school", "school-of-" + tenant}};
}

enum class EventKind { AppStart, SessionStart, Deliver, PhaseTimerFire };
enum class TimerKind { PerPhase, LocalizedAtF };

struct SimEvent {
  double time = 0.0;
  std::uint64_t sequence = 0;
  EventKind kind = EventKind::AppStart;
  Node target = Node::A;
  std::size_t session = 0;
  std::uint64_t principal = 0;
  std::optional<ProtocolMessage> msg;
  TimerKind timer = TimerKind::PerPhase;
  int phase = 0;
  double armed_at = 0.0;
};

struct Later {
  bool operator()(const SimEvent& x, const SimEvent& y) const {
    if (x.time != y.time) return x.time > y.time;
    return x.sequence > y.sequence;
  }
};

struct Runtime {
  SessionRecord rec;
  std::array<std::optional<protocol::RoleSession>, protocol::kAllRoles.size()> roles;
  std::optional<ProtocolMessage> gated;
  bool f_has_grants = false;
  std::string sid_hex;
};

std::string format_time(double t) {
  std::array<char, 64> buf{};
  std::snprintf(buf.data(), buf.size(), "%.9f", t);
  return buf.data();
}

class Simulator {
 public:
  Simulator(const Scenario& scenario, std::uint64_t seed)
      : sc_(scenario),
        topo_(scenario.topology()),
        table_(protocol::protocol_table(scenario.timeout_mode)),
        authority_(std::make_shared<Authority>()),
        ctx_{authority_->vault, authority_->registry} {
    register_default_realms(authority_->vault);
    populate(seed);
  }

  RunResult run() {
    result_.horizon_s = sc_.horizon_s;
    while (!queue_.empty()) {
      if (queue_.top().time > sc_.horizon_s) break;
      SimEvent ev = queue_.top();
      queue_.pop();
      now_ = ev.time;
      current_seq_ = ev.sequence;
      ++result_.events_processed;
      switch (ev.kind) {
        case EventKind::AppStart: on_app_start(ev); break;
        case EventKind::SessionStart: on_session_start(ev); break;
        case EventKind::Deliver: on_deliver(ev); break;
        case EventKind::PhaseTimerFire: on_timer(ev); break;
      }
    }
    while (!queue_.empty()) {
      if (queue_.top().kind == EventKind::Deliver) result_.bytes_in_flight += queue_.top().msg->payload_bytes;
      queue_.pop();
    }
    // Leftovers addressed to finished sessions do not make the run partial.
    result_.horizon_exceeded = std::any_of(sessions_.begin(), sessions_.end(), [](const Runtime& rt) {
      return !rt.rec.started || rt.rec.state.status == Status::InProgress;
    });
    result_.end_time_s = result_.horizon_exceeded ? sc_.horizon_s : now_;
    result_.sessions.reserve(sessions_.size());
    for (auto& rt : sessions_) result_.sessions.push_back(std::move(rt.rec));
    result_.authority = authority_;
    return std::move(result_);
  }

 private:
  void populate(std::uint64_t seed) {
    Rng rng(seed);
    auto counts = sessions_per_principal(sc_, rng);
    const double span = sc_.app_offset_max_s - sc_.app_offset_min_s;
    auto& vault = authority_->vault;
    std::uint64_t index = 0;
    for (std::uint64_t p = 0; p < sc_.principals; ++p) {
      const std::string principal = "principal-" + std::to_string(p);
      vault.register_tenant(kPrincipalCloud, kPrincipalSubdomain, principal, {{"role", "trusted-principal"}},
                            personal_secrets_for(principal));
      SimEvent app;
      app.kind = EventKind::AppStart;
      app.time = sc_.network_offset_s;
      app.principal = p;
      schedule(std::move(app));

      for (int j = 0; j < counts[p]; ++j, ++index) {
        const std::string user = "user-" + std::to_string(p) + "-" + std::to_string(j);
        auto creds = vault.register_tenant(kRequesterCloud, kRequesterSubdomain, user, {{"role", "requester"}},
                                           personal_secrets_for(user));
        Runtime rt;
        rt.rec.principal = p;
        rt.rec.phase_started.fill(std::numeric_limits<double>::quiet_NaN());
        rt.rec.phase_ended.fill(std::numeric_limits<double>::quiet_NaN());
        auto& st = rt.rec.state;
        st.session_id = session_id_for(seed, index);
        st.requester = {user, creds.idr, creds.ids};
        st.principal = principal;
        rt.sid_hex = protocol::to_hex(st.session_id);
        sessions_.push_back(std::move(rt));

        SimEvent start;
        start.kind = EventKind::SessionStart;
        start.time = sc_.network_offset_s + sc_.app_offset_min_s + rng.uniform01() * span;
        start.session = sessions_.size() - 1;
        schedule(std::move(start));
      }
    }
  }

  void schedule(SimEvent ev) {
    ev.sequence = next_seq_++;
    queue_.push(std::move(ev));
  }

  void log(std::string kind, std::string_view src, std::string_view dst, const Runtime* rt, int phase,
           std::size_t bytes, std::string outcome) {
    std::replace(outcome.begin(), outcome.end(), ',', ';');
    result_.log.push_back({now_, current_seq_, std::move(kind), std::string(src), std::string(dst),
                           rt ? rt->sid_hex : std::string{}, phase, bytes, std::move(outcome)});
  }

  void on_app_start(const SimEvent& ev) {
    log("app_start", "A", "A", nullptr, 0, 0, "principal-" + std::to_string(ev.principal));
  }

  void on_session_start(const SimEvent& ev) {
    auto& rt = sessions_[ev.session];
    auto& st = rt.rec.state;
    rt.rec.started = true;
    st.started_at = now_;
    log("session_start", "A", "A", &rt, 0, 0, st.requester.identity);
    auto t = protocol::open_session(st.session_id, st.requester, st.principal,
                                    {st.resources.begin(), st.resources.end()});
    rt.roles[idx(Role::A)] = std::move(t.state);
    dispatch(rt, t.outgoing);
  }

  void on_deliver(const SimEvent& ev) {
    auto& rt = sessions_[ev.session];
    const ProtocolMessage& msg = *ev.msg;
    const auto src = protocol::to_string(msg.source);
    const auto dst = protocol::to_string(msg.destination);
    result_.bytes_delivered += msg.payload_bytes;
    log("deliver", src, dst, &rt, msg.phase_index, msg.payload_bytes, std::string(protocol::to_string(msg.kind)));

    auto& st = rt.rec.state;
    if (st.status != Status::InProgress) {
      log("discard", src, dst, &rt, msg.phase_index, 0, "absorbed:" + std::string(protocol::to_string(st.status)));
      return;
    }

    if (msg.kind == MessageKind::Response) {
      auto adv = protocol::advance_phase(st, msg);
      if (adv.violation) {
        ++result_.violations;
        log("discard", src, dst, &rt, msg.phase_index, 0, std::string(protocol::to_string(adv.violation->kind)));
        return;
      }
      st = std::move(adv.session);
      const int k = msg.phase_index;
      rt.rec.phase_ended[static_cast<std::size_t>(k)] = now_;
      log("phase_complete", src, dst, &rt, k, 0, "ok");
      if (st.status == Status::Completed) {
        st.ended_at = now_;
        log("session_complete", "A", "A", &rt, k, 0, "Completed");
      } else {
        if (k == 4 && sc_.timeout_mode.kind == protocol::TimeoutMode::Kind::LocalizedAtF) {
          rt.rec.f_waiting_since = now_;
          SimEvent timer;
          timer.kind = EventKind::PhaseTimerFire;
          timer.timer = TimerKind::LocalizedAtF;
          timer.time = now_ + sc_.timeout_mode.seconds + kTimerSlack;
          timer.target = Node::F;
          timer.session = ev.session;
          timer.armed_at = now_;
          schedule(std::move(timer));
        }
        if (rt.gated && rt.gated->phase_index == k + 1) {
          auto next = std::move(*rt.gated);
          rt.gated.reset();
          start_phase(rt, ev.session, next);
        }
      }
    }

    const Role self = msg.destination;
    auto t = protocol::handle_message(self, rt.roles[idx(self)], msg, ctx_);
    if (t.violation) {
      ++result_.violations;
      log("discard", src, dst, &rt, msg.phase_index, 0,
          std::string(protocol::to_string(t.violation->kind)) + ":" + t.violation->detail);
      return;
    }
    rt.roles[idx(self)] = t.state;
    if (t.minted) st.idsess = std::move(t.minted);
    for (const auto& note : t.notes) {
      const auto kind = std::string(protocol::to_string(note.kind));
      const auto peer = note.kind == protocol::TraceNote::Kind::Minted ? dst : protocol::to_string(note.cloud);
      log(kind, dst, peer, &rt, msg.phase_index, 0, "key=" + note.key_fingerprint + " resource=" + note.resource);
    }
    if (msg.kind == MessageKind::Request) {
      if (self == Role::F && msg.phase_index == 12) rt.f_has_grants = true;
      if (self == Role::A && msg.phase_index == protocol::kPhaseCount) {
        rt.rec.a_idsess = t.state->known.idsess;
        rt.rec.a_granted = t.state->known.granted;
      }
    }
    if (t.drop) drop(rt, *t.drop, self, msg.phase_index);
    dispatch(rt, t.outgoing, ev.session);
  }

  void on_timer(const SimEvent& ev) {
    if (stale(ev)) return;
    auto& rt = sessions_[ev.session];
    auto& st = rt.rec.state;
    protocol::SessionState next;
    Role where = Role::F;
    int phase = ev.phase;
    if (ev.timer == TimerKind::PerPhase) {
      const auto& spec = table_[static_cast<std::size_t>(ev.phase - 1)];
      next = protocol::on_timeout(st, ev.phase, now_ - ev.armed_at, spec);
      where = spec.source;
    } else {
      next = protocol::localized_timeout_at_F(st, ev.armed_at, now_, sc_.timeout_mode.seconds);
      phase = st.current_phase + 1;
    }
    if (next.status == Status::Dropped) drop(rt, *next.drop_reason, where, phase);
  }

  bool stale(const SimEvent& ev) const {
    const auto& rt = sessions_[ev.session];
    if (rt.rec.state.status != Status::InProgress) return true;
    if (ev.timer == TimerKind::PerPhase) return rt.rec.state.current_phase >= ev.phase;
    return rt.f_has_grants;
  }

  void drop(Runtime& rt, const DropReason& reason, Role where, int phase) {
    auto& st = rt.rec.state;
    if (st.status != Status::InProgress) return;
    st.status = Status::Dropped;
    st.drop_reason = reason;
    st.ended_at = now_;
    rt.gated.reset();
    const auto w = protocol::to_string(where);
    log("drop", w, w, &rt, phase, 0, reason.to_string());
  }

  void dispatch(Runtime& rt, const std::vector<ProtocolMessage>& outgoing, std::optional<std::size_t> session = {}) {
    const std::size_t s = session ? *session : static_cast<std::size_t>(&rt - sessions_.data());
    for (const auto& msg : outgoing) {
      if (msg.kind == MessageKind::Response) {
        send(rt, s, msg);
      } else if (rt.rec.state.status == Status::InProgress && msg.phase_index == rt.rec.state.current_phase + 1) {
        start_phase(rt, s, msg);
      } else if (rt.rec.state.status == Status::InProgress) {
        rt.gated = msg;
      }
    }
  }

  void start_phase(Runtime& rt, std::size_t session, const ProtocolMessage& request) {
    const int k = request.phase_index;
    rt.rec.phase_started[static_cast<std::size_t>(k)] = now_;
    send(rt, session, request);
    const auto& spec = table_[static_cast<std::size_t>(k - 1)];
    if (spec.timeout_used) {
      SimEvent timer;
      timer.kind = EventKind::PhaseTimerFire;
      timer.timer = TimerKind::PerPhase;
      timer.time = now_ + spec.timeout_s + kTimerSlack;
      timer.target = node_for(spec.source);
      timer.session = session;
      timer.phase = k;
      timer.armed_at = now_;
      schedule(std::move(timer));
    }
  }

  double stall_for(Role role, int phase) const {
    double extra = 0.0;
    for (const auto& s : sc_.stalls) {
      if (s.role == role && s.phase_index == phase) extra += s.extra_delay_s;
    }
    return extra;
  }

  void send(Runtime& rt, std::size_t session, const ProtocolMessage& msg) {
    const auto src = protocol::to_string(msg.source);
    const auto dst = protocol::to_string(msg.destination);
    DeliveryTiming timing;
    try {
      timing = transmit(msg, msg.source, msg.destination, sc_.connection, topo_);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DisallowedPair) throw;
      log("blocked", src, dst, &rt, msg.phase_index, 0, "DisallowedPair");
      return;
    }
    const double extra = stall_for(msg.source, msg.phase_index);
    result_.bytes_sent += msg.payload_bytes;
    result_.max_network_delay_s = std::max(result_.max_network_delay_s, timing.network_s());
    log("send", src, dst, &rt, msg.phase_index, msg.payload_bytes,
        std::string(protocol::to_string(msg.kind)) + (extra > 0.0 ? " held=" + format_time(extra) : std::string{}));

    SimEvent ev;
    ev.kind = EventKind::Deliver;
    ev.time = now_ + extra + timing.total_s();
    ev.target = node_for(msg.destination);
    ev.session = session;
    ev.msg = msg;
    schedule(std::move(ev));
  }

  Scenario sc_;
  Topology topo_;
  std::vector<protocol::PhaseSpec> table_;
  std::shared_ptr<Authority> authority_;
  protocol::Context ctx_;
  std::vector<Runtime> sessions_;
  std::priority_queue<SimEvent, std::vector<SimEvent>, Later> queue_;
  std::uint64_t next_seq_ = 0;
  std::uint64_t current_seq_ = 0;
  double now_ = 0.0;
  RunResult result_;
};

}  // namespace

void register_default_realms(vault::Vault& vault) {
  const std::array<std::pair<const char*, const char*>, 4> realms = {{
      {"CloudA", "bi-a"},
      {"CloudB", "bi-b"},
      {kRequesterCloud, kRequesterSubdomain},
      {kPrincipalCloud, kPrincipalSubdomain},
  }};
  for (const auto& [cloud, sub] : realms) {
    vault.register_cloud(cloud, master_secret_for(cloud));
    vault.register_subdomain(cloud, sub);
  }
}

void Scenario::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw Error(ErrorCode::ValidationError, field + ": " + why);
  };
  if (principals == 0) fail("principals", "must be positive");
  if (sessions_per_principal.kind == SessionsPerPrincipal::Kind::Fixed && sessions_per_principal.count <= 0) {
    fail("sessions_per_principal", "must be positive");
  }
  if (timeout_mode.kind != protocol::TimeoutMode::Kind::None &&
      !(timeout_mode.seconds > 0.0 && std::isfinite(timeout_mode.seconds))) {
    fail("timeout_mode", "seconds must be positive");
  }
  connection.validate();
  if (!(network_offset_s >= 0.0) || !std::isfinite(network_offset_s)) fail("network_offset_s", "must be >= 0");
  if (!(app_offset_min_s >= 0.0) || !(app_offset_max_s >= app_offset_min_s) || !std::isfinite(app_offset_max_s)) {
    fail("app_offset_s", "need 0 <= min <= max");
  }
  if (!(horizon_s > network_offset_s) || !std::isfinite(horizon_s)) {
    fail("horizon_s", "must exceed network_offset_s");
  }
  for (const auto& s : stalls) {
    if (s.phase_index < 1 || s.phase_index > protocol::kPhaseCount) fail("stalls.phase", "must be in 1..13");
    if (!(s.extra_delay_s >= 0.0)) fail("stalls.extra_delay_s", "must be >= 0");
  }
  for (const auto& o : topology_overrides) {
    if (o.bandwidth_bps && !(*o.bandwidth_bps > 0.0)) fail("topology.bandwidth_bps", "must be positive");
    if (o.link_count && *o.link_count <= 0) fail("topology.link_count", "must be positive");
    if (o.propagation_s && !(*o.propagation_s >= 0.0)) fail("topology.propagation_s", "must be >= 0");
  }
}

Topology Scenario::topology() const {
  auto topo = build_default_topology();
  for (const auto& o : topology_overrides) {
    Link l = topo.link(o.a, o.b).value_or(Link{o.a, o.b, kGigabit, 1, 0.0});
    if (o.bandwidth_bps) l.bandwidth_bps = *o.bandwidth_bps;
    if (o.link_count) l.link_count = *o.link_count;
    if (o.propagation_s) l.propagation_s = *o.propagation_s;
    topo.set_link(l);
  }
  return topo;
}

Scenario inject_stall(Scenario scenario, Role role, int phase_index, double extra_delay_s) {
  if (phase_index < 1 || phase_index > protocol::kPhaseCount) {
    throw Error(ErrorCode::InvalidInput, "stall phase " + std::to_string(phase_index) + " outside 1..13");
  }
  scenario.stalls.push_back({role, phase_index, extra_delay_s});
  return scenario;
}

RunResult run(const Scenario& scenario, std::uint64_t seed) {
  scenario.validate();
  Scenario sc = scenario;
  sc.seed = seed;
  return Simulator(sc, seed).run();
}

void write_event_log(std::ostream& out, const std::vector<EventRecord>& log) {
  out << kEventLogHeader << '\n';
  for (const auto& r : log) {
    out << format_time(r.time_s) << ',' << r.sequence << ',' << r.kind << ',' << r.source << ',' << r.destination
        << ',' << r.session_id << ',' << r.phase_index << ',' << r.payload_bytes << ',' << r.outcome << '\n';
  }
}

std::string event_log_text(const std::vector<EventRecord>& log) {
  std::ostringstream out;
  write_event_log(out, log);
  return out.str();
}

}  // namespace mpauth::simnet
