#pragma once

// Discrete-event driver: schedules session starts, carries protocol messages
// across the topology, enforces phase sequencing and timeouts, and records an
// event log. A run is a pure function of (scenario, seed).

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mpauth/protocol.hpp"
#include "mpauth/simnet.hpp"

namespace mpauth::simnet {

struct Stall {
  Role role = Role::SAC_DB;
  int phase_index = 1;
  double extra_delay_s = 0.0;

  friend bool operator==(const Stall&, const Stall&) = default;
};

struct SessionsPerPrincipal {
  enum class Kind {
    Fixed,
    /// Seeded shuffle of a {1, 2, 3} multiset whose mean is exactly 2.
    BalancedDraw,
  };

  Kind kind = Kind::BalancedDraw;
  int count = 2;  // Fixed only

  friend bool operator==(const SessionsPerPrincipal&, const SessionsPerPrincipal&) = default;
};

struct LinkOverride {
  Node a = Node::A;
  Node b = Node::SW1;
  std::optional<double> bandwidth_bps;
  std::optional<int> link_count;
  std::optional<double> propagation_s;

  friend bool operator==(const LinkOverride&, const LinkOverride&) = default;
};

struct Scenario {
  std::uint64_t principals = 1000;
  SessionsPerPrincipal sessions_per_principal;
  protocol::TimeoutMode timeout_mode;
  ConnectionModel connection;
  std::vector<LinkOverride> topology_overrides;
  std::vector<Stall> stalls;
  double network_offset_s = 100.0;
  double app_offset_min_s = 5.0;
  double app_offset_max_s = 10.0;
  double horizon_s = 600.0;
  std::uint64_t seed = 1;

  /// Throws Error(ValidationError) naming the offending field.
  void validate() const;
  Topology topology() const;

  friend bool operator==(const Scenario&, const Scenario&) = default;
};

/// The named role holds every phase-`phase_index` message it emits for an
/// extra `extra_delay_s`. Throws Error(InvalidInput) for a phase outside 1..13.
Scenario inject_stall(Scenario scenario, Role role, int phase_index, double extra_delay_s);

/// Per-session outcome plus phase timing (index 1..13; NaN when unset).
struct SessionRecord {
  protocol::SessionState state;
  std::uint64_t principal = 0;
  bool started = false;
  std::array<double, protocol::kPhaseCount + 1> phase_started{};
  std::array<double, protocol::kPhaseCount + 1> phase_ended{};
  std::optional<double> f_waiting_since;
  /// What role A holds once phase 13 reached it.
  std::optional<keys::HierarchicalKey> a_idsess;
  std::vector<std::string> a_granted;
};

struct EventRecord {
  double time_s = 0.0;
  std::uint64_t sequence = 0;
  std::string kind;
  std::string source;
  std::string destination;
  std::string session_id;
  int phase_index = 0;
  std::size_t payload_bytes = 0;
  std::string outcome;
};

/// The SAC's vault and session-key registry as left at the end of a run.
struct Authority {
  vault::Vault vault;
  protocol::SessionKeyRegistry registry{vault};
};

/// Clouds CloudA/CloudB (resource hosts), CloudC (requesting users' realm)
/// and CloudP (trusted principals' realm), each with one sub-domain.
void register_default_realms(vault::Vault& vault);
inline constexpr const char* kRequesterCloud = "CloudC";
inline constexpr const char* kRequesterSubdomain = "analytics";
inline constexpr const char* kPrincipalCloud = "CloudP";
inline constexpr const char* kPrincipalSubdomain = "principals";

struct RunResult {
  std::shared_ptr<const Authority> authority;
  std::vector<EventRecord> log;
  std::vector<SessionRecord> sessions;
  bool horizon_exceeded = false;
  double horizon_s = 0.0;
  double end_time_s = 0.0;
  std::uint64_t events_processed = 0;
  std::uint64_t bytes_sent = 0;
  std::uint64_t bytes_delivered = 0;
  std::uint64_t bytes_in_flight = 0;
  double max_network_delay_s = 0.0;
  std::uint64_t violations = 0;
};

/// Runs `scenario` with `seed` (overriding scenario.seed) to completion or to
/// the horizon. A horizon cut sets horizon_exceeded; partial results are kept.
RunResult run(const Scenario& scenario, std::uint64_t seed);
inline RunResult run(const Scenario& scenario) { return run(scenario, scenario.seed); }

inline constexpr const char* kEventLogHeader =
    "time_s,sequence,kind,source,destination,session_id,phase_index,payload_bytes,outcome";

/// Comma-separated, header first, one record per line.
void write_event_log(std::ostream& out, const std::vector<EventRecord>& log);
std::string event_log_text(const std::vector<EventRecord>& log);

}  // namespace mpauth::simnet
