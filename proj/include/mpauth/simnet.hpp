#pragma once

// Static network model: the switched star-of-stars topology, destination
// preferences, and the per-message delivery-time model.

#include <array>
#include <cstdint>
#include <optional>
#include <set>
#include <string_view>
#include <utility>
#include <vector>

#include "mpauth/protocol.hpp"

namespace mpauth::simnet {

using protocol::Role;

enum class Node : std::uint8_t { A, SW1, SW2, F, SAC, SAC_DB, SAC_SH, CloudA, CloudB };
inline constexpr std::size_t kNodeCount = 9;
inline constexpr std::array<Node, kNodeCount> kAllNodes = {Node::A,   Node::SW1,    Node::SW2,
                                                           Node::F,   Node::SAC,    Node::SAC_DB,
                                                           Node::SAC_SH, Node::CloudA, Node::CloudB};

std::string_view to_string(Node node);
std::optional<Node> node_from_string(std::string_view name);
Node node_for(Role role);

inline constexpr double kGigabit = 1e9;

/// `link_count` parallel links aggregated into one pipe.
struct Link {
  Node a = Node::A;
  Node b = Node::SW1;
  double bandwidth_bps = kGigabit;  // per link
  int link_count = 1;
  double propagation_s = 0.0;

  double capacity_bps() const { return bandwidth_bps * link_count; }
  bool joins(Node x, Node y) const { return (a == x && b == y) || (a == y && b == x); }
};

using RolePair = std::pair<Role, Role>;

class Topology {
 public:
  Topology(std::vector<Link> links, std::set<RolePair> allowed);

  const std::vector<Link>& links() const { return links_; }
  const std::set<RolePair>& allowed_pairs() const { return allowed_; }
  std::optional<Link> link(Node x, Node y) const;

  /// Replaces the link joining (link.a, link.b), or adds it.
  void set_link(const Link& link);

  /// Destination preference: may `initiator` open a connection to `responder`?
  /// Self-pairs are always allowed.
  bool allowed(Role initiator, Role responder) const;

  /// Static shortest-hop route, endpoints included. Empty if unreachable.
  std::vector<Node> path(Node from, Node to) const;
  /// Bottleneck aggregate capacity along the route.
  double path_capacity_bps(Node from, Node to) const;
  double path_propagation_s(Node from, Node to) const;
  bool connected() const;

 private:
  void rebuild_routes();

  std::vector<Link> links_;
  std::set<RolePair> allowed_;
  // next_hop_[from][to], -1 when unreachable
  std::array<std::array<int, kNodeCount>, kNodeCount> next_hop_{};
};

/// A behind SW1; F, SAC, SAC-DB, SAC-SH and both clouds behind SW2. The
/// A-SW1-SW2-F route is eight 1 Gbps links wide.
Topology build_default_topology();

struct ConnectionModel {
  double handshake_rtts = 1.5;
  double per_phase_service_s = 4.55;
  double rtt_base_s = 0.0;  // added to the path round trip

  void validate() const;
  friend bool operator==(const ConnectionModel&, const ConnectionModel&) = default;
};

struct DeliveryTiming {
  double handshake_s = 0.0;
  double transmission_s = 0.0;
  double propagation_s = 0.0;
  double service_s = 0.0;

  double network_s() const { return handshake_s + transmission_s + propagation_s; }
  double total_s() const { return network_s() + service_s; }
};

/// Delivery offset for one message. A request opens a connection from `from`
/// to `to` (handshake) and includes the responder's service time; a response
/// rides the requester's connection back, so only transmission and
/// propagation apply and the pair is checked in the opposite direction.
/// Throws Error(DisallowedPair).
DeliveryTiming transmit(const protocol::ProtocolMessage& msg, Role from, Role to, const ConnectionModel& model,
                        const Topology& topology);

}  // namespace mpauth::simnet
