#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include "mpauth/error.hpp"
#include "mpauth/simnet.hpp"

namespace mpauth::simnet {

namespace {

std::size_t idx(Node n) { return static_cast<std::size_t>(n); }

}  // namespace

std::string_view to_string(Node node) {
  switch (node) {
    case Node::A: return "A";
    case Node::SW1: return "SW1";
    case Node::SW2: return "SW2";
    case Node::F: return "F";
    case Node::SAC: return "SAC";
    case Node::SAC_DB: return "SAC-DB";
    case Node::SAC_SH: return "SAC-SH";
    case Node::CloudA: return "CloudA";
    case Node::CloudB: return "CloudB";
  }
  return "?";
}

std::optional<Node> node_from_string(std::string_view name) {
  for (auto n : kAllNodes) {
    if (to_string(n) == name) return n;
  }
  if (name == "SAC_DB") return Node::SAC_DB;
  if (name == "SAC_SH") return Node::SAC_SH;
  return std::nullopt;
}

Node node_for(Role role) {
  switch (role) {
    case Role::A: return Node::A;
    case Role::F: return Node::F;
    case Role::SAC: return Node::SAC;
    case Role::SAC_DB: return Node::SAC_DB;
    case Role::SAC_SH: return Node::SAC_SH;
    case Role::CloudA: return Node::CloudA;
    case Role::CloudB: return Node::CloudB;
  }
  return Node::A;
}

Topology::Topology(std::vector<Link> links, std::set<RolePair> allowed)
    : links_(std::move(links)), allowed_(std::move(allowed)) {
  rebuild_routes();
}

std::optional<Link> Topology::link(Node x, Node y) const {
  auto it = std::find_if(links_.begin(), links_.end(), [&](const Link& l) { return l.joins(x, y); });
  if (it == links_.end()) return std::nullopt;
  return *it;
}

void Topology::set_link(const Link& link) {
  auto it = std::find_if(links_.begin(), links_.end(), [&](const Link& l) { return l.joins(link.a, link.b); });
  if (it == links_.end()) {
    links_.push_back(link);
  } else {
    *it = link;
  }
  rebuild_routes();
}

bool Topology::allowed(Role initiator, Role responder) const {
  return initiator == responder || allowed_.contains({initiator, responder});
}

void Topology::rebuild_routes() {
  // BFS from each destination; neighbours visited in node order so equal-length
  // routes resolve the same way every time.
  for (auto& row : next_hop_) row.fill(-1);
  std::array<std::vector<Node>, kNodeCount> adj;
  for (const auto& l : links_) {
    adj[idx(l.a)].push_back(l.b);
    adj[idx(l.b)].push_back(l.a);
  }
  for (auto& a : adj) std::sort(a.begin(), a.end());

  for (auto dst : kAllNodes) {
    std::array<bool, kNodeCount> seen{};
    std::deque<Node> queue{dst};
    seen[idx(dst)] = true;
    next_hop_[idx(dst)][idx(dst)] = static_cast<int>(dst);
    while (!queue.empty()) {
      Node cur = queue.front();
      queue.pop_front();
      for (Node nb : adj[idx(cur)]) {
        if (seen[idx(nb)]) continue;
        seen[idx(nb)] = true;
        next_hop_[idx(nb)][idx(dst)] = static_cast<int>(cur);
        queue.push_back(nb);
      }
    }
  }
}

std::vector<Node> Topology::path(Node from, Node to) const {
  std::vector<Node> out{from};
  Node cur = from;
  while (cur != to) {
    int next = next_hop_[idx(cur)][idx(to)];
    if (next < 0) return {};
    cur = static_cast<Node>(next);
    out.push_back(cur);
  }
  return out;
}

double Topology::path_capacity_bps(Node from, Node to) const {
  auto p = path(from, to);
  if (p.empty()) return 0.0;
  double cap = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < p.size(); ++i) cap = std::min(cap, link(p[i - 1], p[i])->capacity_bps());
  return cap;
}

double Topology::path_propagation_s(Node from, Node to) const {
  auto p = path(from, to);
  double total = 0.0;
  for (std::size_t i = 1; i < p.size(); ++i) total += link(p[i - 1], p[i])->propagation_s;
  return total;
}

bool Topology::connected() const {
  for (auto x : kAllNodes) {
    for (auto y : kAllNodes) {
      if (path(x, y).empty()) return false;
    }
  }
  return true;
}

Topology build_default_topology() {
  // Access link from the principals' Internet cloud carries the bulk of the
  // propagation delay; the data-centre links are short.
  std::vector<Link> links = {
      {Node::A, Node::SW1, kGigabit, 8, 0.010},
      {Node::SW1, Node::SW2, kGigabit, 8, 0.0005},
      {Node::SW2, Node::F, kGigabit, 8, 0.0001},
      {Node::SW2, Node::SAC, kGigabit, 2, 0.0001},
      {Node::SW2, Node::SAC_DB, kGigabit, 2, 0.0001},
      {Node::SW2, Node::SAC_SH, kGigabit, 2, 0.0001},
      {Node::SW2, Node::CloudA, kGigabit, 4, 0.0001},
      {Node::SW2, Node::CloudB, kGigabit, 4, 0.0001},
  };
  // Who may open a connection to whom, following the phase table.
  std::set<RolePair> allowed = {
      {Role::A, Role::F},           {Role::F, Role::A},           {Role::F, Role::SAC},
      {Role::SAC, Role::SAC_DB},    {Role::SAC_DB, Role::SAC},    {Role::SAC, Role::SAC_SH},
      {Role::SAC_SH, Role::CloudA}, {Role::CloudA, Role::SAC_SH}, {Role::SAC_SH, Role::CloudB},
      {Role::CloudB, Role::SAC_SH}, {Role::SAC_SH, Role::F},
  };
  return Topology(std::move(links), std::move(allowed));
}

void ConnectionModel::validate() const {
  auto ok = [](double v) { return std::isfinite(v) && v >= 0.0; };
  if (!ok(handshake_rtts)) throw Error(ErrorCode::ValidationError, "connection.handshake_rtts must be >= 0");
  if (!ok(per_phase_service_s)) throw Error(ErrorCode::ValidationError, "connection.per_phase_service_s must be >= 0");
  if (!ok(rtt_base_s)) throw Error(ErrorCode::ValidationError, "connection.rtt_base_s must be >= 0");
}

DeliveryTiming transmit(const protocol::ProtocolMessage& msg, Role from, Role to, const ConnectionModel& model,
                        const Topology& topology) {
  const bool request = msg.kind == protocol::MessageKind::Request;
  const Role initiator = request ? from : to;
  const Role responder = request ? to : from;
  if (!topology.allowed(initiator, responder)) {
    throw Error(ErrorCode::DisallowedPair, std::string(protocol::to_string(initiator)) + " may not connect to " +
                                               std::string(protocol::to_string(responder)));
  }
  const Node src = node_for(from);
  const Node dst = node_for(to);
  DeliveryTiming t;
  t.propagation_s = topology.path_propagation_s(src, dst);
  const double capacity = topology.path_capacity_bps(src, dst);
  t.transmission_s = capacity > 0.0 && std::isfinite(capacity)
                         ? static_cast<double>(msg.payload_bytes) * 8.0 / capacity
                         : 0.0;
  if (request) {
    const double rtt = model.rtt_base_s + 2.0 * t.propagation_s;
    t.handshake_s = model.handshake_rtts * rtt;
    t.service_s = model.per_phase_service_s;
  }
  return t;
}

}  // namespace mpauth::simnet
