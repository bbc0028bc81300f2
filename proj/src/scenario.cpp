#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mpauth/error.hpp"
#include "mpauth/harness.hpp"

namespace mpauth::harness {

using nlohmann::json;
using simnet::LinkOverride;
using simnet::SessionsPerPrincipal;
using simnet::Stall;

namespace {

[[noreturn]] void invalid(const std::string& field, const std::string& why) {
  throw Error(ErrorCode::ValidationError, field + ": " + why);
}

std::size_t line_of(std::string_view text, std::size_t byte) {
  byte = std::min(byte, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(byte), '\n'));
}

template <typename T>
T field_as(const json& j, const std::string& field) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    invalid(field, "wrong type");
  }
}

void reject_unknown(const json& obj, const std::string& where, std::initializer_list<std::string_view> known) {
  for (const auto& [key, value] : obj.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      invalid(where.empty() ? key : where + "." + key, "unknown field");
    }
  }
}

template <typename T>
void read_opt(const json& obj, const char* key, const std::string& field, T& out) {
  if (auto it = obj.find(key); it != obj.end()) out = field_as<T>(*it, field);
}

simnet::Node node_field(const json& j, const std::string& field) {
  auto node = simnet::node_from_string(field_as<std::string>(j, field));
  if (!node) invalid(field, "unknown node '" + j.get<std::string>() + "'");
  return *node;
}

SessionsPerPrincipal sessions_field(const json& j) {
  const std::string field = "sessions_per_principal";
  if (j.is_string()) {
    if (j.get<std::string>() == "balanced") return {};
    invalid(field, "expected \"balanced\" or a positive integer");
  }
  if (!j.is_number_integer()) invalid(field, "expected \"balanced\" or a positive integer");
  return {SessionsPerPrincipal::Kind::Fixed, j.get<int>()};
}

}  // namespace

Scenario parse_scenario(std::string_view text) {
  Scenario sc;
  if (std::all_of(text.begin(), text.end(), [](char c) { return std::isspace(static_cast<unsigned char>(c)); })) {
    return sc;
  }
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ParseError, "line " + std::to_string(line_of(text, e.byte == 0 ? 0 : e.byte - 1)) +
                                           ": " + e.what());
  }
  if (!doc.is_object()) throw Error(ErrorCode::ParseError, "line 1: scenario must be an object");

  reject_unknown(doc, "",
                 {"principals", "sessions_per_principal", "timeout_mode", "connection", "topology", "stalls",
                  "network_offset_s", "app_offset_min_s", "app_offset_max_s", "horizon_s", "seed"});

  if (auto it = doc.find("principals"); it != doc.end()) {
    if (!it->is_number_integer() || it->get<std::int64_t>() < 0) invalid("principals", "must be a count");
    sc.principals = it->get<std::uint64_t>();
  }
  if (auto it = doc.find("sessions_per_principal"); it != doc.end()) sc.sessions_per_principal = sessions_field(*it);
  if (auto it = doc.find("timeout_mode"); it != doc.end()) {
    try {
      sc.timeout_mode = protocol::TimeoutMode::parse(field_as<std::string>(*it, "timeout_mode"));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::ParseError) throw;
      invalid("timeout_mode", e.what());
    }
  }
  if (auto it = doc.find("connection"); it != doc.end()) {
    if (!it->is_object()) invalid("connection", "must be an object");
    reject_unknown(*it, "connection", {"handshake_rtts", "per_phase_service_s", "rtt_base_s"});
    read_opt(*it, "handshake_rtts", "connection.handshake_rtts", sc.connection.handshake_rtts);
    read_opt(*it, "per_phase_service_s", "connection.per_phase_service_s", sc.connection.per_phase_service_s);
    read_opt(*it, "rtt_base_s", "connection.rtt_base_s", sc.connection.rtt_base_s);
  }
  if (auto it = doc.find("topology"); it != doc.end()) {
    if (!it->is_array()) invalid("topology", "must be a list");
    for (const auto& entry : *it) {
      if (!entry.is_object()) invalid("topology", "entries must be objects");
      reject_unknown(entry, "topology", {"a", "b", "bandwidth_bps", "link_count", "propagation_s"});
      if (!entry.contains("a") || !entry.contains("b")) invalid("topology", "each entry needs a and b");
      LinkOverride o;
      o.a = node_field(entry.at("a"), "topology.a");
      o.b = node_field(entry.at("b"), "topology.b");
      if (entry.contains("bandwidth_bps")) o.bandwidth_bps = field_as<double>(entry.at("bandwidth_bps"), "topology.bandwidth_bps");
      if (entry.contains("link_count")) o.link_count = field_as<int>(entry.at("link_count"), "topology.link_count");
      if (entry.contains("propagation_s")) o.propagation_s = field_as<double>(entry.at("propagation_s"), "topology.propagation_s");
      sc.topology_overrides.push_back(o);
    }
  }
  if (auto it = doc.find("stalls"); it != doc.end()) {
    if (!it->is_array()) invalid("stalls", "must be a list");
    for (const auto& entry : *it) {
      if (!entry.is_object()) invalid("stalls", "entries must be objects");
      reject_unknown(entry, "stalls", {"role", "phase", "extra_delay_s"});
      Stall s;
      auto role = protocol::role_from_string(field_as<std::string>(entry.value("role", json()), "stalls.role"));
      if (!role) invalid("stalls.role", "unknown role");
      s.role = *role;
      s.phase_index = field_as<int>(entry.value("phase", json()), "stalls.phase");
      s.extra_delay_s = field_as<double>(entry.value("extra_delay_s", json()), "stalls.extra_delay_s");
      sc.stalls.push_back(s);
    }
  }
  read_opt(doc, "network_offset_s", "network_offset_s", sc.network_offset_s);
  read_opt(doc, "app_offset_min_s", "app_offset_min_s", sc.app_offset_min_s);
  read_opt(doc, "app_offset_max_s", "app_offset_max_s", sc.app_offset_max_s);
  read_opt(doc, "horizon_s", "horizon_s", sc.horizon_s);
  if (auto it = doc.find("seed"); it != doc.end()) {
    if (!it->is_number_unsigned()) invalid("seed", "must be a non-negative integer");
    sc.seed = it->get<std::uint64_t>();
  }
  sc.validate();
  return sc;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

std::string scenario_to_text(const Scenario& sc) {
  json doc = json::object();
  doc["principals"] = sc.principals;
  if (sc.sessions_per_principal.kind == SessionsPerPrincipal::Kind::Fixed) {
    doc["sessions_per_principal"] = sc.sessions_per_principal.count;
  } else {
    doc["sessions_per_principal"] = "balanced";
  }
  doc["timeout_mode"] = sc.timeout_mode.to_string();
  doc["connection"] = {{"handshake_rtts", sc.connection.handshake_rtts},
                       {"per_phase_service_s", sc.connection.per_phase_service_s},
                       {"rtt_base_s", sc.connection.rtt_base_s}};
  doc["topology"] = json::array();
  for (const auto& o : sc.topology_overrides) {
    json e = {{"a", simnet::to_string(o.a)}, {"b", simnet::to_string(o.b)}};
    if (o.bandwidth_bps) e["bandwidth_bps"] = *o.bandwidth_bps;
    if (o.link_count) e["link_count"] = *o.link_count;
    if (o.propagation_s) e["propagation_s"] = *o.propagation_s;
    doc["topology"].push_back(std::move(e));
  }
  doc["stalls"] = json::array();
  for (const auto& s : sc.stalls) {
    doc["stalls"].push_back(
        {{"role", protocol::to_string(s.role)}, {"phase", s.phase_index}, {"extra_delay_s", s.extra_delay_s}});
  }
  doc["network_offset_s"] = sc.network_offset_s;
  doc["app_offset_min_s"] = sc.app_offset_min_s;
  doc["app_offset_max_s"] = sc.app_offset_max_s;
  doc["horizon_s"] = sc.horizon_s;
  doc["seed"] = sc.seed;
  return doc.dump(2) + "\n";
}

void save_scenario(const Scenario& scenario, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << scenario_to_text(scenario);
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

}  // namespace mpauth::harness
