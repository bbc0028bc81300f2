#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mpauth/error.hpp"
#include "mpauth/harness.hpp"

namespace mpauth::harness {

using nlohmann::json;

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::optional<double> parse_number(std::string_view s) {
  double v = 0.0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || end != s.data() + s.size()) return std::nullopt;
  return v;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << text;
  out.flush();
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

const char* extension(ReportFormat format) { return format == ReportFormat::Csv ? ".csv" : ".json"; }

std::optional<double> number_field(const json& e, const char* key) {
  auto it = e.find(key);
  if (it == e.end()) return std::nullopt;
  if (!it->is_number()) throw Error(ErrorCode::ValidationError, std::string("expectation field '") + key + "' must be a number");
  return it->get<double>();
}

}  // namespace

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return std::string(buf.data(), end);
}

ReportFormat parse_report_format(std::string_view text) {
  if (text == "csv") return ReportFormat::Csv;
  if (text == "json-like" || text == "json") return ReportFormat::Json;
  throw Error(ErrorCode::ParseError, "unknown report format '" + std::string(text) + "'");
}

std::string summary_text(const MetricsReport& report, ReportFormat format) {
  const auto scalars = report.scalars();
  if (format == ReportFormat::Csv) {
    std::string out = "metric,value\n";
    for (const auto& [name, value] : scalars) out += csv_field(name) + "," + format_number(value) + "\n";
    out += "timeout_mode," + csv_field(report.timeout_mode) + "\n";
    return out;
  }
  json doc = json::object();
  for (const auto& [name, value] : scalars) doc[name] = value;
  doc["timeout_mode"] = report.timeout_mode;
  return doc.dump(2) + "\n";
}

std::string per_phase_text(const MetricsReport& report, ReportFormat format) {
  if (format == ReportFormat::Csv) {
    std::string out = "phase,label,count,mean_s,p50_s,p90_s,max_s\n";
    for (const auto& p : report.per_phase) {
      out += std::to_string(p.phase) + "," + csv_field(p.label) + "," + std::to_string(p.count) + "," +
             format_number(p.mean_s) + "," + format_number(p.p50_s) + "," + format_number(p.p90_s) + "," +
             format_number(p.max_s) + "\n";
    }
    return out;
  }
  json rows = json::array();
  for (const auto& p : report.per_phase) {
    rows.push_back({{"phase", p.phase},
                    {"label", p.label},
                    {"count", p.count},
                    {"mean_s", p.mean_s},
                    {"p50_s", p.p50_s},
                    {"p90_s", p.p90_s},
                    {"max_s", p.max_s}});
  }
  return rows.dump(2) + "\n";
}

std::string timeseries_text(const MetricsReport& report, ReportFormat format) {
  if (format == ReportFormat::Csv) {
    std::string out = "t_s,active_sessions,sent_bps,received_bps\n";
    for (const auto& t : report.timeseries) {
      out += format_number(t.t_s) + "," + std::to_string(t.active_sessions) + "," + format_number(t.sent_bps) +
             "," + format_number(t.received_bps) + "\n";
    }
    return out;
  }
  json rows = json::array();
  for (const auto& t : report.timeseries) {
    rows.push_back({{"t_s", t.t_s},
                    {"active_sessions", t.active_sessions},
                    {"sent_bps", t.sent_bps},
                    {"received_bps", t.received_bps}});
  }
  return rows.dump(2) + "\n";
}

void emit_report(const MetricsReport& report, ReportFormat format, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + out_dir.string() + ": " + ec.message());
  const char* ext = extension(format);
  write_file(out_dir / (std::string("summary") + ext), summary_text(report, format));
  write_file(out_dir / (std::string("per_phase") + ext), per_phase_text(report, format));
  write_file(out_dir / (std::string("timeseries") + ext), timeseries_text(report, format));
}

void emit_experiment(const Experiment& experiment, ReportFormat format, const std::filesystem::path& out_dir) {
  emit_report(experiment.report, format, out_dir);
  write_file(out_dir / "events.csv", simnet::event_log_text(experiment.run.log));
}

std::map<std::string, double> read_summary(const std::filesystem::path& report_dir) {
  std::map<std::string, double> out;
  if (std::filesystem::exists(report_dir / "summary.json")) {
    const auto text = read_file(report_dir / "summary.json");
    json doc;
    try {
      doc = json::parse(text);
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::ParseError, std::string("summary.json: ") + e.what());
    }
    for (const auto& [k, v] : doc.items()) {
      if (v.is_number()) out[k] = v.get<double>();
    }
    return out;
  }
  std::istringstream in(read_file(report_dir / "summary.csv"));
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    auto comma = line.rfind(',');
    if (comma == std::string::npos) continue;
    if (auto v = parse_number(std::string_view(line).substr(comma + 1))) out[line.substr(0, comma)] = *v;
  }
  return out;
}

std::string Expectation::describe() const {
  std::string out = metric;
  if (target) {
    out += " = " + format_number(*target);
    if (rel_tol) out += " +/-" + format_number(*rel_tol * 100.0) + "%";
  }
  if (min) out += " >= " + format_number(*min);
  if (max) out += " <= " + format_number(*max);
  if (max_exclusive) out += " < " + format_number(*max_exclusive);
  return out;
}

std::vector<Expectation> parse_expectations(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
  if (doc.is_object() && doc.contains("expectations")) doc = doc.at("expectations");
  if (!doc.is_array()) throw Error(ErrorCode::ParseError, "expectations must be a list");

  std::vector<Expectation> out;
  for (const auto& e : doc) {
    if (!e.is_object() || !e.contains("metric") || !e.at("metric").is_string()) {
      throw Error(ErrorCode::ValidationError, "each expectation needs a string 'metric'");
    }
    Expectation x;
    x.metric = e.at("metric").get<std::string>();
    x.target = number_field(e, "target");
    x.rel_tol = number_field(e, "rel_tol");
    x.min = number_field(e, "min");
    x.max = number_field(e, "max");
    x.max_exclusive = number_field(e, "max_exclusive");
    if (x.target.has_value() != x.rel_tol.has_value()) {
      throw Error(ErrorCode::ValidationError, x.metric + ": target and rel_tol go together");
    }
    if (!x.target && !x.min && !x.max && !x.max_exclusive) {
      throw Error(ErrorCode::ValidationError, x.metric + ": no bound given");
    }
    out.push_back(std::move(x));
  }
  return out;
}

std::vector<Expectation> load_expectations(const std::filesystem::path& path) {
  return parse_expectations(read_file(path));
}

std::vector<Verdict> check_acceptance(const std::map<std::string, double>& metrics,
                                      const std::vector<Expectation>& expectations) {
  std::vector<Verdict> out;
  out.reserve(expectations.size());
  for (const auto& e : expectations) {
    auto it = metrics.find(e.metric);
    if (it == metrics.end()) throw Error(ErrorCode::UnknownMetric, "unknown metric '" + e.metric + "'");
    Verdict v{e, true, it->second, 0.0};
    const double m = v.measured;
    auto below = [&](double lo) {
      if (!(m >= lo)) v.delta = std::max(v.delta, std::isnan(m) ? INFINITY : lo - m);
    };
    auto above = [&](double hi, bool inclusive) {
      if (inclusive ? !(m <= hi) : !(m < hi)) v.delta = std::max(v.delta, std::isnan(m) ? INFINITY : m - hi);
    };
    bool ok = true;
    if (e.target) {
      const double slack = std::abs(*e.target) * *e.rel_tol;
      ok &= m >= *e.target - slack && m <= *e.target + slack;
      below(*e.target - slack);
      above(*e.target + slack, true);
    }
    if (e.min) {
      ok &= m >= *e.min;
      below(*e.min);
    }
    if (e.max) {
      ok &= m <= *e.max;
      above(*e.max, true);
    }
    if (e.max_exclusive) {
      ok &= m < *e.max_exclusive;
      above(*e.max_exclusive, false);
    }
    v.passed = ok;
    out.push_back(std::move(v));
  }
  return out;
}

}  // namespace mpauth::harness
