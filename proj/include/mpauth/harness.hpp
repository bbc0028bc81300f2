#pragma once

// Scenario files, experiment orchestration, metrics aggregation, report
// emission and acceptance checks.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mpauth/simulator.hpp"

namespace mpauth::harness {

using simnet::Scenario;

/// Missing keys take their defaults. Throws Error(ParseError) with the line
/// number, or Error(ValidationError) naming the field.
Scenario parse_scenario(std::string_view text);
Scenario load_scenario(const std::filesystem::path& path);
std::string scenario_to_text(const Scenario& scenario);
void save_scenario(const Scenario& scenario, const std::filesystem::path& path);

struct PhaseStats {
  int phase = 0;
  std::string label;
  std::uint64_t count = 0;
  double mean_s = 0.0;
  double p50_s = 0.0;
  double p90_s = 0.0;
  double max_s = 0.0;
};

/// One 1 s bin starting at t_s.
struct TimePoint {
  double t_s = 0.0;
  std::uint64_t active_sessions = 0;
  double sent_bps = 0.0;
  double received_bps = 0.0;
};

inline constexpr double kSampleInterval = 1.0;

struct MetricsReport {
  std::uint64_t seed = 0;
  std::string timeout_mode;
  std::uint64_t sessions_started = 0;
  std::uint64_t sessions_completed = 0;
  std::uint64_t sessions_dropped = 0;
  std::uint64_t sessions_in_flight = 0;
  std::map<std::string, std::uint64_t> drops_by_reason;
  double end_to_end_mean_s = 0.0;
  double end_to_end_p50_s = 0.0;
  double end_to_end_p90_s = 0.0;
  double end_to_end_p99_s = 0.0;
  double end_to_end_max_s = 0.0;
  /// Mean of the per-phase means over phases that completed at least once.
  double per_phase_mean_s = 0.0;
  std::vector<PhaseStats> per_phase;
  std::vector<TimePoint> timeseries;
  std::uint64_t peak_active_sessions = 0;
  double peak_traffic_mbps = 0.0;
  double peak_traffic_mbytes_per_s = 0.0;
  double max_network_delay_s = 0.0;
  std::uint64_t bytes_sent = 0;
  std::uint64_t bytes_delivered = 0;
  std::uint64_t bytes_in_flight = 0;
  std::uint64_t violations = 0;
  bool horizon_exceeded = false;
  double end_time_s = 0.0;

  /// Every scalar by metric name, as used in expectation files.
  std::map<std::string, double> scalars() const;
};

MetricsReport aggregate(const simnet::RunResult& result, const Scenario& scenario, std::uint64_t seed);

struct Experiment {
  simnet::RunResult run;
  MetricsReport report;
};

/// A horizon cut yields a partial report with horizon_exceeded set.
Experiment run_experiment(const Scenario& scenario, std::uint64_t seed);
inline Experiment run_experiment(const Scenario& scenario) { return run_experiment(scenario, scenario.seed); }

enum class ReportFormat { Csv, Json };
/// "csv" or "json-like" (also "json"). Throws Error(ParseError).
ReportFormat parse_report_format(std::string_view text);

/// summary, per_phase and timeseries tables (.csv or .json). Throws Error(IoError).
void emit_report(const MetricsReport& report, ReportFormat format, const std::filesystem::path& out_dir);
/// emit_report plus events.csv.
void emit_experiment(const Experiment& experiment, ReportFormat format, const std::filesystem::path& out_dir);

std::string summary_text(const MetricsReport& report, ReportFormat format);
std::string per_phase_text(const MetricsReport& report, ReportFormat format);
std::string timeseries_text(const MetricsReport& report, ReportFormat format);

/// Scalars from a report directory's summary file, whichever format is present.
std::map<std::string, double> read_summary(const std::filesystem::path& report_dir);

struct Expectation {
  std::string metric;
  std::optional<double> target;
  std::optional<double> rel_tol;
  std::optional<double> min;
  std::optional<double> max;
  std::optional<double> max_exclusive;

  std::string describe() const;
};

struct Verdict {
  Expectation expectation;
  bool passed = false;
  double measured = 0.0;
  /// Distance outside the accepted band; 0 when passed.
  double delta = 0.0;
};

/// A list of {"metric", "target" + "rel_tol" | "min" | "max" | "max_exclusive"}.
std::vector<Expectation> parse_expectations(std::string_view text);
std::vector<Expectation> load_expectations(const std::filesystem::path& path);

/// Throws Error(UnknownMetric).
std::vector<Verdict> check_acceptance(const std::map<std::string, double>& metrics,
                                      const std::vector<Expectation>& expectations);
inline std::vector<Verdict> check_acceptance(const MetricsReport& report,
                                             const std::vector<Expectation>& expectations) {
  return check_acceptance(report.scalars(), expectations);
}

/// Shortest decimal that reads back to the same double.
std::string format_number(double value);

}  // namespace mpauth::harness
