// mpauth: run the session-approval simulation and check its reports.
//
//   mpauth run --scenario s.json --seed 7 --out reports/ --format csv
//   mpauth validate --scenario s.json
//   mpauth check --report reports/ --expect expectations.json

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "mpauth/error.hpp"
#include "mpauth/harness.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kInvalid = 1;
constexpr int kFailed = 2;

namespace h = mpauth::harness;

int cmd_run(const std::string& scenario_path, std::optional<std::uint64_t> seed,
            const std::optional<std::string>& timeout_mode, const std::string& out_dir, const std::string& format) {
  auto scenario = scenario_path.empty() ? h::Scenario{} : h::load_scenario(scenario_path);
  if (timeout_mode) {
    scenario.timeout_mode = mpauth::protocol::TimeoutMode::parse(*timeout_mode);
    scenario.validate();
  }
  const auto fmt = h::parse_report_format(format);
  const auto experiment = h::run_experiment(scenario, seed.value_or(scenario.seed));
  h::emit_experiment(experiment, fmt, out_dir);

  const auto& r = experiment.report;
  std::cout << "sessions started " << r.sessions_started << ", completed " << r.sessions_completed << ", dropped "
            << r.sessions_dropped << ", in flight " << r.sessions_in_flight << "\n"
            << "end-to-end mean " << h::format_number(r.end_to_end_mean_s) << " s, per-phase mean "
            << h::format_number(r.per_phase_mean_s) << " s\n"
            << "peak traffic " << h::format_number(r.peak_traffic_mbps) << " Mbps, max network delay "
            << h::format_number(r.max_network_delay_s) << " s\n";
  if (r.horizon_exceeded) std::cout << "horizon reached with work outstanding; report is partial\n";
  std::cout << "report written to " << out_dir << "\n";
  return kOk;
}

int cmd_validate(const std::string& scenario_path) {
  const auto scenario = h::load_scenario(scenario_path);
  std::cout << h::scenario_to_text(scenario);
  return kOk;
}

int cmd_check(const std::string& report_dir, const std::string& expect_path) {
  const auto metrics = h::read_summary(report_dir);
  const auto verdicts = h::check_acceptance(metrics, h::load_expectations(expect_path));
  bool all = true;
  for (const auto& v : verdicts) {
    all &= v.passed;
    std::cout << (v.passed ? "PASS " : "FAIL ") << v.expectation.describe() << " (measured "
              << h::format_number(v.measured);
    if (!v.passed) std::cout << ", off by " << h::format_number(v.delta);
    std::cout << ")\n";
  }
  return all ? kOk : kFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-party session approval simulator"};
  app.require_subcommand(1);

  std::string scenario_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> timeout_mode;
  std::string out_dir = "report";
  std::string format = "csv";
  auto* run = app.add_subcommand("run", "Run a scenario and write a report");
  run->add_option("--scenario", scenario_path, "Scenario file (defaults when omitted)");
  run->add_option("--seed", seed, "Seed, overriding the scenario's");
  run->add_option("--timeout-mode", timeout_mode, "none | per-phase:<s> | localized-f:<s>");
  run->add_option("--out", out_dir, "Report directory");
  run->add_option("--format", format, "csv | json-like")->check(CLI::IsMember({"csv", "json-like", "json"}));

  std::string validate_path;
  auto* validate = app.add_subcommand("validate", "Parse and validate a scenario");
  validate->add_option("--scenario", validate_path, "Scenario file")->required();

  std::string report_dir;
  std::string expect_path;
  auto* check = app.add_subcommand("check", "Check a report against expectations");
  check->add_option("--report", report_dir, "Report directory")->required();
  check->add_option("--expect", expect_path, "Expectations file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInvalid;
  }

  try {
    if (*run) return cmd_run(scenario_path, seed, timeout_mode, out_dir, format);
    if (*validate) return cmd_validate(validate_path);
    if (*check) return cmd_check(report_dir, expect_path);
  } catch (const mpauth::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInvalid;
  }
  return kInvalid;
}
