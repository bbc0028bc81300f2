// Acceptance run: one PASS/FAIL line per criterion, each under its wall-clock
// budget. Exit status is non-zero if any criterion fails.

#include <chrono>
#include <cstdio>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "mpauth/error.hpp"
#include "mpauth/harness.hpp"
#include "mpauth/hex.hpp"

using namespace mpauth;
using harness::Scenario;
using protocol::Role;
using protocol::Status;

namespace {

struct Outcome {
  bool passed = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok && passed) {
      passed = false;
      detail = what;
    }
  }
};

struct Criterion {
  int id;
  std::string title;
  double budget_s;
  std::function<Outcome()> check;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v) { return harness::format_number(v); }

Scenario single_session() {
  Scenario sc;
  sc.principals = 1;
  sc.sessions_per_principal = {simnet::SessionsPerPrincipal::Kind::Fixed, 1};
  return sc;
}

const harness::Experiment& default_run() {
  static const harness::Experiment e = harness::run_experiment(Scenario{}, Scenario{}.seed);
  return e;
}

std::vector<harness::Expectation> default_expectations(const std::set<std::string>& metrics) {
  std::vector<harness::Expectation> out;
  for (auto& e : harness::load_expectations(std::string(MPAUTH_TEST_DATA) + "/default_expect.json")) {
    if (metrics.contains(e.metric)) out.push_back(e);
  }
  return out;
}

Outcome expect_metrics(const std::set<std::string>& metrics) {
  Outcome o;
  const auto verdicts = harness::check_acceptance(default_run().report, default_expectations(metrics));
  std::string summary;
  for (const auto& v : verdicts) {
    if (!summary.empty()) summary += "; ";
    summary += v.expectation.describe() + ": measured " + fmt(v.measured);
    if (!v.passed) summary += " (off by " + fmt(v.delta) + ")";
    o.passed &= v.passed;
  }
  if (verdicts.size() != metrics.size()) {
    o.passed = false;
    summary += "; expectations file is missing a metric";
  }
  o.detail = summary;
  return o;
}

// ---------------------------------------------------------------------------

Outcome end_to_end_correctness() {
  Outcome o;
  auto r = simnet::run(single_session(), 11);
  const auto& s = r.sessions.at(0);
  o.require(s.state.status == Status::Completed, "session did not complete");
  std::vector<int> phases;
  for (const auto& e : r.log) {
    if (e.kind == "phase_complete") phases.push_back(e.phase_index);
  }
  std::vector<int> expected(13);
  for (int i = 0; i < 13; ++i) expected[static_cast<std::size_t>(i)] = i + 1;
  o.require(phases == expected, "phase completions are not exactly 1..13 in order");
  o.require(s.a_idsess.has_value(), "A holds no IDsess");
  if (s.a_idsess) {
    const auto& reg = r.authority->registry;
    auto a = protocol::default_cloud_state(Role::CloudA);
    auto b = protocol::default_cloud_state(Role::CloudB);
    o.require(protocol::grant_access(a, Role::SAC_SH, *s.a_idsess, "R1", reg) == protocol::AccessDecision::Granted,
              "CloudA refused A's IDsess via SAC-SH");
    o.require(protocol::grant_access(b, Role::SAC_SH, *s.a_idsess, "R2", reg) == protocol::AccessDecision::Granted,
              "CloudB refused A's IDsess via SAC-SH");
  }
  if (o.passed) o.detail = "Completed; 13 phases in order; IDsess granted for R1 and R2 via SAC-SH";
  return o;
}

Outcome phase_sequencing() {
  Outcome o;
  double slowest = 0.0;
  for (int k = 1; k <= 12; ++k) {
    const auto t0 = Clock::now();
    auto sc = simnet::inject_stall(single_session(), protocol::phase_spec(k).destination, k, 1e7);
    auto r = simnet::run(sc, 11);
    bool clean = true;
    for (const auto& e : r.log) clean &= e.phase_index <= k;
    o.require(clean, "phase > " + std::to_string(k) + " activity after suppressing its final response");
    o.require(r.sessions.at(0).state.current_phase == k - 1, "phase " + std::to_string(k) + " was marked complete");
    const double took = seconds_since(t0);
    slowest = std::max(slowest, took);
    o.require(took < 1.0, "sub-case " + std::to_string(k) + " took " + fmt(took) + " s");
  }
  if (o.passed) o.detail = "12 sub-cases clean; slowest " + fmt(slowest) + " s";
  return o;
}

Outcome gatekeeping() {
  Outcome o;
  std::uint64_t grants = 0;
  std::uint64_t direct = 0;
  Scenario sc;
  sc.principals = 5;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    auto r = simnet::run(sc, seed);
    std::set<std::tuple<std::string, std::string, std::string>> forwarded;  // session, resource cloud, key
    for (const auto& e : r.log) {
      if (e.kind == "forward" && e.source == "SAC-SH") forwarded.insert({e.session_id, e.destination, e.outcome});
      if (e.kind == "granted") {
        ++grants;
        o.require(forwarded.contains({e.session_id, e.source, e.outcome}),
                  "seed " + std::to_string(seed) + ": grant without a matching SAC-SH forward");
      }
    }
    for (const auto& s : r.sessions) {
      if (!s.a_idsess) continue;
      for (auto cloud : {Role::CloudA, Role::CloudB}) {
        const char* res = cloud == Role::CloudA ? "R1" : "R2";
        ++direct;
        o.require(protocol::grant_access(protocol::default_cloud_state(cloud), Role::A, *s.a_idsess, res,
                                         r.authority->registry) == protocol::AccessDecision::Refused,
                  "direct presentation by A was granted");
      }
    }
  }
  o.require(grants > 0, "no grants observed");
  if (o.passed) {
    o.detail = std::to_string(grants) + " grants all preceded by a matching forward; " + std::to_string(direct) +
               " direct presentations refused";
  }
  return o;
}

Outcome timeout_semantics() {
  Outcome o;
  auto sc = single_session();
  sc.timeout_mode = protocol::TimeoutMode::per_phase(60);

  auto stalled = simnet::run(simnet::inject_stall(sc, Role::SAC_DB, 5, 90), 11).sessions.at(0);
  o.require(stalled.state.status == Status::Dropped &&
                stalled.state.drop_reason == protocol::DropReason{protocol::DropReason::Kind::PhaseTimeout, 5},
            "90 s stall under per-phase 60 s did not drop at phase 5");

  auto slow = simnet::run(simnet::inject_stall(sc, Role::SAC_DB, 5, 30), 11).sessions.at(0);
  o.require(slow.state.status == Status::Completed, "30 s stall under per-phase 60 s did not complete");

  auto loc = single_session();
  loc.timeout_mode = protocol::TimeoutMode::localized_at_f(200);
  loc.horizon_s = 1000;
  auto silent = simnet::inject_stall(loc, Role::CloudA, 8, 1e7);
  auto dropped = simnet::run(silent, 11).sessions.at(0);
  double waited = -1.0;
  if (dropped.state.ended_at && dropped.f_waiting_since) waited = *dropped.state.ended_at - *dropped.f_waiting_since;
  o.require(dropped.state.status == Status::Dropped &&
                dropped.state.drop_reason == protocol::DropReason{protocol::DropReason::Kind::LocalizedTimeout},
            "absent cloud responses were not dropped by the watchdog at F");
  o.require(std::abs(waited - 200.0) <= harness::kSampleInterval, "watchdog fired after " + fmt(waited) + " s");
  if (o.passed) o.detail = "PhaseTimeout(5) at 90 s stall; completed at 30 s; localized drop after " + fmt(waited) + " s";
  return o;
}

Outcome key_properties() {
  Outcome o;
  std::mt19937_64 rng(4242);
  auto random_part = [&](keys::PartRole role) {
    keys::PartBytes b{};
    for (auto& x : b) x = static_cast<std::uint8_t>(rng());
    return keys::KeyPart(role, b);
  };
  for (int i = 0; i < 1000; ++i) {
    auto r = random_part(keys::PartRole::Root);
    auto s = random_part(keys::PartRole::SubDomain);
    auto l = random_part(i % 2 ? keys::PartRole::Private : keys::PartRole::Session);
    auto [r2, s2, l2] = keys::decompose_key(keys::compose_key(r, s, l));
    o.require(r2 == r && s2 == s && l2 == l, "compose/decompose round-trip failed");
  }

  vault::Vault v;
  std::vector<keys::Participant> pool;
  for (int c = 0; c < 3; ++c) {
    const std::string cloud = "Cloud" + std::to_string(c);
    v.register_cloud(cloud, as_bytes("secret-" + cloud));
    for (int d = 0; d < 2; ++d) {
      const std::string sub = "sub" + std::to_string(d);
      v.register_subdomain(cloud, sub);
      for (int t = 0; t < 3; ++t) {
        const std::string id = cloud + "-" + sub + "-t" + std::to_string(t);
        v.register_tenant(cloud, sub, id, {}, {{"k", id}});
        pool.push_back({id, cloud, sub});
      }
    }
  }
  for (int i = 0; i < 100; ++i) {
    std::shuffle(pool.begin(), pool.end(), rng);
    const auto n = 1 + static_cast<std::size_t>(rng() % 6);
    std::vector<keys::Participant> ps(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n));
    keys::SessionField sid{};
    for (auto& x : sid) x = static_cast<std::uint8_t>(rng());
    auto set = keys::mint_session_keys(sid, ps, v);
    for (const auto& [id, key] : set.keys) o.require(key.session_field() == sid, "minted key lacks the session field");
    o.require(set.keys.size() == n, "minted set size mismatch");
  }

  std::vector<keys::Participant> ps(pool.begin(), pool.begin() + 3);
  std::vector<keys::SessionKeySet> gens = {keys::mint_session_keys(keys::SessionField{}, ps, v)};
  for (int i = 0; i < 5; ++i) gens.push_back(keys::refresh_session(gens.back(), ps, v));
  for (std::size_t g = 0; g + 1 < gens.size(); ++g) {
    for (const auto& [id, key] : gens[g].keys) {
      o.require(!keys::verify_session_key(key, gens.back()), "generation " + std::to_string(g) + " still verifies");
    }
  }
  for (const auto& [id, key] : gens.back().keys) o.require(keys::verify_session_key(key, gens.back()), "latest key rejected");
  if (o.passed) o.detail = "1000 round-trips; 100 minted sets share their field; generations 0-4 invalid after 5 refreshes";
  return o;
}

Outcome determinism() {
  Outcome o;
  auto texts = [](const harness::Experiment& e) {
    std::string all = simnet::event_log_text(e.run.log);
    for (auto f : {harness::ReportFormat::Csv, harness::ReportFormat::Json}) {
      all += harness::summary_text(e.report, f) + harness::per_phase_text(e.report, f) +
             harness::timeseries_text(e.report, f);
    }
    return all;
  };
  const auto a = texts(harness::run_experiment(Scenario{}, 1));
  const auto b = texts(harness::run_experiment(Scenario{}, 1));
  o.require(a == b, "reports differ between identical runs");
  if (o.passed) o.detail = "event log and reports byte-identical (" + std::to_string(a.size()) + " bytes)";
  return o;
}

Outcome no_mass_drop() {
  Outcome o;
  Scenario sc;
  sc.timeout_mode = protocol::TimeoutMode::per_phase(60);
  const auto r = harness::run_experiment(sc, 1).report;
  o.require(r.sessions_dropped == 0, std::to_string(r.sessions_dropped) + " sessions dropped under per-phase 60 s");
  o.require(r.sessions_completed == r.sessions_started, "not every session completed under per-phase 60 s");
  if (o.passed) {
    o.detail = "mass drop not reproduced: per-phase 60 s completes " + std::to_string(r.sessions_completed) + "/" +
               std::to_string(r.sessions_started) + " sessions";
  }
  return o;
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "end-to-end protocol correctness", 1.0, end_to_end_correctness},
      {2, "phase sequencing", 12.0, phase_sequencing},
      {3, "gatekeeping", 60.0, gatekeeping},
      {4, "session count", 120.0, [] { return expect_metrics({"sessions_started"}); }},
      {5, "end-to-end and per-phase time", 120.0,
       [] { return expect_metrics({"end_to_end_mean_s", "per_phase_mean_s"}); }},
      {6, "peak traffic", 120.0, [] { return expect_metrics({"peak_traffic_mbps"}); }},
      {7, "network delay", 120.0, [] { return expect_metrics({"max_network_delay_s"}); }},
      {8, "timeout semantics", 10.0, timeout_semantics},
      {9, "key-scheme properties", 10.0, key_properties},
      {10, "determinism", 240.0, determinism},
      {11, "no mass drop under 60 s per-phase timeout", 120.0, no_mass_drop},
  };

  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double took = seconds_since(t0);
    if (took >= c.budget_s) {
      o.passed = false;
      o.detail += " [over budget: " + fmt(took) + " s >= " + fmt(c.budget_s) + " s]";
    }
    failed += o.passed ? 0 : 1;
    std::printf("%s criterion %2d  %-44s %s [%.3f s]\n", o.passed ? "PASS" : "FAIL", c.id, c.title.c_str(),
                o.detail.c_str(), took);
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
