#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>

#include "mpauth/harness.hpp"

namespace mpauth::harness {

namespace {

double mean(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

// Nearest-rank percentile of sorted data.
double percentile(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) return 0.0;
  auto rank = static_cast<std::size_t>(std::ceil(p * static_cast<double>(sorted.size())));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  return sorted[rank - 1];
}

std::vector<TimePoint> build_timeseries(const simnet::RunResult& result) {
  std::vector<TimePoint> series;
  double first = std::numeric_limits<double>::infinity();
  for (const auto& s : result.sessions) {
    if (s.started) first = std::min(first, s.state.started_at);
  }
  if (!std::isfinite(first)) return series;

  const double t0 = std::floor(first);
  const double end = std::max(result.end_time_s, t0);
  const auto bins = static_cast<std::size_t>(std::floor((end - t0) / kSampleInterval)) + 1;
  series.resize(bins);
  for (std::size_t i = 0; i < bins; ++i) series[i].t_s = t0 + static_cast<double>(i) * kSampleInterval;

  auto bin_of = [&](double t) -> std::optional<std::size_t> {
    if (t < t0) return std::nullopt;
    auto i = static_cast<std::size_t>(std::floor((t - t0) / kSampleInterval));
    return std::min(i, bins - 1);
  };

  for (const auto& rec : result.log) {
    const bool sent = rec.kind == "send";
    if (!sent && rec.kind != "deliver") continue;
    auto i = bin_of(rec.time_s);
    if (!i) continue;
    const double bits = static_cast<double>(rec.payload_bytes) * 8.0 / kSampleInterval;
    (sent ? series[*i].sent_bps : series[*i].received_bps) += bits;
  }

  // A session counts as active in every bin its lifetime overlaps.
  std::vector<std::int64_t> delta(bins + 1, 0);
  for (const auto& s : result.sessions) {
    if (!s.started) continue;
    auto from = bin_of(s.state.started_at);
    std::size_t to = bins - 1;
    if (s.state.ended_at) to = *bin_of(*s.state.ended_at);
    ++delta[*from];
    --delta[to + 1];
  }
  std::int64_t running = 0;
  for (std::size_t i = 0; i < bins; ++i) {
    running += delta[i];
    series[i].active_sessions = static_cast<std::uint64_t>(running);
  }
  return series;
}

}  // namespace

MetricsReport aggregate(const simnet::RunResult& result, const Scenario& scenario, std::uint64_t seed) {
  MetricsReport r;
  r.seed = seed;
  r.timeout_mode = scenario.timeout_mode.to_string();
  r.horizon_exceeded = result.horizon_exceeded;
  r.end_time_s = result.end_time_s;
  r.max_network_delay_s = result.max_network_delay_s;
  r.bytes_sent = result.bytes_sent;
  r.bytes_delivered = result.bytes_delivered;
  r.bytes_in_flight = result.bytes_in_flight;
  r.violations = result.violations;

  std::vector<double> e2e;
  std::array<std::vector<double>, protocol::kPhaseCount + 1> phases;
  for (const auto& s : result.sessions) {
    if (!s.started) continue;
    ++r.sessions_started;
    switch (s.state.status) {
      case protocol::Status::Completed:
        ++r.sessions_completed;
        e2e.push_back(*s.state.ended_at - s.state.started_at);
        break;
      case protocol::Status::Dropped:
        ++r.sessions_dropped;
        ++r.drops_by_reason[s.state.drop_reason->to_string()];
        break;
      case protocol::Status::InProgress:
        ++r.sessions_in_flight;
        break;
    }
    for (int k = 1; k <= protocol::kPhaseCount; ++k) {
      const auto i = static_cast<std::size_t>(k);
      if (std::isfinite(s.phase_started[i]) && std::isfinite(s.phase_ended[i])) {
        phases[i].push_back(s.phase_ended[i] - s.phase_started[i]);
      }
    }
  }

  std::sort(e2e.begin(), e2e.end());
  r.end_to_end_mean_s = mean(e2e);
  r.end_to_end_p50_s = percentile(e2e, 0.50);
  r.end_to_end_p90_s = percentile(e2e, 0.90);
  r.end_to_end_p99_s = percentile(e2e, 0.99);
  r.end_to_end_max_s = e2e.empty() ? 0.0 : e2e.back();

  std::vector<double> phase_means;
  for (int k = 1; k <= protocol::kPhaseCount; ++k) {
    auto& xs = phases[static_cast<std::size_t>(k)];
    if (xs.empty()) continue;
    std::sort(xs.begin(), xs.end());
    PhaseStats p;
    p.phase = k;
    p.label = protocol::phase_spec(k).label();
    p.count = xs.size();
    p.mean_s = mean(xs);
    p.p50_s = percentile(xs, 0.50);
    p.p90_s = percentile(xs, 0.90);
    p.max_s = xs.back();
    phase_means.push_back(p.mean_s);
    r.per_phase.push_back(std::move(p));
  }
  r.per_phase_mean_s = mean(phase_means);

  r.timeseries = build_timeseries(result);
  double peak_bps = 0.0;
  for (const auto& t : r.timeseries) {
    peak_bps = std::max(peak_bps, t.sent_bps);
    r.peak_active_sessions = std::max(r.peak_active_sessions, t.active_sessions);
  }
  r.peak_traffic_mbps = peak_bps / 1e6;
  r.peak_traffic_mbytes_per_s = peak_bps / 8.0 / 1e6;
  return r;
}

std::map<std::string, double> MetricsReport::scalars() const {
  auto n = [](std::uint64_t v) { return static_cast<double>(v); };
  std::map<std::string, double> m = {
      {"seed", n(seed)},
      {"sessions_started", n(sessions_started)},
      {"sessions_completed", n(sessions_completed)},
      {"sessions_dropped", n(sessions_dropped)},
      {"sessions_in_flight", n(sessions_in_flight)},
      {"end_to_end_mean_s", end_to_end_mean_s},
      {"end_to_end_p50_s", end_to_end_p50_s},
      {"end_to_end_p90_s", end_to_end_p90_s},
      {"end_to_end_p99_s", end_to_end_p99_s},
      {"end_to_end_max_s", end_to_end_max_s},
      {"per_phase_mean_s", per_phase_mean_s},
      {"phases_reported", n(per_phase.size())},
      {"peak_active_sessions", n(peak_active_sessions)},
      {"peak_traffic_mbps", peak_traffic_mbps},
      {"peak_traffic_mbytes_per_s", peak_traffic_mbytes_per_s},
      {"max_network_delay_s", max_network_delay_s},
      {"bytes_sent", n(bytes_sent)},
      {"bytes_delivered", n(bytes_delivered)},
      {"bytes_in_flight", n(bytes_in_flight)},
      {"violations", n(violations)},
      {"horizon_exceeded", horizon_exceeded ? 1.0 : 0.0},
      {"end_time_s", end_time_s},
  };
  for (const auto& [reason, count] : drops_by_reason) m["drops." + reason] = n(count);
  for (const auto& p : per_phase) m["phase_" + std::to_string(p.phase) + "_mean_s"] = p.mean_s;
  return m;
}

Experiment run_experiment(const Scenario& scenario, std::uint64_t seed) {
  Experiment e{simnet::run(scenario, seed), {}};
  e.report = aggregate(e.run, scenario, seed);
  return e;
}

}  // namespace mpauth::harness
