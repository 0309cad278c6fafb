#include <algorithm>
#include <cmath>

#include "pipeline.hpp"
#include "resa/transform.hpp"

namespace resa::bench {

LeaderFailureReport analyze_leader_failure(const std::vector<Sample>& samples, std::uint64_t sent,
                                           const LeaderFailureOptions& options) {
  LeaderFailureReport r;
  r.sent = sent;
  std::vector<std::pair<double, double>> deliveries;  // (t_s, latency_ms)
  for (const auto& s : samples) {
    if (s.id >= sent) continue;
    if (s.received_us < 0) {
      r.missing.push_back(s.id);
      continue;
    }
    ++r.delivered;
    deliveries.emplace_back(static_cast<double>(s.received_us) / 1e6,
                            static_cast<double>(s.received_us - s.sent_us) / 1000.0);
  }
  std::sort(deliveries.begin(), deliveries.end());
  r.latency_ts = deliveries;
  for (const auto& d : deliveries) r.peak_latency_ms = std::max(r.peak_latency_ms, d.second);
  if (deliveries.empty()) return r;

  const double w = options.window_s;
  const auto windows = static_cast<std::size_t>(std::floor(deliveries.back().first / w)) + 1;
  std::vector<std::uint64_t> counts(windows, 0);
  for (const auto& d : deliveries) ++counts[static_cast<std::size_t>(std::floor(d.first / w))];
  for (std::size_t i = 0; i < windows; ++i) {
    r.throughput_ts.emplace_back(static_cast<double>(i) * w, static_cast<double>(counts[i]) / w);
  }

  const double t_lead = static_cast<double>(options.leader_timeout_us) / 1e6;
  const double horizon = options.crash_at_s + 10 * t_lead;
  double sum = 0;
  int n = 0;
  for (std::size_t i = 0; i < windows; ++i) {
    const double start = static_cast<double>(i) * w;
    if (start >= 2 * w && start + w <= options.crash_at_s) {
      sum += r.throughput_ts[i].second;
      ++n;
    }
    if (start >= options.crash_at_s && start <= horizon && start + w <= options.duration_s &&
        counts[i] == 0) {
      r.dropped_to_zero = true;
    }
  }
  r.pre_crash_ops_per_s = n > 0 ? sum / n : 0;

  double gap_end = -1;
  for (std::size_t i = 0; i + 1 < deliveries.size(); ++i) {
    const double a = deliveries[i].first, b = deliveries[i + 1].first;
    if (b <= options.crash_at_s || a > options.crash_at_s + t_lead) continue;
    const double gap = b - std::max(a, options.crash_at_s);
    if (gap > r.outage_s) {
      r.outage_s = gap;
      gap_end = b;
    }
  }
  if (gap_end >= 0) r.recovery_s = gap_end - options.crash_at_s;

  const double pre = r.pre_crash_ops_per_s;
  auto close = [&](std::size_t i) {
    return i < windows && std::abs(r.throughput_ts[i].second - pre) <= 0.1 * pre;
  };
  const double from = gap_end >= 0 ? gap_end : options.crash_at_s;
  for (std::size_t i = 0; i < windows; ++i) {
    const double start = static_cast<double>(i) * w;
    if (start < from) continue;
    if (start + 3 * w > options.duration_s) break;
    if (close(i) && close(i + 1) && close(i + 2)) {
      r.recovered_at_s = start;
      break;
    }
  }
  return r;
}

LeaderFailureReport run_leader_failure(const LeaderFailureOptions& options) {
  const auto events = static_cast<std::uint64_t>(std::llround(options.rate * options.duration_s));
  auto lsa = overhead_lsa(options.backlog, events, 150, 0, options.rate);
  auto resa = transform::setup_replication(lsa, processor_bft());
  runtime::NodeOptions node_options;
  node_options.replica.leader_timeout_us = options.leader_timeout_us;

  PipelineRun run(resa, options.network, events, options.rate, node_options, options.seed,
                  options.sim_tick_us, options.sim_delta_bound);
  run.start();
  run.advance_to(options.crash_at_s);

  const auto* group = resa.group("proc");
  std::string victim;
  if (options.crash_leader) {
    // The replica that currently believes it leads, asked on its own thread.
    for (const auto& p : resa.proxies) {
      if (run.is_leader(p.unit, p.id)) {
        victim = p.unit;
        break;
      }
    }
    if (victim.empty()) victim = group->replica_units.front();
  } else {
    victim = group->replica_units.at(1);
  }
  run.crash(victim);
  run.run_until_done(options.duration_s + options.grace_s);
  run.stop();

  auto report = analyze_leader_failure(run.samples(), run.sent(), options);
  report.crashed_unit = victim;
  return report;
}

}  // namespace resa::bench
