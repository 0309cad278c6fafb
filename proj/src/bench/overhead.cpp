#include <algorithm>
#include <cmath>

#include "pipeline.hpp"
#include "resa/transform.hpp"

namespace resa::bench {

using core::Direction;
using core::Technology;

arch::Lsa overhead_lsa(std::uint64_t backlog, std::uint64_t events, std::uint64_t payload,
                       std::uint64_t work, double rate) {
  arch::Lsa lsa;
  arch::ComponentDecl gen{"gen",
                          "loadgenerator",
                          {{"start", Direction::kIn},
                           {"feedback", Direction::kIn},
                           {"clock", Direction::kIn},
                           {"out", Direction::kOut}},
                          {}};
  gen.params = {{"backlog", std::to_string(backlog)},
                {"total", std::to_string(events)},
                {"payload", std::to_string(payload)},
                {"rate", std::to_string(static_cast<std::uint64_t>(std::llround(rate)))}};
  arch::ComponentDecl proc{"proc", "processor", {{"in", Direction::kIn}, {"out", Direction::kOut}}, {}};
  proc.params = {{"work", std::to_string(work)}};
  arch::ComponentDecl rep{"rep", "reporter", {{"in", Direction::kIn}, {"feedback", Direction::kOut}}, {}};
  lsa.components = {gen, proc, rep};
  lsa.connections = {{{"gen", "out"}, {"proc", "in"}, Technology::kSocket},
                     {{"proc", "out"}, {"rep", "in"}, Technology::kSocket},
                     {{"rep", "feedback"}, {"gen", "feedback"}, Technology::kSocket}};
  lsa.units = {{"u-gen", {"gen"}}, {"u-proc", {"proc"}}, {"u-rep", {"rep"}}};
  return lsa;
}

arch::ResilienceConfig processor_bft() {
  arch::ReplicationRequest r;
  r.component = "proc";
  r.enabled = true;
  r.f = 1;
  r.model = FaultModel::kBFT;
  r.consolidator = "BFTConsolidator";
  arch::ResilienceConfig c;
  c.entries.push_back(r);
  return c;
}

OverheadPoint summarize(std::uint64_t backlog, const std::vector<Sample>& samples) {
  OverheadPoint p;
  p.backlog = backlog;
  const auto n = samples.size();
  std::vector<std::int64_t> received;
  double latency_sum = 0;
  for (const auto& s : samples) {
    if (s.received_us < 0) {
      p.missing.push_back(s.id);
      continue;
    }
    ++p.delivered;
    if (s.id < n / 4 || s.id >= 3 * n / 4) continue;
    received.push_back(s.received_us);
    latency_sum += static_cast<double>(s.received_us - s.sent_us) / 1000.0;
  }
  p.sent = n;
  if (received.size() >= 2) {
    std::sort(received.begin(), received.end());
    const double span_s = static_cast<double>(received.back() - received.front()) / 1e6;
    p.latency_ms = latency_sum / static_cast<double>(received.size());
    if (span_s > 0) p.ops_per_s = static_cast<double>(received.size() - 1) / span_s;
    if (backlog > 0) p.littles_ratio = p.ops_per_s * p.latency_ms / 1000.0 / static_cast<double>(backlog);
  }
  return p;
}

OverheadPoint run_overhead_point(const OverheadOptions& options, bool replicated,
                                 std::uint64_t backlog) {
  auto lsa = overhead_lsa(backlog, options.events, options.payload, options.work);
  auto resa = transform::setup_replication(lsa, replicated ? processor_bft() : arch::ResilienceConfig{});
  PipelineRun run(resa, options.network, options.events, 0, {}, options.seed, options.sim_tick_us,
                  options.sim_delta_bound);
  run.start();
  run.run_until_done(options.timeout_s);
  run.stop();
  auto p = summarize(backlog, run.samples());
  p.sent = run.sent();
  return p;
}

std::vector<OverheadPoint> run_overhead(const OverheadOptions& options, bool replicated) {
  std::vector<OverheadPoint> out;
  for (auto b : options.backlogs) out.push_back(run_overhead_point(options, replicated, b));
  return out;
}

Knee find_knee(const std::vector<OverheadPoint>& curve) {
  Knee k;
  if (curve.size() < 3) {
    k.reason = "fewer than three sweep points";
    return k;
  }
  double peak = 0;
  for (const auto& p : curve) peak = std::max(peak, p.ops_per_s);
  k.peak_ops_per_s = peak;
  std::size_t knee = 0;
  while (knee < curve.size() && curve[knee].ops_per_s < 0.9 * peak) ++knee;
  k.backlog = curve[knee].backlog;
  if (knee == 0) {
    k.reason = "throughput does not rise: the smallest backlog is already within 10% of the peak";
    return k;
  }
  for (std::size_t i = knee + 1; i < curve.size(); ++i) {
    if (curve[i].ops_per_s < 0.75 * peak) {
      k.reason = "throughput collapses after the knee";
      return k;
    }
  }
  const auto& last = curve.back();
  const auto& prev = curve[curve.size() - 2];
  const double gain = prev.ops_per_s > 0 ? last.ops_per_s / prev.ops_per_s - 1 : 1e9;
  const double proportional = static_cast<double>(last.backlog) / static_cast<double>(prev.backlog) - 1;
  if (gain >= 0.5 * proportional) {
    k.reason = "throughput is still rising at the largest backlog";
    return k;
  }
  k.found = true;
  return k;
}

}  // namespace resa::bench
