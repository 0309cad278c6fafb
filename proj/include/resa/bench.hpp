#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "resa/arch/model.hpp"

namespace resa::bench {

enum class Network { kSim, kSockets };
std::string to_string(Network n);

// Send and receive times of one generated event, both taken at the load
// generator.
struct Sample {
  std::uint64_t id = 0;
  std::int64_t sent_us = 0;
  std::int64_t received_us = -1;
};

// ---------------------------------------------------------------------------
// Replication overhead: loadgenerator -> processor -> reporter -> feedback.

struct OverheadOptions {
  std::vector<std::uint64_t> backlogs{1, 5, 10, 25, 50, 100, 200};
  std::uint64_t events = 10'000;
  std::uint64_t payload = 150;
  std::uint64_t work = 0;  // processor hashing rounds per event
  Network network = Network::kSim;
  std::uint64_t seed = 1;
  std::int64_t sim_tick_us = 1000;
  int sim_delta_bound = 2;
  double timeout_s = 120;
};

struct OverheadPoint {
  std::uint64_t backlog = 0;
  std::uint64_t sent = 0;
  std::uint64_t delivered = 0;
  double ops_per_s = 0;   // over the middle half of the events
  double latency_ms = 0;  // mean over the same events
  double littles_ratio = 0;  // ops_per_s * latency / backlog
  std::vector<std::uint64_t> missing;
};

// Topology of the experiment; the processor is replicated (BFT, f=1) when
// `replicated` is set.
arch::Lsa overhead_lsa(std::uint64_t backlog, std::uint64_t events, std::uint64_t payload,
                       std::uint64_t work, double rate = 0);

OverheadPoint run_overhead_point(const OverheadOptions& options, bool replicated,
                                 std::uint64_t backlog);
std::vector<OverheadPoint> run_overhead(const OverheadOptions& options, bool replicated);

// Middle-interval statistics of a finished run: events with ids in
// [n/4, 3n/4) where n is the number of samples.
OverheadPoint summarize(std::uint64_t backlog, const std::vector<Sample>& samples);

// A curve has a saturation knee when throughput first rises (the smallest
// backlog stays below 90% of the peak), then flattens: the last backlog step
// gains less than half of the proportional throughput increase, and no point
// after the knee (first point within 10% of the peak) falls below 75% of it.
struct Knee {
  bool found = false;
  std::uint64_t backlog = 0;
  double peak_ops_per_s = 0;
  std::string reason;
};
Knee find_knee(const std::vector<OverheadPoint>& curve);

// ---------------------------------------------------------------------------
// Ordering microbenchmark: a 4-replica BFT group and closed-loop clients.

struct OrderingOptions {
  std::vector<int> clients{1, 2, 4, 8, 16, 32};
  std::uint64_t payload = 0;
  std::uint64_t requests_per_client = 200;
  Network network = Network::kSim;
  std::uint64_t seed = 1;
  std::int64_t sim_tick_us = 1000;
  int sim_delta_bound = 2;
  double timeout_s = 120;
};

struct OrderingPoint {
  int clients = 0;
  std::uint64_t payload = 0;
  double ops_per_s = 0;   // executed at the leader, middle half
  double latency_ms = 0;  // mean at client 0
  std::uint64_t completed = 0;
};

OrderingPoint run_ordering_point(const OrderingOptions& options, int clients);
std::vector<OrderingPoint> run_ordering(const OrderingOptions& options);

// ---------------------------------------------------------------------------
// Leader failure under a rate-limited closed loop.

struct LeaderFailureOptions {
  double rate = 50;  // offered events per second
  std::uint64_t backlog = 200;
  double crash_at_s = 18;
  double duration_s = 40;  // generation stops after this
  bool crash_leader = true;  // otherwise replica 1
  Network network = Network::kSim;
  std::uint64_t seed = 1;
  std::int64_t sim_tick_us = 10'000;
  int sim_delta_bound = 2;
  std::int64_t leader_timeout_us = 2'000'000;
  double window_s = 1.0;
  double grace_s = 30;
};

struct LeaderFailureReport {
  std::string crashed_unit;
  std::vector<std::pair<double, double>> throughput_ts;  // (t_s, ops_per_s)
  std::vector<std::pair<double, double>> latency_ts;     // (t_s received, latency_ms)
  double pre_crash_ops_per_s = 0;
  bool dropped_to_zero = false;
  double outage_s = 0;     // longest delivery gap opening within T_lead of the crash
  double recovery_s = -1;  // end of that gap minus the crash time
  double recovered_at_s = -1;  // first window of three within 10% of the pre-crash mean
  double peak_latency_ms = 0;
  std::uint64_t sent = 0;
  std::uint64_t delivered = 0;
  std::vector<std::uint64_t> missing;
};

LeaderFailureReport run_leader_failure(const LeaderFailureOptions& options);
// Post-processing shared by both networks; exposed for tests.
LeaderFailureReport analyze_leader_failure(const std::vector<Sample>& samples, std::uint64_t sent,
                                           const LeaderFailureOptions& options);

// ---------------------------------------------------------------------------
// Reports

// Relative path -> contents. Numbers are printed with fixed precision so
// simulator runs are byte-stable.
using Files = std::map<std::string, std::string>;

Files overhead_report(const std::vector<OverheadPoint>& baseline,
                      const std::vector<OverheadPoint>& replicated);
Files ordering_report(const std::vector<OrderingPoint>& points);
Files leader_failure_report(const LeaderFailureReport& report, const LeaderFailureOptions& options);

void write_files(const Files& files, const std::string& out_dir);

struct Series {
  std::string label;
  std::vector<std::pair<double, double>> points;
};
// Minimal line chart. Throws on empty input.
std::string svg_chart(const std::string& title, const std::string& x_label,
                      const std::string& y_label, const std::vector<Series>& series,
                      bool log_x = false, double marker_x = -1);

}  // namespace resa::bench
