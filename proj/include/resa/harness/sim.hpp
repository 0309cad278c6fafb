#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "resa/harness/byzantine.hpp"
#include "resa/harness/node.hpp"

namespace resa::harness {

// Links between different sides are cut during [from_tick, to_tick).
// Nodes not listed on any side stay connected to everyone.
struct Partition {
  std::int64_t from_tick = 0;
  std::int64_t to_tick = 0;
  std::vector<std::vector<std::string>> sides;
};

struct SimConfig {
  std::uint64_t seed = 1;
  std::int64_t tick_us = 100'000;  // 1 tick = 100 ms
  std::int64_t gst_tick = 0;
  std::int64_t delta_bound = 1;  // ticks, post-GST
  double pre_gst_drop = 0.0;
  std::int64_t pre_gst_max_delay = 10;  // ticks
  std::vector<Partition> partitions;
};

struct CrashAction {
  std::string node;
  std::int64_t tick = 0;
};

struct ByzantineAction {
  std::string node;
  ByzantineMode mode = ByzantineMode::kMute;
  std::int64_t from_tick = 0;
  std::int64_t to_tick = -1;  // -1: until the end of the run
};

struct FaultScript {
  std::vector<CrashAction> crashes;
  std::vector<ByzantineAction> byzantine;
};

// Both files are JSON documents.
SimConfig parse_sim_config(std::string_view text);
FaultScript parse_fault_script(std::string_view text);
void validate_sim_config(const SimConfig& c);

struct GroupMembership {
  std::string group;
  int f = 0;
  std::vector<std::string> nodes;
};

// Liveness runs may target at most f members of each group, and none of a
// group with f = 0. Throws resa::Error otherwise.
void validate_fault_script(const FaultScript& script, const std::vector<GroupMembership>& groups);

struct TraceRecord {
  std::int64_t tick = 0;
  std::string kind;  // send, deliver, drop, crash
  std::string src;
  std::string dst;
  std::string digest;
  std::uint64_t msg = 0;  // send/deliver/drop correlation id
};

std::string format_trace(const std::vector<TraceRecord>& trace);

class Simulator {
 public:
  explicit Simulator(SimConfig config, FaultScript script = {});
  ~Simulator();
  Simulator(const Simulator&) = delete;
  Simulator& operator=(const Simulator&) = delete;

  void add_node(std::shared_ptr<Node> node);
  // Runs `action` at the start of `tick`, after message deliveries.
  void at(std::int64_t tick, std::function<void()> action);
  // Advances simulated time to `tick` (exclusive).
  void run_until(std::int64_t tick);

  std::int64_t tick() const { return tick_; }
  std::int64_t now_us() const { return tick_ * config_.tick_us; }
  const SimConfig& config() const { return config_; }
  bool crashed(const std::string& node) const { return crashed_.count(node) > 0; }
  // Crashes `node` now; for use from actions.
  void crash(const std::string& node);
  Node* node(const std::string& id) const;

  void set_tracing(bool on) { tracing_ = on; }
  const std::vector<TraceRecord>& trace() const { return trace_; }
  std::uint64_t messages_sent() const { return sent_; }
  std::uint64_t messages_delivered() const { return delivered_; }

 private:
  class NodeTransport;
  struct Pending {
    std::int64_t tick;
    std::uint64_t seq;
    Envelope envelope;
    bool operator>(const Pending& o) const {
      return tick != o.tick ? tick > o.tick : seq > o.seq;
    }
  };

  void enqueue(Envelope e);
  bool cut(const std::string& a, const std::string& b, std::int64_t tick) const;
  void record(std::string kind, const std::string& src, const std::string& dst,
              const std::string& digest, std::uint64_t msg);
  std::uint64_t draw(std::uint64_t bound);

  SimConfig config_;
  FaultScript script_;
  std::mt19937_64 rng_;
  std::int64_t tick_ = 0;
  std::uint64_t next_seq_ = 0;
  std::vector<std::shared_ptr<Node>> nodes_;
  std::map<std::string, std::size_t> index_;
  std::vector<std::unique_ptr<Transport>> transports_;
  std::vector<Pending> queue_;  // min-heap
  std::map<std::pair<std::string, std::string>, std::int64_t> link_tail_;
  std::multimap<std::int64_t, std::function<void()>> actions_;
  std::map<std::string, bool> crashed_;
  std::vector<TraceRecord> trace_;
  bool tracing_ = true;
  std::uint64_t sent_ = 0;
  std::uint64_t delivered_ = 0;
};

}  // namespace resa::harness
