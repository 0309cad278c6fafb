#pragma once

#include <atomic>
#include <memory>
#include <vector>

#include "resa/bench.hpp"
#include "resa/runtime/system.hpp"

namespace resa::bench {

// Runs the loadgenerator topology on either network and records per-event
// send/receive times at the generator.
class PipelineRun {
 public:
  PipelineRun(const arch::Resa& resa, Network network, std::uint64_t events, double rate,
              runtime::NodeOptions options, std::uint64_t seed, std::int64_t sim_tick_us,
              int sim_delta_bound);
  ~PipelineRun();

  // Injects the start event; time 0 of the run.
  void start();
  // Advances to `t_s` seconds after start (sim) or sleeps until then (sockets).
  void advance_to(double t_s);
  // Advances until every event came back or `limit_s` passed. True when done.
  bool run_until_done(double limit_s);
  void crash(const std::string& unit);
  // Whether the replica behind `proxy` on `unit` currently leads its group.
  bool is_leader(const std::string& unit, const std::string& proxy);
  double now_s() const;

  std::uint64_t sent() const { return sent_.load(); }
  std::uint64_t received() const { return received_.load(); }
  // Valid once the run is stopped.
  const std::vector<Sample>& samples() const { return samples_; }
  void stop();

 private:
  void install(runtime::UnitNode& gen);

  Network network_;
  std::uint64_t events_;
  double rate_;
  std::unique_ptr<runtime::SimSystem> sim_;
  std::unique_ptr<runtime::SocketSystem> sockets_;
  std::string gen_unit_;
  std::vector<Sample> samples_;
  std::atomic<std::uint64_t> sent_{0};
  std::atomic<std::uint64_t> received_{0};
  std::int64_t origin_us_ = 0;
  std::int64_t wall_origin_us_ = 0;
  std::int64_t last_clock_us_ = -1;
  bool stopped_ = false;
};

std::int64_t wall_us();

// Processor replicated BFT with f=1.
arch::ResilienceConfig processor_bft();

}  // namespace resa::bench
