#include "pipeline.hpp"

#include <chrono>
#include <future>
#include <thread>

#include "resa/runtime/components.hpp"

namespace resa::bench {

std::int64_t wall_us() {
  return std::chrono::duration_cast<std::chrono::microseconds>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

std::string to_string(Network n) { return n == Network::kSim ? "sim" : "sockets"; }

PipelineRun::PipelineRun(const arch::Resa& resa, Network network, std::uint64_t events, double rate,
                         runtime::NodeOptions options, std::uint64_t seed, std::int64_t sim_tick_us,
                         int sim_delta_bound)
    : network_(network), events_(events), rate_(rate), samples_(events) {
  for (std::uint64_t i = 0; i < events; ++i) samples_[i].id = i;
  gen_unit_ = resa.locations().at("gen");
  if (network == Network::kSim) {
    harness::SimConfig cfg;
    cfg.seed = seed;
    cfg.tick_us = sim_tick_us;
    cfg.delta_bound = sim_delta_bound;
    sim_ = std::make_unique<runtime::SimSystem>(resa, cfg, harness::FaultScript{}, options);
    sim_->sim().set_tracing(false);
    install(sim_->node(gen_unit_));
  } else {
    harness::SocketOptions so;
    so.tick_us = 10'000;
    sockets_ = std::make_unique<runtime::SocketSystem>(resa, so, options);
    install(sockets_->node(gen_unit_));
  }
}

PipelineRun::~PipelineRun() { stop(); }

void PipelineRun::install(runtime::UnitNode& gen) {
  gen.set_emit_observer([this](const core::Event& e, std::int64_t now) {
    if (e.sender != "gen" || e.sender_port != "out") return;
    auto id = runtime::loadgen_id(e.payload);
    if (!id || *id >= events_) return;
    samples_[*id].sent_us = now - origin_us_;
    sent_.fetch_add(1);
  });
  gen.set_step_observer([this](const core::Event& e, std::int64_t now) {
    if (e.target != "gen" || e.target_port != "feedback") return;
    auto id = runtime::loadgen_id(e.payload);
    if (!id || *id >= events_ || samples_[*id].received_us >= 0) return;
    samples_[*id].received_us = now - origin_us_;
    received_.fetch_add(1);
  });
  if (rate_ > 0) {
    gen.set_tick_hook([this](runtime::UnitNode& n) {
      const auto now = n.now_us();
      if (last_clock_us_ >= 0 && now > last_clock_us_) {
        auto tokens = static_cast<std::int64_t>(rate_ * static_cast<double>(now - last_clock_us_) / 1000.0);
        n.inject("gen", "clock", runtime::clock_payload(tokens));
      }
      last_clock_us_ = now;
    });
  }
}

void PipelineRun::start() {
  if (sim_) {
    origin_us_ = sim_->sim().now_us();
    auto& gen = sim_->node(gen_unit_);
    sim_->sim().at(sim_->sim().tick(), [&gen] { gen.inject("gen", "start", {}); });
  } else {
    sockets_->start();
    wall_origin_us_ = wall_us();
    origin_us_ = std::chrono::duration_cast<std::chrono::microseconds>(
                     std::chrono::steady_clock::now().time_since_epoch())
                     .count();
    auto& gen = sockets_->node(gen_unit_);
    sockets_->post(gen_unit_, [&gen] { gen.inject("gen", "start", {}); });
  }
}

double PipelineRun::now_s() const {
  if (sim_) return static_cast<double>(sim_->sim().now_us() - origin_us_) / 1e6;
  return static_cast<double>(wall_us() - wall_origin_us_) / 1e6;
}

void PipelineRun::advance_to(double t_s) {
  if (sim_) {
    const auto tick_us = sim_->sim().config().tick_us;
    const auto target = static_cast<std::int64_t>((t_s * 1e6 + static_cast<double>(origin_us_)) /
                                                  static_cast<double>(tick_us));
    if (target > sim_->sim().tick()) sim_->run_until(target);
  } else {
    auto left = t_s - now_s();
    if (left > 0) std::this_thread::sleep_for(std::chrono::duration<double>(left));
  }
}

bool PipelineRun::run_until_done(double limit_s) {
  if (sim_) {
    const auto tick_us = sim_->sim().config().tick_us;
    const std::int64_t step = std::max<std::int64_t>(1, 100'000 / tick_us);
    while (received() < events_ && now_s() < limit_s) {
      sim_->run_until(sim_->sim().tick() + step);
    }
  } else {
    while (received() < events_ && now_s() < limit_s) {
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
  }
  return received() >= events_;
}

void PipelineRun::crash(const std::string& unit) {
  if (sim_) {
    sim_->sim().crash(unit);
  } else {
    sockets_->crash(unit);
  }
}

bool PipelineRun::is_leader(const std::string& unit, const std::string& proxy) {
  if (sim_) {
    const auto* r = sim_->node(unit).replica(proxy);
    return r && r->is_leader();
  }
  std::promise<bool> answer;
  auto result = answer.get_future();
  auto& node = sockets_->node(unit);
  sockets_->post(unit, [&] {
    const auto* r = node.replica(proxy);
    answer.set_value(r && r->is_leader());
  });
  if (result.wait_for(std::chrono::seconds(5)) != std::future_status::ready) return false;
  return result.get();
}

void PipelineRun::stop() {
  if (stopped_) return;
  stopped_ = true;
  if (sockets_) sockets_->stop();
}

}  // namespace resa::bench
