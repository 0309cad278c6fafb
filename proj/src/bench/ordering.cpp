#include <algorithm>
#include <atomic>
#include <chrono>
#include <thread>

#include "pipeline.hpp"
#include "resa/harness/sim.hpp"
#include "resa/harness/socket.hpp"
#include "resa/order/frontend.hpp"

namespace resa::bench {

namespace {

const std::string kGroup = "ord";

order::GroupConfig ordering_group() {
  order::GroupConfig g;
  g.group = kGroup;
  g.model = FaultModel::kBFT;
  g.f = 1;
  g.n = 4;
  for (int i = 0; i < 4; ++i) g.replicas.push_back({"r" + std::to_string(i), "replica"});
  return g;
}

class ReplicaHost final : public harness::Node {
 public:
  ReplicaHost(std::uint32_t index, const std::shared_ptr<order::HmacKeyring>& keys)
      : id_("r" + std::to_string(index)) {
    replica_ = std::make_unique<order::Replica>(
        ordering_group(), index, keys->signer(order::replica_principal(kGroup, index)), keys,
        order::ReplicaOptions{}, [this](const order::Address& to, const order::OrderMessage& m) {
          if (transport_) transport_->send(harness::Envelope{id_, "replica", to.node, to.block, m});
        });
  }
  const std::string& id() const override { return id_; }
  void attach(harness::Transport& t) override { transport_ = &t; }
  void on_message(const harness::Envelope& e) override {
    if (const auto* m = std::get_if<order::OrderMessage>(&e.body)) replica_->on_message(*m, now());
    drain();
  }
  void on_tick() override {
    replica_->on_tick(now());
    drain();
  }
  // Execution times, recorded while this replica leads.
  std::vector<std::int64_t> executions;

 private:
  std::int64_t now() const { return transport_ ? transport_->now_us() : 0; }
  void drain() {
    auto done = replica_->drain_executed();
    if (replica_->is_leader()) {
      for (std::size_t i = 0; i < done.size(); ++i) executions.push_back(now());
    }
  }
  std::string id_;
  harness::Transport* transport_ = nullptr;
  std::unique_ptr<order::Replica> replica_;
};

// Closed-loop clients: each keeps exactly one request outstanding.
class ClientHost final : public harness::Node {
 public:
  ClientHost(int clients, std::uint64_t requests, std::uint64_t payload,
             const std::shared_ptr<order::HmacKeyring>& keys)
      : requests_(requests), payload_(payload, 0x5a) {
    for (int c = 0; c < clients; ++c) {
      const auto name = "client" + std::to_string(c);
      auto fe = std::make_unique<order::Frontend>(
          name, order::Address{id_, name}, ordering_group(), keys->signer(name), keys,
          order::FrontendOptions{}, [this, name](const order::Address& to, const order::OrderMessage& m) {
            if (transport_) transport_->send(harness::Envelope{id_, name, to.node, to.block, m});
          });
      fe->set_on_complete([this, c](std::uint64_t, std::int64_t now) { completed(c, now); });
      clients_.push_back({std::move(fe), 0, 0});
    }
  }
  const std::string& id() const override { return id_; }
  void attach(harness::Transport& t) override { transport_ = &t; }
  void on_message(const harness::Envelope& e) override {
    const auto* m = std::get_if<order::OrderMessage>(&e.body);
    const auto* ack = m ? std::get_if<order::OrderAck>(m) : nullptr;
    if (!ack) return;
    for (auto& c : clients_) {
      if (c.fe->id() == e.to_block) c.fe->on_ack(*ack, now());
    }
  }
  void on_tick() override {
    for (auto& c : clients_) c.fe->on_tick(now());
  }
  void begin() {
    for (std::size_t i = 0; i < clients_.size(); ++i) issue(static_cast<int>(i));
  }
  std::uint64_t done() const { return done_.load(); }
  std::uint64_t target() const { return requests_ * clients_.size(); }
  // Latencies of client 0 in microseconds, in completion order.
  std::vector<std::int64_t> latencies;

 private:
  struct Client {
    std::unique_ptr<order::Frontend> fe;
    std::uint64_t issued;
    std::int64_t started_us;
  };
  std::int64_t now() const { return transport_ ? transport_->now_us() : 0; }
  void issue(int c) {
    auto& cl = clients_[static_cast<std::size_t>(c)];
    if (cl.issued >= requests_) return;
    ++cl.issued;
    cl.started_us = now();
    cl.fe->invoke_ordered(payload_, cl.started_us);
  }
  void completed(int c, std::int64_t t) {
    if (c == 0) latencies.push_back(t - clients_[0].started_us);
    done_.fetch_add(1);
    issue(c);
  }

  std::string id_ = "clients";
  std::uint64_t requests_;
  Bytes payload_;
  harness::Transport* transport_ = nullptr;
  std::vector<Client> clients_;
  std::atomic<std::uint64_t> done_{0};
};

double middle_rate(std::vector<std::int64_t> times) {
  std::sort(times.begin(), times.end());
  const auto n = times.size();
  if (n < 8) return 0;
  const auto a = times[n / 4], b = times[3 * n / 4 - 1];
  if (b <= a) return 0;
  return static_cast<double>(3 * n / 4 - 1 - n / 4) / (static_cast<double>(b - a) / 1e6);
}

double middle_mean_ms(const std::vector<std::int64_t>& v) {
  if (v.empty()) return 0;
  const auto n = v.size();
  std::size_t lo = n / 4, hi = std::max(lo + 1, 3 * n / 4);
  double sum = 0;
  for (std::size_t i = lo; i < hi; ++i) sum += static_cast<double>(v[i]);
  return sum / static_cast<double>(hi - lo) / 1000.0;
}

}  // namespace

OrderingPoint run_ordering_point(const OrderingOptions& options, int clients) {
  auto keys = std::make_shared<order::HmacKeyring>(to_bytes("resa-ordering-bench"));
  std::vector<std::shared_ptr<ReplicaHost>> replicas;
  for (std::uint32_t i = 0; i < 4; ++i) replicas.push_back(std::make_shared<ReplicaHost>(i, keys));
  auto client = std::make_shared<ClientHost>(clients, options.requests_per_client, options.payload, keys);

  if (options.network == Network::kSim) {
    harness::SimConfig cfg;
    cfg.seed = options.seed;
    cfg.tick_us = options.sim_tick_us;
    cfg.delta_bound = options.sim_delta_bound;
    harness::Simulator sim(cfg);
    sim.set_tracing(false);
    for (auto& r : replicas) sim.add_node(r);
    sim.add_node(client);
    sim.at(0, [&] { client->begin(); });
    const auto limit = static_cast<std::int64_t>(options.timeout_s * 1e6) / cfg.tick_us;
    while (client->done() < client->target() && sim.tick() < limit) sim.run_until(sim.tick() + 100);
  } else {
    std::vector<std::shared_ptr<harness::Node>> nodes(replicas.begin(), replicas.end());
    nodes.push_back(client);
    auto ports = harness::free_loopback_ports(nodes.size());
    harness::HostTable hosts;
    for (std::size_t i = 0; i < nodes.size(); ++i) hosts[nodes[i]->id()] = {"127.0.0.1", ports[i]};
    harness::SocketOptions so;
    so.tick_us = 10'000;
    std::vector<std::unique_ptr<harness::SocketRunner>> runners;
    for (auto& n : nodes) runners.push_back(std::make_unique<harness::SocketRunner>(n, hosts, so));
    for (auto& r : runners) r->start();
    runners.back()->post([&] { client->begin(); });
    const auto deadline = wall_us() + static_cast<std::int64_t>(options.timeout_s * 1e6);
    while (client->done() < client->target() && wall_us() < deadline) {
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    for (auto& r : runners) r->stop();
  }

  OrderingPoint p;
  p.clients = clients;
  p.payload = options.payload;
  p.completed = client->done();
  p.ops_per_s = middle_rate(replicas[0]->executions);
  p.latency_ms = middle_mean_ms(client->latencies);
  return p;
}

std::vector<OrderingPoint> run_ordering(const OrderingOptions& options) {
  std::vector<OrderingPoint> out;
  for (int c : options.clients) out.push_back(run_ordering_point(options, c));
  return out;
}

}  // namespace resa::bench
