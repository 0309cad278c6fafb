#include "resa/runtime/system.hpp"

namespace resa::runtime {

SimSystem::SimSystem(const arch::Resa& resa, harness::SimConfig config, harness::FaultScript script,
                     NodeOptions options, const ComponentTypes& types, const std::string& secret)
    : resa_(std::make_shared<const arch::Resa>(resa)) {
  sim_ = std::make_unique<harness::Simulator>(std::move(config), std::move(script));
  nodes_ = build_nodes(resa_, shared_secret_keys(secret), types, options);
  for (const auto& n : nodes_) sim_->add_node(n);
}

UnitNode& SimSystem::node(const std::string& unit) {
  for (const auto& n : nodes_) {
    if (n->id() == unit) return *n;
  }
  throw Error("no node for unit '" + unit + "'");
}

UnitNode& SimSystem::node_of(const std::string& component) {
  auto loc = resa_->locations();
  auto it = loc.find(component);
  if (it == loc.end()) throw Error("component '" + component + "' is not placed");
  return node(it->second);
}

std::vector<std::pair<std::string, const order::Replica*>> SimSystem::replicas(
    const std::string& group) {
  std::vector<std::pair<std::string, const order::Replica*>> out;
  const auto* g = resa_->group(group);
  if (!g) return out;
  for (int i = 0; i < g->n; ++i) {
    for (const auto& p : resa_->proxies) {
      if (p.group == group && p.replica_index == i) {
        out.emplace_back(p.unit, node(p.unit).replica(p.id));
      }
    }
  }
  return out;
}

SocketSystem::SocketSystem(const arch::Resa& resa, harness::SocketOptions socket_options,
                           NodeOptions options, const ComponentTypes& types, const std::string& secret)
    : resa_(std::make_shared<const arch::Resa>(resa)) {
  nodes_ = build_nodes(resa_, shared_secret_keys(secret), types, options);
  auto ports = harness::free_loopback_ports(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) hosts_[nodes_[i]->id()] = {"127.0.0.1", ports[i]};
  for (const auto& n : nodes_) {
    runners_[n->id()] = std::make_unique<harness::SocketRunner>(n, hosts_, socket_options);
  }
}

SocketSystem::~SocketSystem() { stop(); }

void SocketSystem::start() {
  for (auto& [_, r] : runners_) r->start();
}

void SocketSystem::stop() {
  for (auto& [_, r] : runners_) r->stop();
}

void SocketSystem::crash(const std::string& unit) {
  auto it = runners_.find(unit);
  if (it == runners_.end()) throw Error("no node for unit '" + unit + "'");
  it->second->stop();
}

void SocketSystem::post(const std::string& unit, std::function<void()> fn) {
  auto it = runners_.find(unit);
  if (it == runners_.end()) throw Error("no node for unit '" + unit + "'");
  it->second->post(std::move(fn));
}

UnitNode& SocketSystem::node(const std::string& unit) {
  for (const auto& n : nodes_) {
    if (n->id() == unit) return *n;
  }
  throw Error("no node for unit '" + unit + "'");
}

UnitNode& SocketSystem::node_of(const std::string& component) {
  auto loc = resa_->locations();
  auto it = loc.find(component);
  if (it == loc.end()) throw Error("component '" + component + "' is not placed");
  return node(it->second);
}

const harness::SocketRunner& SocketSystem::runner(const std::string& unit) const {
  auto it = runners_.find(unit);
  if (it == runners_.end()) throw Error("no node for unit '" + unit + "'");
  return *it->second;
}

std::vector<harness::GroupMembership> memberships(const arch::Resa& resa) {
  std::vector<harness::GroupMembership> out;
  for (const auto& g : resa.groups) out.push_back({g.base, g.f, g.replica_units});
  return out;
}

}  // namespace resa::runtime
