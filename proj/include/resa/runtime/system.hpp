#pragma once

#include <memory>
#include <string>
#include <vector>

#include "resa/harness/sim.hpp"
#include "resa/harness/socket.hpp"
#include "resa/runtime/node.hpp"

namespace resa::runtime {

// A whole architecture running under the simulator, one node per unit.
class SimSystem {
 public:
  SimSystem(const arch::Resa& resa, harness::SimConfig config, harness::FaultScript script = {},
            NodeOptions options = {}, const ComponentTypes& types = ComponentTypes::with_builtins(),
            const std::string& secret = "resa-sim");

  harness::Simulator& sim() { return *sim_; }
  const arch::Resa& resa() const { return *resa_; }
  const std::vector<std::shared_ptr<UnitNode>>& nodes() const { return nodes_; }
  UnitNode& node(const std::string& unit);
  // Node hosting a component or building block.
  UnitNode& node_of(const std::string& component);

  void run_until(std::int64_t tick) { sim_->run_until(tick); }

  // Replicas of a group in index order, with the unit hosting each.
  std::vector<std::pair<std::string, const order::Replica*>> replicas(const std::string& group);

 private:
  std::shared_ptr<const arch::Resa> resa_;
  std::vector<std::shared_ptr<UnitNode>> nodes_;
  std::unique_ptr<harness::Simulator> sim_;
};

// The same architecture with every unit in its own reactor over loopback
// TCP. Observers and hooks must be installed before start().
class SocketSystem {
 public:
  SocketSystem(const arch::Resa& resa, harness::SocketOptions socket_options = {},
               NodeOptions options = {}, const ComponentTypes& types = ComponentTypes::with_builtins(),
               const std::string& secret = "resa-sockets");
  ~SocketSystem();

  void start();
  void stop();
  // Stops one unit's reactor and sockets, as if the process died.
  void crash(const std::string& unit);
  // Runs `fn` on the reactor thread of `unit`.
  void post(const std::string& unit, std::function<void()> fn);

  const arch::Resa& resa() const { return *resa_; }
  UnitNode& node(const std::string& unit);
  UnitNode& node_of(const std::string& component);
  const harness::HostTable& hosts() const { return hosts_; }
  const harness::SocketRunner& runner(const std::string& unit) const;

 private:
  std::shared_ptr<const arch::Resa> resa_;
  std::vector<std::shared_ptr<UnitNode>> nodes_;
  harness::HostTable hosts_;
  std::map<std::string, std::unique_ptr<harness::SocketRunner>> runners_;
};

// Group memberships by hosting node, for fault script validation.
std::vector<harness::GroupMembership> memberships(const arch::Resa& resa);

}  // namespace resa::runtime
