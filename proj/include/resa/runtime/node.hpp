#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "resa/arch/resa.hpp"
#include "resa/consolidate.hpp"
#include "resa/core/unit.hpp"
#include "resa/harness/node.hpp"
#include "resa/order/frontend.hpp"
#include "resa/order/replica.hpp"
#include "resa/runtime/components.hpp"

namespace resa::runtime {

// Signing keys for the principals of a node plus a verifier for everyone.
struct KeyMaterial {
  std::shared_ptr<const order::Verifier> verifier;
  std::function<std::shared_ptr<const order::Signer>(const std::string& principal)> signer;
};

// Keyed-hash keys derived from one shared secret (simulation, loopback).
KeyMaterial shared_secret_keys(const std::string& secret);

struct NodeOptions {
  order::ReplicaOptions replica;
  order::FrontendOptions frontend;
  consolidate::ConsolidatorOptions consolidator;
};

// Hosts one unit: its components, consolidators, frontends and replica
// proxies. Each proxy runs the agreement protocol for its replica and hands
// executed requests to the unit's queue.
class UnitNode : public harness::Node {
 public:
  using Observer = std::function<void(const core::Event& event, std::int64_t now_us)>;

  UnitNode(std::shared_ptr<const arch::Resa> resa, std::string unit, const KeyMaterial& keys,
           const ComponentTypes& types, NodeOptions options = {});

  const std::string& id() const override { return unit_; }
  void attach(harness::Transport& transport) override { transport_ = &transport; }
  void on_message(const harness::Envelope& e) override;
  void on_tick() override;
  std::shared_ptr<const order::Signer> signer_for(const std::string& block) const override;

  // Hands an external event to a component of this unit.
  void inject(const std::string& component, const std::string& port, Bytes payload);

  // Called for every event consumed by a component of the unit.
  void set_step_observer(Observer o) { step_observer_ = std::move(o); }
  // Called for every event emitted by a component of the unit.
  void set_emit_observer(Observer o) { emit_observer_ = std::move(o); }
  // Called at the start of every tick, before protocol timers run.
  void set_tick_hook(std::function<void(UnitNode&)> hook) { tick_hook_ = std::move(hook); }

  core::UnitEngine& engine() { return *engine_; }
  const order::Replica* replica(const std::string& proxy_id) const;
  std::vector<const order::Replica*> replicas() const;
  const order::Frontend* frontend(const std::string& id) const;
  std::vector<const consolidate::Consolidator*> consolidators() const;
  std::int64_t now_us() const { return transport_ ? transport_->now_us() : 0; }

 private:
  class FrontendBlock;
  class ProxyBlock;

  void run();
  void drain_replicas();
  order::Send make_send(const std::string& from_block);

  std::shared_ptr<const arch::Resa> resa_;
  std::string unit_;
  KeyMaterial keys_;
  NodeOptions options_;
  harness::Transport* transport_ = nullptr;
  std::unique_ptr<core::UnitEngine> engine_;
  std::map<std::string, std::unique_ptr<order::Replica>> replicas_;  // by proxy id
  std::map<std::string, order::Frontend*> frontends_;                // owned by the engine
  std::vector<std::string> consolidator_ids_;
  std::map<std::string, std::shared_ptr<const order::Signer>> signers_;  // by block id
  Observer step_observer_;
  Observer emit_observer_;
  std::function<void(UnitNode&)> tick_hook_;
  std::uint64_t inject_seq_ = 0;
};

// Group configuration as seen by frontends and replicas.
order::GroupConfig group_config(const arch::Resa& resa, const arch::ReplicationGroup& group);

// One node per unit of the architecture.
std::vector<std::shared_ptr<UnitNode>> build_nodes(std::shared_ptr<const arch::Resa> resa,
                                                   const KeyMaterial& keys,
                                                   const ComponentTypes& types,
                                                   NodeOptions options = {});

}  // namespace resa::runtime
