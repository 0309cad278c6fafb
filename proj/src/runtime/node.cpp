#include "resa/runtime/node.hpp"

#include <algorithm>

#include "resa/transform.hpp"

namespace resa::runtime {

using core::Event;

KeyMaterial shared_secret_keys(const std::string& secret) {
  auto ring = std::make_shared<order::HmacKeyring>(to_bytes(secret));
  KeyMaterial keys;
  keys.verifier = ring;
  keys.signer = [ring](const std::string& principal) { return ring->signer(principal); };
  return keys;
}

order::GroupConfig group_config(const arch::Resa& resa, const arch::ReplicationGroup& group) {
  order::GroupConfig gc;
  gc.group = group.base;
  gc.model = group.model;
  gc.f = group.f;
  gc.n = group.n;
  gc.replicas.resize(static_cast<std::size_t>(group.n));
  for (const auto& p : resa.proxies) {
    if (p.group == group.base && p.replica_index >= 0 && p.replica_index < group.n) {
      gc.replicas[static_cast<std::size_t>(p.replica_index)] = {p.unit, p.id};
    }
  }
  return gc;
}

// Turns events into ordered requests toward a replication group.
class UnitNode::FrontendBlock final : public core::Component {
 public:
  FrontendBlock(std::unique_ptr<order::Frontend> fe, const UnitNode& node)
      : fe_(std::move(fe)), node_(node) {}
  const std::string& id() const override { return fe_->id(); }
  bool accepts(std::string_view) const override { return true; }
  std::vector<Event> handle(const Event& event) override {
    fe_->invoke_ordered(core::encode(event), node_.now_us());
    return {};
  }
  order::Frontend& frontend() { return *fe_; }

 private:
  std::unique_ptr<order::Frontend> fe_;
  const UnitNode& node_;
};

// Relays executed requests into the unit under the original sender identity.
class UnitNode::ProxyBlock final : public core::Component {
 public:
  ProxyBlock(std::string id, std::shared_ptr<const arch::Resa> resa)
      : id_(std::move(id)), resa_(std::move(resa)) {}
  const std::string& id() const override { return id_; }
  bool accepts(std::string_view) const override { return true; }
  std::vector<Event> handle(const Event& event) override {
    Event out = event;
    const arch::ReplicationGroup* src =
        event.origin_replica ? resa_->group_of_replica(event.sender) : nullptr;
    // target_port carries the relay port to route_source; routing overwrites it.
    out.target_port = src ? transform::relay_port(src->base, event.sender_port) : event.target_port;
    out.target.clear();
    return {std::move(out)};
  }
  core::Endpoint route_source(const Event& emitted) const override {
    return {id_, emitted.target_port};
  }

 private:
  std::string id_;
  std::shared_ptr<const arch::Resa> resa_;
};

UnitNode::UnitNode(std::shared_ptr<const arch::Resa> resa, std::string unit, const KeyMaterial& keys,
                   const ComponentTypes& types, NodeOptions options)
    : resa_(std::move(resa)), unit_(std::move(unit)), keys_(keys), options_(options) {
  auto router = std::make_shared<core::Router>(resa_->connections, resa_->locations());
  engine_ = std::make_unique<core::UnitEngine>(
      unit_, router, [this](const core::DeliveryTarget& t, Event e) {
        if (!transport_) return;
        harness::Envelope env{unit_, e.sender, t.unit, t.component, std::move(e)};
        transport_->send(std::move(env));
      });
  engine_->set_step_probe([this](const Event& e) {
    if (step_observer_) step_observer_(e, now_us());
  });
  engine_->set_emit_probe([this](const Event& e) {
    if (emit_observer_) emit_observer_(e, now_us());
  });

  const auto unit_it = std::find_if(resa_->units.begin(), resa_->units.end(),
                                    [&](const arch::UnitDecl& u) { return u.id == unit_; });
  if (unit_it == resa_->units.end()) throw Error("unknown unit '" + unit_ + "'");
  for (const auto& cid : unit_it->components) {
    const auto* decl = resa_->find_component(cid);
    if (!decl) throw Error("unit '" + unit_ + "' lists unknown component '" + cid + "'");
    std::optional<std::uint32_t> origin;
    arch::ComponentDecl logical = *decl;
    if (const auto* g = resa_->group_of_replica(cid)) {
      auto pos = std::find(g->replica_ids.begin(), g->replica_ids.end(), cid) - g->replica_ids.begin();
      origin = static_cast<std::uint32_t>(pos);
      // Replicas must behave exactly like the base component.
      logical.id = g->base;
    }
    engine_->add_component(
        std::make_unique<core::StateMachineComponent>(types.make(logical, cid), origin));
  }
  for (const auto& c : resa_->consolidators) {
    if (c.unit != unit_) continue;
    const auto* g = resa_->group(c.source_group);
    if (!g) throw Error("consolidator '" + c.id + "' refers to unknown group '" + c.source_group + "'");
    auto policy = consolidate::Registry::builtin().make(c.kind, g->parameters);
    engine_->add_component(std::make_unique<consolidate::Consolidator>(
        c.id, g->base, g->f, g->n, g->model, std::move(policy), options_.consolidator));
    consolidator_ids_.push_back(c.id);
  }
  for (const auto& f : resa_->frontends) {
    if (f.unit != unit_) continue;
    const auto* g = resa_->group(f.group);
    if (!g) throw Error("frontend '" + f.id + "' refers to unknown group '" + f.group + "'");
    auto signer = keys_.signer(f.id);
    signers_[f.id] = signer;
    auto fe = std::make_unique<order::Frontend>(f.id, order::Address{unit_, f.id},
                                                group_config(*resa_, *g), signer, keys_.verifier,
                                                options_.frontend, make_send(f.id));
    frontends_[f.id] = fe.get();
    engine_->add_component(std::make_unique<FrontendBlock>(std::move(fe), *this));
  }
  for (const auto& p : resa_->proxies) {
    if (p.unit != unit_) continue;
    const auto* g = resa_->group(p.group);
    if (!g) throw Error("replica proxy '" + p.id + "' refers to unknown group '" + p.group + "'");
    auto signer = keys_.signer(order::replica_principal(g->base, static_cast<std::uint32_t>(p.replica_index)));
    signers_[p.id] = signer;
    replicas_[p.id] = std::make_unique<order::Replica>(
        group_config(*resa_, *g), static_cast<std::uint32_t>(p.replica_index), signer,
        keys_.verifier, options_.replica, make_send(p.id));
    engine_->add_component(std::make_unique<ProxyBlock>(p.id, resa_));
  }
}

order::Send UnitNode::make_send(const std::string& from_block) {
  return [this, from_block](const order::Address& to, const order::OrderMessage& msg) {
    if (!transport_) return;
    transport_->send(harness::Envelope{unit_, from_block, to.node, to.block, msg});
  };
}

std::shared_ptr<const order::Signer> UnitNode::signer_for(const std::string& block) const {
  auto it = signers_.find(block);
  return it == signers_.end() ? nullptr : it->second;
}

void UnitNode::on_message(const harness::Envelope& e) {
  const auto now = now_us();
  if (const auto* ev = std::get_if<Event>(&e.body)) {
    Event copy = *ev;
    copy.target = e.to_block;
    engine_->enqueue(std::move(copy));
  } else {
    const auto& msg = std::get<order::OrderMessage>(e.body);
    if (auto r = replicas_.find(e.to_block); r != replicas_.end()) {
      r->second->on_message(msg, now);
    } else if (auto f = frontends_.find(e.to_block); f != frontends_.end()) {
      if (const auto* ack = std::get_if<order::OrderAck>(&msg)) f->second->on_ack(*ack, now);
    }
  }
  run();
}

void UnitNode::on_tick() {
  if (tick_hook_) tick_hook_(*this);
  const auto now = now_us();
  for (auto& [_, r] : replicas_) r->on_tick(now);
  for (auto& [_, f] : frontends_) f->on_tick(now);
  run();
}

void UnitNode::inject(const std::string& component, const std::string& port, Bytes payload) {
  Event e;
  e.sender = "env";
  e.sender_port = component + "." + port;
  e.seq = inject_seq_++;
  e.payload = std::move(payload);
  e.target = component;
  e.target_port = port;
  engine_->enqueue(std::move(e));
  run();
}

void UnitNode::drain_replicas() {
  for (auto& [proxy, r] : replicas_) {
    for (auto& ex : r->drain_executed(options_.replica.handoff_capacity)) {
      Event ev;
      try {
        ev = core::decode_event(ex.request.payload);
      } catch (const DecodeError&) {
        continue;
      }
      ev.target = proxy;
      engine_->enqueue(std::move(ev));
    }
  }
}

void UnitNode::run() {
  drain_replicas();
  engine_->run_to_stable();
}

const order::Replica* UnitNode::replica(const std::string& proxy_id) const {
  auto it = replicas_.find(proxy_id);
  return it == replicas_.end() ? nullptr : it->second.get();
}

std::vector<const order::Replica*> UnitNode::replicas() const {
  std::vector<const order::Replica*> out;
  for (const auto& [_, r] : replicas_) out.push_back(r.get());
  return out;
}

const order::Frontend* UnitNode::frontend(const std::string& id) const {
  auto it = frontends_.find(id);
  return it == frontends_.end() ? nullptr : it->second;
}

std::vector<const consolidate::Consolidator*> UnitNode::consolidators() const {
  std::vector<const consolidate::Consolidator*> out;
  for (const auto& id : consolidator_ids_) {
    out.push_back(dynamic_cast<const consolidate::Consolidator*>(engine_->find(id)));
  }
  return out;
}

std::vector<std::shared_ptr<UnitNode>> build_nodes(std::shared_ptr<const arch::Resa> resa,
                                                   const KeyMaterial& keys,
                                                   const ComponentTypes& types,
                                                   NodeOptions options) {
  std::vector<std::shared_ptr<UnitNode>> nodes;
  for (const auto& u : resa->units) {
    nodes.push_back(std::make_shared<UnitNode>(resa, u.id, keys, types, options));
  }
  return nodes;
}

}  // namespace resa::runtime
