#include "resa/core/component.hpp"

#include <algorithm>

namespace resa::core {

Bytes encode(const Event& e) {
  ByteWriter w;
  w.str(e.sender).str(e.sender_port).u64(e.seq).bytes(e.payload);
  w.boolean(e.origin_replica.has_value());
  if (e.origin_replica) w.u32(*e.origin_replica);
  w.str(e.target).str(e.target_port);
  return std::move(w).take();
}

Event decode_event(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  Event e;
  e.sender = r.str();
  e.sender_port = r.str();
  e.seq = r.u64();
  e.payload = r.bytes();
  if (r.boolean()) e.origin_replica = r.u32();
  e.target = r.str();
  e.target_port = r.str();
  r.expect_done();
  return e;
}

std::string to_string(Technology t) {
  switch (t) {
    case Technology::kLocal:
      return "local";
    case Technology::kSocket:
      return "socket";
    case Technology::kTotalOrderMulticast:
      return "total-order-multicast";
  }
  return "local";
}

Technology technology_from_string(const std::string& s) {
  if (s == "local") return Technology::kLocal;
  if (s == "socket") return Technology::kSocket;
  if (s == "total-order-multicast") return Technology::kTotalOrderMulticast;
  throw Error("unknown connection technology '" + s + "'");
}

UnknownPortError::UnknownPortError(std::string component, std::string port, Direction dir)
    : Error("component '" + component + "' has no " + (dir == Direction::kIn ? "in" : "out") +
            "-port '" + port + "'"),
      component_(std::move(component)),
      port_(std::move(port)) {}

Bytes ComponentState::serialize() const {
  ByteWriter w;
  w.bytes(data).u32(static_cast<std::uint32_t>(next_seq.size()));
  for (const auto& [port, seq] : next_seq) w.str(port).u64(seq);
  return std::move(w).take();
}

ComponentState ComponentState::deserialize(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  ComponentState s;
  s.data = r.bytes();
  auto n = r.u32();
  for (std::uint32_t i = 0; i < n; ++i) {
    auto port = r.str();
    s.next_seq[port] = r.u64();
  }
  r.expect_done();
  return s;
}

bool ComponentSpec::has_port(std::string_view name, Direction dir) const {
  return std::any_of(ports.begin(), ports.end(),
                     [&](const Port& p) { return p.name == name && p.direction == dir; });
}

StepResult step(const ComponentSpec& spec, const ComponentState& state, const Event& event) {
  if (!spec.has_port(event.target_port, Direction::kIn)) {
    throw UnknownPortError(spec.id, event.target_port, Direction::kIn);
  }
  TransitionResult tr = spec.transition(state.data, event);
  StepResult out;
  out.state.data = std::move(tr.state);
  out.state.next_seq = state.next_seq;
  out.emitted.reserve(tr.emissions.size());
  for (auto& em : tr.emissions) {
    if (!spec.has_port(em.port, Direction::kOut)) {
      throw UnknownPortError(spec.id, em.port, Direction::kOut);
    }
    Event e;
    e.sender = spec.id;
    e.sender_port = em.port;
    e.seq = out.state.next_seq[em.port]++;
    e.payload = std::move(em.payload);
    out.emitted.push_back(std::move(e));
  }
  return out;
}

StateMachineComponent::StateMachineComponent(ComponentSpec spec,
                                             std::optional<std::uint32_t> origin_replica)
    : spec_(std::move(spec)), state_(spec_.initial()), origin_replica_(origin_replica) {}

std::vector<Event> StateMachineComponent::handle(const Event& event) {
  // step() is pure, so a throw leaves state_ untouched.
  StepResult r = step(spec_, state_, event);
  state_ = std::move(r.state);
  if (origin_replica_) {
    for (auto& e : r.emitted) e.origin_replica = origin_replica_;
  }
  return std::move(r.emitted);
}

}  // namespace resa::core
