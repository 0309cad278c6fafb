#pragma once

#include <functional>
#include <map>
#include <optional>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "resa/core/event.hpp"

namespace resa::core {

enum class Direction { kIn, kOut };

struct Port {
  std::string name;
  Direction direction = Direction::kIn;

  bool operator==(const Port&) const = default;
};

class UnknownPortError : public Error {
 public:
  UnknownPortError(std::string component, std::string port, Direction dir);
  const std::string& component() const { return component_; }
  const std::string& port() const { return port_; }

 private:
  std::string component_;
  std::string port_;
};

// Snapshot of a component: application bytes plus the per-out-port sequence
// counters. Keeping the counters in the snapshot makes step() pure.
struct ComponentState {
  Bytes data;
  std::map<std::string, std::uint64_t> next_seq;

  bool operator==(const ComponentState&) const = default;

  Bytes serialize() const;
  static ComponentState deserialize(std::span<const std::uint8_t> bytes);
};

struct Emission {
  std::string port;
  Bytes payload;
};

struct TransitionResult {
  Bytes state;
  std::vector<Emission> emissions;
};

using Transition = std::function<TransitionResult(const Bytes& state, const Event& event)>;

struct ComponentSpec {
  std::string id;
  std::vector<Port> ports;
  Transition transition;
  Bytes initial_state;

  bool has_port(std::string_view name, Direction dir) const;
  ComponentState initial() const { return ComponentState{initial_state, {}}; }
};

struct StepResult {
  ComponentState state;
  std::vector<Event> emitted;
};

// Pure transition. Throws UnknownPortError when the event targets an
// undeclared in-port or the transition emits on an undeclared out-port.
StepResult step(const ComponentSpec& spec, const ComponentState& state, const Event& event);

// Anything the unit engine can execute: application state machines and
// framework-provided blocks such as consolidators.
class Component {
 public:
  virtual ~Component() = default;
  virtual const std::string& id() const = 0;
  virtual bool accepts(std::string_view in_port) const = 0;
  // Consumes one event completely, returning the emitted events with
  // sender/sender_port/seq set. Target fields are filled by routing.
  virtual std::vector<Event> handle(const Event& event) = 0;
  // Connection-table source used to route an emitted event. Blocks that
  // relay events under another sender's identity override this.
  virtual Endpoint route_source(const Event& emitted) const {
    return {emitted.sender, emitted.sender_port};
  }
};

class StateMachineComponent final : public Component {
 public:
  explicit StateMachineComponent(ComponentSpec spec,
                                 std::optional<std::uint32_t> origin_replica = std::nullopt);

  const std::string& id() const override { return spec_.id; }
  bool accepts(std::string_view in_port) const override {
    return spec_.has_port(in_port, Direction::kIn);
  }
  std::vector<Event> handle(const Event& event) override;

  const ComponentState& state() const { return state_; }
  const ComponentSpec& spec() const { return spec_; }

 private:
  ComponentSpec spec_;
  ComponentState state_;
  std::optional<std::uint32_t> origin_replica_;
};

}  // namespace resa::core
