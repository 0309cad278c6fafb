#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "resa/core/component.hpp"

namespace resa::core {

struct Unit {
  std::string id;
  std::set<std::string> component_ids;
  std::deque<Event> queue;
};

struct DeliveryTarget {
  std::string unit;
  std::string component;
  std::string port;
  Technology technology = Technology::kLocal;

  auto operator<=>(const DeliveryTarget&) const = default;
};

// Resolves emitted events to their receivers over the connection table.
// An unconnected out-port is not an error: the event is dropped and a
// warning counter is bumped.
class Router {
 public:
  Router() = default;
  // `location` maps every endpoint id (component or building block) to the
  // unit hosting it.
  Router(std::vector<Connection> connections, std::map<std::string, std::string> location);

  std::vector<DeliveryTarget> route(const Event& event) const;
  std::vector<DeliveryTarget> route_from(const Endpoint& source) const;

  std::uint64_t unconnected_warnings() const { return warnings_; }
  const std::vector<Connection>& connections() const { return connections_; }
  std::string unit_of(const std::string& endpoint_id) const;

 private:
  std::vector<Connection> connections_;
  std::map<std::string, std::string> location_;
  std::multimap<Endpoint, std::size_t> by_source_;
  mutable std::uint64_t warnings_ = 0;
};

class LivelockError : public Error {
 public:
  explicit LivelockError(std::size_t steps);
  std::size_t steps() const { return steps_; }

 private:
  std::size_t steps_;
};

inline constexpr std::size_t kDefaultMaxSteps = 1'000'000;

// Sequential execution engine for one unit: pops one event at a time,
// executes it to completion, and routes the emitted events. Local receivers
// are appended to the same FIFO; everything else goes to `forward`.
class UnitEngine {
 public:
  using Forward = std::function<void(const DeliveryTarget&, Event)>;
  using Probe = std::function<void(const Event&)>;

  UnitEngine(std::string unit_id, std::shared_ptr<const Router> router, Forward forward = {});

  void add_component(std::unique_ptr<Component> component);
  Component* find(const std::string& id);
  bool hosts(const std::string& id) const { return components_.count(id) > 0; }

  // Enqueue an event whose target/target_port are already set.
  void enqueue(Event event);
  // Route an event as if emitted from `source` (used by building blocks that
  // relay events without being their sender).
  void emit_from(const Endpoint& source, Event event);

  // Returns the number of steps executed. Throws LivelockError past max_steps.
  std::size_t run_to_stable(std::size_t max_steps = kDefaultMaxSteps);

  void set_step_probe(Probe probe) { step_probe_ = std::move(probe); }
  void set_emit_probe(Probe probe) { emit_probe_ = std::move(probe); }

  const std::string& unit_id() const { return unit_.id; }
  const Unit& unit() const { return unit_; }
  std::size_t queue_size() const { return unit_.queue.size(); }
  std::uint64_t enqueued() const { return enqueued_; }
  std::uint64_t consumed() const { return consumed_; }
  std::uint64_t rejected() const { return rejected_; }
  int max_depth_seen() const { return max_depth_; }
  const std::vector<std::string>& diagnostics() const { return diagnostics_; }
  const Router& router() const { return *router_; }

 private:
  void dispatch(const std::vector<DeliveryTarget>& targets, const Event& event);

  Unit unit_;
  std::shared_ptr<const Router> router_;
  Forward forward_;
  std::map<std::string, std::unique_ptr<Component>> components_;
  Probe step_probe_;
  Probe emit_probe_;
  std::uint64_t enqueued_ = 0;
  std::uint64_t consumed_ = 0;
  std::uint64_t rejected_ = 0;
  int depth_ = 0;
  int max_depth_ = 0;
  std::vector<std::string> diagnostics_;
};

}  // namespace resa::core
