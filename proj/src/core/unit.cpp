#include "resa/core/unit.hpp"

#include <cassert>

namespace resa::core {

Router::Router(std::vector<Connection> connections, std::map<std::string, std::string> location)
    : connections_(std::move(connections)), location_(std::move(location)) {
  for (std::size_t i = 0; i < connections_.size(); ++i) {
    by_source_.emplace(connections_[i].source, i);
  }
}

std::string Router::unit_of(const std::string& endpoint_id) const {
  auto it = location_.find(endpoint_id);
  return it == location_.end() ? std::string{} : it->second;
}

std::vector<DeliveryTarget> Router::route(const Event& event) const {
  return route_from(Endpoint{event.sender, event.sender_port});
}

std::vector<DeliveryTarget> Router::route_from(const Endpoint& source) const {
  std::vector<DeliveryTarget> out;
  auto [lo, hi] = by_source_.equal_range(source);
  for (auto it = lo; it != hi; ++it) {
    const Connection& c = connections_[it->second];
    out.push_back({unit_of(c.target.component), c.target.component, c.target.port, c.technology});
  }
  if (out.empty()) ++warnings_;
  return out;
}

LivelockError::LivelockError(std::size_t steps)
    : Error("run-to-stable exceeded " + std::to_string(steps) +
            " steps; the unit likely contains an event cycle"),
      steps_(steps) {}

UnitEngine::UnitEngine(std::string unit_id, std::shared_ptr<const Router> router, Forward forward)
    : router_(std::move(router)), forward_(std::move(forward)) {
  unit_.id = std::move(unit_id);
}

void UnitEngine::add_component(std::unique_ptr<Component> component) {
  const std::string id = component->id();
  unit_.component_ids.insert(id);
  components_[id] = std::move(component);
}

Component* UnitEngine::find(const std::string& id) {
  auto it = components_.find(id);
  return it == components_.end() ? nullptr : it->second.get();
}

void UnitEngine::enqueue(Event event) {
  ++enqueued_;
  unit_.queue.push_back(std::move(event));
}

void UnitEngine::emit_from(const Endpoint& source, Event event) {
  dispatch(router_->route_from(source), event);
}

void UnitEngine::dispatch(const std::vector<DeliveryTarget>& targets, const Event& event) {
  for (const auto& t : targets) {
    Event copy = event;
    copy.target = t.component;
    copy.target_port = t.port;
    if (t.unit == unit_.id && components_.count(t.component)) {
      enqueue(std::move(copy));
    } else if (forward_) {
      forward_(t, std::move(copy));
    }
  }
}

std::size_t UnitEngine::run_to_stable(std::size_t max_steps) {
  std::size_t steps = 0;
  while (!unit_.queue.empty()) {
    if (steps >= max_steps) throw LivelockError(steps);
    Event ev = std::move(unit_.queue.front());
    unit_.queue.pop_front();
    ++consumed_;
    ++steps;

    auto it = components_.find(ev.target);
    if (it == components_.end()) {
      ++rejected_;
      diagnostics_.push_back("unit '" + unit_.id + "': no component '" + ev.target + "'");
      continue;
    }
    if (step_probe_) step_probe_(ev);

    std::vector<Event> emitted;
    ++depth_;
    max_depth_ = std::max(max_depth_, depth_);
    try {
      emitted = it->second->handle(ev);
    } catch (const UnknownPortError& e) {
      ++rejected_;
      diagnostics_.push_back(e.what());
    }
    --depth_;
    assert(depth_ == 0);

    for (auto& out : emitted) {
      if (emit_probe_) emit_probe_(out);
      dispatch(router_->route_from(it->second->route_source(out)), out);
    }
  }
  return steps;
}

}  // namespace resa::core
