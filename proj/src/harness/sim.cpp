#include "resa/harness/sim.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "json.hpp"

namespace resa::harness {

using nlohmann::json;

class Simulator::NodeTransport : public Transport {
 public:
  NodeTransport(Simulator& sim, std::string node) : sim_(sim), node_(std::move(node)) {}
  void send(Envelope e) override {
    e.from_node = node_;
    sim_.enqueue(std::move(e));
  }
  std::int64_t now_us() const override { return sim_.now_us(); }

 private:
  Simulator& sim_;
  std::string node_;
};

namespace {

// Owns the wrapper together with the transport it wraps.
class OwnedByzantine : public Transport {
 public:
  OwnedByzantine(std::unique_ptr<Transport> inner, ByzantineMode mode, const Node& node,
                 std::function<bool()> active)
      : inner_(std::move(inner)), wrapper_(*inner_, mode, node, std::move(active)) {}
  void send(Envelope e) override { wrapper_.send(std::move(e)); }
  std::int64_t now_us() const override { return wrapper_.now_us(); }

 private:
  std::unique_ptr<Transport> inner_;
  ByzantineTransport wrapper_;
};

}  // namespace

void validate_sim_config(const SimConfig& c) {
  if (c.delta_bound < 1) throw Error("deltaBound must be at least 1 tick");
  if (c.tick_us <= 0) throw Error("tick length must be positive");
  if (c.pre_gst_drop < 0.0 || c.pre_gst_drop > 1.0) throw Error("drop probability must be in [0,1]");
  if (c.pre_gst_max_delay < 1) throw Error("pre-GST delay bound must be at least 1 tick");
  if (c.gst_tick < 0) throw Error("gstTick must be non-negative");
}

SimConfig parse_sim_config(std::string_view text) {
  SimConfig c;
  try {
    auto j = json::parse(text);
    c.seed = j.value("seed", c.seed);
    c.tick_us = j.value("tickMicros", c.tick_us);
    c.gst_tick = j.value("gstTick", c.gst_tick);
    c.delta_bound = j.value("deltaBound", c.delta_bound);
    if (j.contains("preGst")) {
      const auto& p = j.at("preGst");
      c.pre_gst_drop = p.value("dropProbability", c.pre_gst_drop);
      c.pre_gst_max_delay = p.value("maxDelay", c.pre_gst_max_delay);
    }
    for (const auto& p : j.value("partitions", json::array())) {
      Partition part;
      part.from_tick = p.at("from").get<std::int64_t>();
      part.to_tick = p.at("to").get<std::int64_t>();
      part.sides = p.at("sides").get<std::vector<std::vector<std::string>>>();
      c.partitions.push_back(std::move(part));
    }
  } catch (const json::exception& e) {
    throw Error(std::string("malformed sim config: ") + e.what());
  }
  validate_sim_config(c);
  return c;
}

FaultScript parse_fault_script(std::string_view text) {
  FaultScript s;
  try {
    auto j = json::parse(text);
    for (const auto& a : j.value("actions", json::array())) {
      auto kind = a.at("kind").get<std::string>();
      if (kind == "crash") {
        s.crashes.push_back({a.at("node").get<std::string>(), a.at("tick").get<std::int64_t>()});
      } else if (kind == "byzantine") {
        ByzantineAction b;
        b.node = a.at("node").get<std::string>();
        b.mode = byzantine_mode_from_string(a.at("mode").get<std::string>());
        b.from_tick = a.value("from", std::int64_t{0});
        b.to_tick = a.value("to", std::int64_t{-1});
        s.byzantine.push_back(std::move(b));
      } else {
        throw Error("unknown fault action '" + kind + "'");
      }
    }
  } catch (const json::exception& e) {
    throw Error(std::string("malformed fault script: ") + e.what());
  }
  return s;
}

void validate_fault_script(const FaultScript& script, const std::vector<GroupMembership>& groups) {
  std::set<std::string> targeted;
  for (const auto& c : script.crashes) targeted.insert(c.node);
  for (const auto& b : script.byzantine) targeted.insert(b.node);
  for (const auto& g : groups) {
    int hit = 0;
    for (const auto& n : g.nodes) hit += targeted.count(n) ? 1 : 0;
    if (hit > g.f) {
      throw Error("fault script targets " + std::to_string(hit) + " members of group '" + g.group +
                  "' which tolerates f=" + std::to_string(g.f));
    }
  }
}

std::string format_trace(const std::vector<TraceRecord>& trace) {
  std::ostringstream out;
  for (const auto& r : trace) {
    out << r.tick << ' ' << r.kind << ' ' << r.src << ' ' << r.dst << ' ' << r.digest << ' '
        << r.msg << '\n';
  }
  return out.str();
}

Simulator::Simulator(SimConfig config, FaultScript script)
    : config_(std::move(config)), script_(std::move(script)), rng_(config_.seed) {
  validate_sim_config(config_);
}

Simulator::~Simulator() = default;

void Simulator::add_node(std::shared_ptr<Node> node) {
  const auto& id = node->id();
  if (index_.count(id)) throw Error("duplicate simulated node '" + id + "'");
  std::unique_ptr<Transport> t = std::make_unique<NodeTransport>(*this, id);
  for (const auto& b : script_.byzantine) {
    if (b.node != id) continue;
    auto active = [this, from = b.from_tick, to = b.to_tick] {
      return tick_ >= from && (to < 0 || tick_ < to);
    };
    t = std::make_unique<OwnedByzantine>(std::move(t), b.mode, *node, active);
  }
  index_[id] = nodes_.size();
  nodes_.push_back(node);
  transports_.push_back(std::move(t));
  node->attach(*transports_.back());
}

Node* Simulator::node(const std::string& id) const {
  auto it = index_.find(id);
  return it == index_.end() ? nullptr : nodes_[it->second].get();
}

void Simulator::at(std::int64_t tick, std::function<void()> action) {
  actions_.emplace(tick, std::move(action));
}

std::uint64_t Simulator::draw(std::uint64_t bound) { return rng_() % bound; }

bool Simulator::cut(const std::string& a, const std::string& b, std::int64_t tick) const {
  for (const auto& p : config_.partitions) {
    if (tick < p.from_tick || tick >= p.to_tick) continue;
    int sa = -1, sb = -1;
    for (std::size_t i = 0; i < p.sides.size(); ++i) {
      const auto& side = p.sides[i];
      if (std::find(side.begin(), side.end(), a) != side.end()) sa = static_cast<int>(i);
      if (std::find(side.begin(), side.end(), b) != side.end()) sb = static_cast<int>(i);
    }
    if (sa >= 0 && sb >= 0 && sa != sb) return true;
  }
  return false;
}

void Simulator::record(std::string kind, const std::string& src, const std::string& dst,
                       const std::string& digest, std::uint64_t msg) {
  if (tracing_) trace_.push_back({tick_, std::move(kind), src, dst, digest, msg});
}

void Simulator::enqueue(Envelope e) {
  const auto msg = next_seq_++;
  ++sent_;
  std::string digest = tracing_ ? envelope_digest(e) : std::string{};
  record("send", e.from_node, e.to_node, digest, msg);

  bool pre_gst = tick_ < config_.gst_tick;
  if (!index_.count(e.to_node) || cut(e.from_node, e.to_node, tick_)) {
    record("drop", e.from_node, e.to_node, digest, msg);
    return;
  }
  std::int64_t when;
  if (pre_gst) {
    // Drop decision is drawn even at probability 0 so that changing it
    // does not shift the rest of the random stream.
    bool drop = static_cast<double>(draw(1'000'000)) < config_.pre_gst_drop * 1'000'000.0;
    if (drop) {
      record("drop", e.from_node, e.to_node, digest, msg);
      return;
    }
    when = tick_ + 1 + static_cast<std::int64_t>(draw(config_.pre_gst_max_delay));
    when = std::min(when, config_.gst_tick + config_.delta_bound);
  } else {
    when = tick_ + 1 + static_cast<std::int64_t>(draw(config_.delta_bound));
  }
  auto& tail = link_tail_[{e.from_node, e.to_node}];
  when = std::max(when, tail);
  tail = when;
  queue_.push_back(Pending{when, msg, std::move(e)});
  std::push_heap(queue_.begin(), queue_.end(), std::greater<>{});
}

void Simulator::crash(const std::string& node) {
  if (crashed_.emplace(node, true).second) record("crash", node, "", "", 0);
}

void Simulator::run_until(std::int64_t until) {
  for (; tick_ < until; ++tick_) {
    // Crashes take effect before anything else in the tick.
    for (const auto& c : script_.crashes) {
      if (c.tick == tick_ && crashed_.emplace(c.node, true).second) {
        record("crash", c.node, "", "", 0);
      }
    }
    auto [lo, hi] = actions_.equal_range(tick_);
    std::vector<std::function<void()>> due;
    for (auto it = lo; it != hi; ++it) due.push_back(std::move(it->second));
    actions_.erase(lo, hi);

    while (!queue_.empty() && queue_.front().tick <= tick_) {
      std::pop_heap(queue_.begin(), queue_.end(), std::greater<>{});
      Pending p = std::move(queue_.back());
      queue_.pop_back();
      const auto& e = p.envelope;
      std::string digest = tracing_ ? envelope_digest(e) : std::string{};
      if (crashed(e.to_node) || crashed(e.from_node)) {
        record("drop", e.from_node, e.to_node, digest, p.seq);
        continue;
      }
      record("deliver", e.from_node, e.to_node, digest, p.seq);
      ++delivered_;
      nodes_[index_.at(e.to_node)]->on_message(e);
    }
    for (auto& a : due) a();
    for (auto& n : nodes_) {
      if (!crashed(n->id())) n->on_tick();
    }
  }
}

}  // namespace resa::harness
