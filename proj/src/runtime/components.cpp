#include "resa/runtime/components.hpp"

#include <algorithm>

#include "resa/core/crypto.hpp"

namespace resa::runtime {

using core::ComponentSpec;
using core::Direction;
using core::Emission;
using core::Event;
using core::TransitionResult;

namespace {

std::uint64_t read_u64(const Bytes& b) {
  if (b.empty()) return 0;
  ByteReader r(b);
  return r.u64();
}

Bytes write_u64(std::uint64_t v) {
  ByteWriter w;
  w.u64(v);
  return std::move(w).take();
}

std::vector<std::string> out_ports(const arch::ComponentDecl& decl) {
  std::vector<std::string> out;
  for (const auto& p : decl.ports) {
    if (p.direction == Direction::kOut) out.push_back(p.name);
  }
  return out;
}

std::string param(const arch::ComponentDecl& decl, const std::string& key, std::string fallback) {
  auto it = decl.params.find(key);
  return it == decl.params.end() ? fallback : it->second;
}

std::uint64_t param_u64(const arch::ComponentDecl& decl, const std::string& key,
                        std::uint64_t fallback) {
  auto it = decl.params.find(key);
  if (it == decl.params.end()) return fallback;
  try {
    return std::stoull(it->second);
  } catch (const std::exception&) {
    throw Error("component '" + decl.id + "': parameter '" + key + "' must be a non-negative integer");
  }
}

ComponentSpec base_spec(const arch::ComponentDecl& decl, const std::string& instance) {
  ComponentSpec spec;
  spec.id = instance;
  spec.ports = decl.ports;
  spec.initial_state = write_u64(0);
  return spec;
}

// Counts inputs and re-emits each payload on every out-port.
ComponentSpec forward_spec(const arch::ComponentDecl& decl, const std::string& instance,
                           std::uint64_t work) {
  auto spec = base_spec(decl, instance);
  auto outs = out_ports(decl);
  spec.transition = [outs, work](const Bytes& state, const Event& e) {
    TransitionResult r;
    r.state = write_u64(read_u64(state) + 1);
    if (work > 0) {
      auto d = sha256(e.payload);
      for (std::uint64_t i = 1; i < work; ++i) d = sha256(d);
      (void)d;
    }
    for (const auto& p : outs) r.emissions.push_back(Emission{p, e.payload});
    return r;
  };
  return spec;
}

}  // namespace

Bytes LoadGenState::encode() const {
  ByteWriter w;
  w.u64(sent).u64(in_flight).u64(received).i64(tokens_milli);
  return std::move(w).take();
}

LoadGenState LoadGenState::decode(std::span<const std::uint8_t> b) {
  ByteReader r(b);
  LoadGenState s;
  s.sent = r.u64();
  s.in_flight = r.u64();
  s.received = r.u64();
  s.tokens_milli = r.i64();
  return s;
}

Bytes loadgen_payload(std::uint64_t id, std::size_t size) {
  ByteWriter w;
  w.u64(id);
  Bytes out = std::move(w).take();
  for (std::size_t i = out.size(); i < size; ++i) {
    out.push_back(static_cast<std::uint8_t>((id + i) & 0xff));
  }
  return out;
}

std::optional<std::uint64_t> loadgen_id(std::span<const std::uint8_t> payload) {
  if (payload.size() < 8) return std::nullopt;
  ByteReader r(payload.subspan(0, 8));
  return r.u64();
}

Bytes clock_payload(std::int64_t tokens_milli) {
  ByteWriter w;
  w.i64(tokens_milli);
  return std::move(w).take();
}

Bytes transform_output(const std::string& salt, std::span<const std::uint8_t> payload) {
  ByteWriter w;
  w.str(salt).bytes(payload);
  auto d = sha256(w.data());
  return Bytes(d.begin(), d.begin() + 8);
}

bool transform_keeps(std::span<const std::uint8_t> output, std::uint64_t keep_mod) {
  if (keep_mod <= 1) return true;
  std::uint64_t v = 0;
  for (auto b : output) v = (v << 8) | b;
  return v % keep_mod == 0;
}

void ComponentTypes::add(const std::string& type, ComponentFactory factory) {
  factories_[type] = std::move(factory);
}

ComponentSpec ComponentTypes::make(const arch::ComponentDecl& decl, const std::string& instance) const {
  auto it = factories_.find(decl.type);
  if (it == factories_.end()) {
    throw Error("component '" + decl.id + "' has unknown type '" + decl.type + "'");
  }
  return it->second(decl, instance);
}

ComponentTypes ComponentTypes::with_builtins() {
  ComponentTypes t;
  auto fwd = [](const arch::ComponentDecl& d, const std::string& id) { return forward_spec(d, id, 0); };
  t.add("forward", fwd);
  t.add("reporter", fwd);
  t.add("processor", [](const arch::ComponentDecl& d, const std::string& id) {
    return forward_spec(d, id, param_u64(d, "work", 0));
  });
  t.add("counter", [](const arch::ComponentDecl& d, const std::string& id) {
    auto spec = base_spec(d, id);
    spec.transition = [](const Bytes& state, const Event&) {
      return TransitionResult{write_u64(read_u64(state) + 1), {}};
    };
    return spec;
  });
  t.add("transform", [](const arch::ComponentDecl& d, const std::string& id) {
    auto spec = base_spec(d, id);
    auto outs = out_ports(d);
    auto salt = param(d, "salt", d.id);
    auto keep = param_u64(d, "keep_mod", 1);
    spec.transition = [outs, salt, keep](const Bytes& state, const Event& e) {
      TransitionResult r;
      r.state = write_u64(read_u64(state) + 1);
      auto out = transform_output(salt, e.payload);
      if (transform_keeps(out, keep)) {
        for (const auto& p : outs) r.emissions.push_back(Emission{p, out});
      }
      return r;
    };
    return spec;
  });
  t.add("loadgenerator", [](const arch::ComponentDecl& d, const std::string& id) {
    ComponentSpec spec;
    spec.id = id;
    spec.ports = d.ports;
    spec.initial_state = LoadGenState{}.encode();
    const auto backlog = std::max<std::uint64_t>(1, param_u64(d, "backlog", 1));
    const auto total = param_u64(d, "total", 10'000);
    const auto size = param_u64(d, "payload", 150);
    const auto rate = param_u64(d, "rate", 0);
    spec.transition = [=](const Bytes& state, const Event& e) {
      auto s = LoadGenState::decode(state);
      if (e.target_port == "feedback") {
        if (s.in_flight > 0) --s.in_flight;
        ++s.received;
      } else if (e.target_port == "clock" && rate > 0) {
        ByteReader r(e.payload);
        auto add = r.i64();
        // No accrual beyond one clock period: the offered rate stays flat
        // after a stall instead of bursting.
        s.tokens_milli = std::min(s.tokens_milli + add, std::max<std::int64_t>(add, 1000));
      }
      TransitionResult r;
      while (s.in_flight < backlog && s.sent < total && (rate == 0 || s.tokens_milli >= 1000)) {
        r.emissions.push_back(Emission{"out", loadgen_payload(s.sent, size)});
        ++s.sent;
        ++s.in_flight;
        if (rate > 0) s.tokens_milli -= 1000;
      }
      r.state = s.encode();
      return r;
    };
    return spec;
  });
  return t;
}

}  // namespace resa::runtime
