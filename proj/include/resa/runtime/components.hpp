#pragma once

#include <functional>
#include <map>
#include <string>

#include "resa/arch/model.hpp"
#include "resa/core/component.hpp"

namespace resa::runtime {

// Builds the state machine of one component instance from its declaration.
// Replicas are built from their base component's declaration.
using ComponentFactory =
    std::function<core::ComponentSpec(const arch::ComponentDecl& decl, const std::string& instance)>;

// Named component behaviours. Built-in types:
//   forward      re-emits every input payload on all out-ports
//   processor    like forward; param "work" = extra hashing rounds per event
//   reporter     like forward (feeds events back to a load generator)
//   counter      counts inputs, emits nothing
//   transform    emits a payload-determined hash on all out-ports; param
//                "salt", param "keep_mod" keeps only payloads whose hash is
//                divisible by it
//   loadgenerator closed-loop generator, see below
class ComponentTypes {
 public:
  static ComponentTypes with_builtins();

  void add(const std::string& type, ComponentFactory factory);
  bool contains(const std::string& type) const { return factories_.count(type) > 0; }
  core::ComponentSpec make(const arch::ComponentDecl& decl, const std::string& instance) const;

 private:
  std::map<std::string, ComponentFactory> factories_;
};

// Load generator ports: in "start", "feedback", "clock"; out "out".
// Params: backlog (max in flight, default 1), total (events, default 10000),
// payload (bytes, default 150), rate (events/s, 0 = unlimited). With a rate,
// each "clock" event carries the token budget (in thousandths of an event)
// accrued since the previous clock event.
struct LoadGenState {
  std::uint64_t sent = 0;
  std::uint64_t in_flight = 0;
  std::uint64_t received = 0;
  std::int64_t tokens_milli = 0;

  Bytes encode() const;
  static LoadGenState decode(std::span<const std::uint8_t> b);
};

// Payload of generated event `id`: 8-byte big-endian id followed by filler.
Bytes loadgen_payload(std::uint64_t id, std::size_t size);
// Id carried by a generated payload; nullopt if too short.
std::optional<std::uint64_t> loadgen_id(std::span<const std::uint8_t> payload);

Bytes clock_payload(std::int64_t tokens_milli);

// Output of the transform type for `payload`.
Bytes transform_output(const std::string& salt, std::span<const std::uint8_t> payload);
bool transform_keeps(std::span<const std::uint8_t> output, std::uint64_t keep_mod);

}  // namespace resa::runtime
