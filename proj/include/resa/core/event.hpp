#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>

#include "resa/core/bytes.hpp"

namespace resa::core {

// Identity of an event: the (sender, sender port, seq) triple. Dedup and
// consolidation match on this key.
struct EventId {
  std::string sender;
  std::string port;
  std::uint64_t seq = 0;

  auto operator<=>(const EventId&) const = default;
};

struct Event {
  std::string sender;
  std::string sender_port;
  std::uint64_t seq = 0;
  Bytes payload;
  // Set only when the event was emitted by a member of a replication group.
  std::optional<std::uint32_t> origin_replica;
  // Filled in by routing.
  std::string target;
  std::string target_port;

  EventId id() const { return {sender, sender_port, seq}; }

  bool operator==(const Event&) const = default;
};

Bytes encode(const Event& e);
Event decode_event(std::span<const std::uint8_t> bytes);

// Endpoint of a connection: a component (or building block) id plus a port.
struct Endpoint {
  std::string component;
  std::string port;

  auto operator<=>(const Endpoint&) const = default;
  std::string str() const { return component + "." + port; }
};

enum class Technology { kLocal, kSocket, kTotalOrderMulticast };

std::string to_string(Technology t);
Technology technology_from_string(const std::string& s);

struct Connection {
  Endpoint source;
  Endpoint target;
  Technology technology = Technology::kLocal;

  auto operator<=>(const Connection&) const = default;
};

}  // namespace resa::core
