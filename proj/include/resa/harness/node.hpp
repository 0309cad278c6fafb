#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <variant>

#include "resa/core/event.hpp"
#include "resa/order/messages.hpp"

namespace resa::harness {

using Body = std::variant<core::Event, order::OrderMessage>;

// Unit of network transfer between nodes.
struct Envelope {
  std::string from_node;
  std::string from_block;
  std::string to_node;
  std::string to_block;
  Body body;

  bool operator==(const Envelope&) const = default;
};

Bytes encode_envelope(const Envelope& e);
Envelope decode_envelope(std::span<const std::uint8_t> bytes);
// Short hex digest used in traces.
std::string envelope_digest(const Envelope& e);
std::string body_kind(const Body& b);

class Transport {
 public:
  virtual ~Transport() = default;
  virtual void send(Envelope e) = 0;
  virtual std::int64_t now_us() const = 0;
};

// A sequential reactor. The transport delivers one message at a time and
// calls on_tick periodically.
class Node {
 public:
  virtual ~Node() = default;
  virtual const std::string& id() const = 0;
  virtual void attach(Transport& transport) = 0;
  virtual void on_message(const Envelope& e) = 0;
  virtual void on_tick() = 0;
  // Signer of the block hosted here, if any (used by corruption wrappers,
  // which may only sign as their own node).
  virtual std::shared_ptr<const order::Signer> signer_for(const std::string& block) const {
    (void)block;
    return nullptr;
  }
};

}  // namespace resa::harness
