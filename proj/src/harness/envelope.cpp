#include "resa/core/crypto.hpp"
#include "resa/harness/node.hpp"

namespace resa::harness {

namespace {
constexpr std::uint8_t kEventBody = 1;
constexpr std::uint8_t kOrderBody = 2;
}  // namespace

Bytes encode_envelope(const Envelope& e) {
  ByteWriter w;
  w.str(e.from_node).str(e.from_block).str(e.to_node).str(e.to_block);
  if (const auto* ev = std::get_if<core::Event>(&e.body)) {
    w.u8(kEventBody).bytes(core::encode(*ev));
  } else {
    w.u8(kOrderBody).bytes(order::encode_order_message(std::get<order::OrderMessage>(e.body)));
  }
  return std::move(w).take();
}

Envelope decode_envelope(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  Envelope e;
  e.from_node = r.str();
  e.from_block = r.str();
  e.to_node = r.str();
  e.to_block = r.str();
  auto kind = r.u8();
  auto body = r.bytes();
  if (kind == kEventBody) {
    e.body = core::decode_event(body);
  } else if (kind == kOrderBody) {
    e.body = order::decode_order_message(body);
  } else {
    throw DecodeError("unknown envelope body kind");
  }
  r.expect_done();
  return e;
}

std::string envelope_digest(const Envelope& e) {
  auto d = sha256(encode_envelope(e));
  return to_hex(std::span<const std::uint8_t>(d.data(), 8));
}

std::string body_kind(const Body& b) {
  if (std::holds_alternative<core::Event>(b)) return "event";
  const auto& m = std::get<order::OrderMessage>(b);
  switch (m.index()) {
    case 0: return "request";
    case 1: return order::to_string(std::get<order::ConsensusMessage>(m).phase);
    case 2: return "ack";
    case 3: return "fetch";
    default: return "decision";
  }
}

}  // namespace resa::harness
