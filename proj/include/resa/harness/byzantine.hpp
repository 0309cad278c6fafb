#pragma once

#include <functional>
#include <optional>
#include <string>

#include "resa/harness/node.hpp"

namespace resa::harness {

enum class ByzantineMode {
  kFlipPayloadByte,
  kEquivocatePropose,
  kWrongDigestVote,
  kMute,
};

std::string to_string(ByzantineMode m);
// Throws resa::Error on an unknown mode name.
ByzantineMode byzantine_mode_from_string(const std::string& s);

// Applies the corruption to one outgoing envelope. Returns nothing when the
// message is suppressed. Re-signing uses only `node`'s own keys.
std::optional<Envelope> corrupt(ByzantineMode mode, Envelope e, const Node& node,
                                std::uint64_t counter);

// Wraps a node's outgoing message stream. Incoming processing is untouched.
class ByzantineTransport : public Transport {
 public:
  ByzantineTransport(Transport& inner, ByzantineMode mode, const Node& node,
                     std::function<bool()> active)
      : inner_(inner), mode_(mode), node_(node), active_(std::move(active)) {}

  void send(Envelope e) override;
  std::int64_t now_us() const override { return inner_.now_us(); }

 private:
  Transport& inner_;
  ByzantineMode mode_;
  const Node& node_;
  std::function<bool()> active_;
  std::uint64_t counter_ = 0;
};

}  // namespace resa::harness
