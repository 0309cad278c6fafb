#include "resa/harness/byzantine.hpp"

#include <algorithm>

namespace resa::harness {

using order::ConsensusMessage;
using order::Phase;

std::string to_string(ByzantineMode m) {
  switch (m) {
    case ByzantineMode::kFlipPayloadByte: return "flip-payload-byte";
    case ByzantineMode::kEquivocatePropose: return "equivocate-propose";
    case ByzantineMode::kWrongDigestVote: return "wrong-digest-vote";
    case ByzantineMode::kMute: return "mute";
  }
  return "?";
}

ByzantineMode byzantine_mode_from_string(const std::string& s) {
  for (auto m : {ByzantineMode::kFlipPayloadByte, ByzantineMode::kEquivocatePropose,
                 ByzantineMode::kWrongDigestVote, ByzantineMode::kMute}) {
    if (to_string(m) == s) return m;
  }
  throw Error("unknown corruption mode '" + s + "'");
}

namespace {

void flip(Bytes& b) {
  if (b.empty()) {
    b.push_back(0x01);
  } else {
    b[0] ^= 0x01;
  }
}

bool flip_batch(order::Batch& batch) {
  if (batch.empty()) return false;
  flip(batch.front().payload);
  return true;
}

void resign(ConsensusMessage& m, const Node& node, const std::string& block) {
  if (auto signer = node.signer_for(block)) m.tag = signer->sign(m.signed_bytes());
}

}  // namespace

std::optional<Envelope> corrupt(ByzantineMode mode, Envelope e, const Node& node,
                                std::uint64_t counter) {
  if (mode == ByzantineMode::kMute) return std::nullopt;

  if (auto* ev = std::get_if<core::Event>(&e.body)) {
    if (mode == ByzantineMode::kFlipPayloadByte) flip(ev->payload);
    return e;
  }
  auto& msg = std::get<order::OrderMessage>(e.body);
  if (mode == ByzantineMode::kFlipPayloadByte) {
    // Tags and digests are left alone, so receivers can detect the damage.
    if (auto* m = std::get_if<ConsensusMessage>(&msg); m && m->batch) {
      flip_batch(*m->batch);
    } else if (auto* d = std::get_if<order::Decision>(&msg)) {
      flip_batch(d->batch);
    } else if (auto* r = std::get_if<order::OrderRequest>(&msg)) {
      flip(r->payload);
    }
    return e;
  }
  auto* m = std::get_if<ConsensusMessage>(&msg);
  if (!m) return e;
  if (mode == ByzantineMode::kEquivocatePropose) {
    bool proposal = m->phase == Phase::kPropose || (m->phase == Phase::kNewView && m->batch);
    if (proposal && m->batch && counter % 2 == 1) {
      auto& batch = *m->batch;
      if (batch.size() >= 2) {
        std::reverse(batch.begin(), batch.end());
      } else {
        batch.clear();
      }
      m->digest = order::batch_digest(batch);
      resign(*m, node, e.from_block);
    }
    return e;
  }
  // kWrongDigestVote
  if (m->phase == Phase::kWrite || m->phase == Phase::kAccept) {
    m->digest[0] ^= 0xff;
    resign(*m, node, e.from_block);
  }
  return e;
}

void ByzantineTransport::send(Envelope e) {
  if (!active_()) {
    inner_.send(std::move(e));
    return;
  }
  bool counted = false;
  if (auto* msg = std::get_if<order::OrderMessage>(&e.body)) {
    if (auto* m = std::get_if<ConsensusMessage>(msg)) {
      counted = m->phase == Phase::kPropose || m->phase == Phase::kNewView;
    }
  }
  auto out = corrupt(mode_, std::move(e), node_, counter_);
  if (counted) ++counter_;
  if (out) inner_.send(std::move(*out));
}

}  // namespace resa::harness
