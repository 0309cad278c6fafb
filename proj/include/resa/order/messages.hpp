#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "resa/core/bytes.hpp"
#include "resa/core/crypto.hpp"
#include "resa/order/auth.hpp"

namespace resa::order {

// Network address of a building block: hosting node plus block id.
struct Address {
  std::string node;
  std::string block;
  auto operator<=>(const Address&) const = default;
};

// A client request as created by a frontend.
struct OrderRequest {
  std::string client;  // frontend id, also the signing principal
  std::uint64_t client_seq = 0;
  Address reply_to;
  Bytes payload;  // encoded core::Event
  Tag tag;

  Bytes signed_bytes() const;
  bool operator==(const OrderRequest&) const = default;
};

using Batch = std::vector<OrderRequest>;

Digest batch_digest(const Batch& batch);

enum class Phase : std::uint8_t {
  kPropose = 1,
  kWrite = 2,
  kAccept = 3,
  kViewChange = 4,
  kNewView = 5,
};

std::string to_string(Phase p);

// q signed WRITE votes for (view, seq, digest) plus the batch itself.
struct PreparedProof {
  std::uint64_t view = 0;
  std::uint64_t seq = 0;
  Digest digest{};
  Batch batch;
  std::vector<std::pair<std::uint32_t, Tag>> writes;
  bool operator==(const PreparedProof&) const = default;
};

struct ConsensusMessage {
  Phase phase = Phase::kPropose;
  std::uint64_t view = 0;
  std::uint64_t seq = 0;
  std::uint32_t sender = 0;
  Digest digest{};
  // PROPOSE, ACCEPT and NEWVIEW carry the batch; it is covered by `digest`,
  // not by the tag.
  std::optional<Batch> batch;
  // VIEWCHANGE: next consensus instance the sender would execute, and its
  // highest prepared certificate for that instance.
  std::uint64_t next_execute = 0;
  std::optional<PreparedProof> prepared;
  // NEWVIEW: the view-change quorum justifying the new view.
  std::vector<ConsensusMessage> view_changes;
  Tag tag;

  Bytes signed_bytes() const;
  bool operator==(const ConsensusMessage&) const = default;
};

struct OrderAck {
  std::uint32_t replica = 0;
  std::string client;
  std::uint64_t client_seq = 0;
  std::uint64_t consensus_seq = 0;
  Tag tag;

  Bytes signed_bytes() const;
  bool operator==(const OrderAck&) const = default;
};

// Catch-up: ask a peer for decided instances starting at `from_seq`.
struct Fetch {
  std::uint32_t sender = 0;
  std::uint64_t from_seq = 0;
  Tag tag;

  Bytes signed_bytes() const;
  bool operator==(const Fetch&) const = default;
};

// Self-certifying decision: q signed ACCEPT votes over (view, seq, digest).
struct Decision {
  std::uint64_t view = 0;
  std::uint64_t seq = 0;
  Digest digest{};
  Batch batch;
  std::vector<std::pair<std::uint32_t, Tag>> accepts;
  bool operator==(const Decision&) const = default;
};

using OrderMessage = std::variant<OrderRequest, ConsensusMessage, OrderAck, Fetch, Decision>;

void encode_request(ByteWriter& w, const OrderRequest& r);
OrderRequest decode_request(ByteReader& r);
void encode_consensus(ByteWriter& w, const ConsensusMessage& m);
ConsensusMessage decode_consensus(ByteReader& r);

Bytes encode_order_message(const OrderMessage& m);
OrderMessage decode_order_message(std::span<const std::uint8_t> bytes);

// Principal names used for signing.
std::string replica_principal(const std::string& group, std::uint32_t index);

// Header of a vote, reconstructed for certificate checks.
ConsensusMessage vote_header(Phase phase, std::uint64_t view, std::uint64_t seq,
                             std::uint32_t sender, const Digest& digest);

}  // namespace resa::order
