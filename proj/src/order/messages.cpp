#include "resa/order/messages.hpp"

namespace resa::order {

namespace {

enum class Kind : std::uint8_t { kRequest = 1, kConsensus = 2, kAck = 3, kFetch = 4, kDecision = 5 };

// Every list element takes at least one byte, which bounds bogus counts.
std::uint32_t list_size(ByteReader& r) {
  auto n = r.u32();
  if (n > r.remaining()) throw DecodeError("list length exceeds input");
  return n;
}

Digest read_digest(ByteReader& r) {
  auto raw = r.raw(32);
  Digest d;
  std::copy(raw.begin(), raw.end(), d.begin());
  return d;
}

void encode_address(ByteWriter& w, const Address& a) { w.str(a.node).str(a.block); }

Address decode_address(ByteReader& r) {
  Address a;
  a.node = r.str();
  a.block = r.str();
  return a;
}

void encode_batch(ByteWriter& w, const Batch& b) {
  w.u32(static_cast<std::uint32_t>(b.size()));
  for (const auto& req : b) encode_request(w, req);
}

Batch decode_batch(ByteReader& r) {
  Batch b;
  auto n = list_size(r);
  b.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) b.push_back(decode_request(r));
  return b;
}

void encode_votes(ByteWriter& w, const std::vector<std::pair<std::uint32_t, Tag>>& votes) {
  w.u32(static_cast<std::uint32_t>(votes.size()));
  for (const auto& [who, tag] : votes) w.u32(who).bytes(tag);
}

std::vector<std::pair<std::uint32_t, Tag>> decode_votes(ByteReader& r) {
  std::vector<std::pair<std::uint32_t, Tag>> v;
  auto n = list_size(r);
  for (std::uint32_t i = 0; i < n; ++i) {
    auto who = r.u32();
    v.emplace_back(who, r.bytes());
  }
  return v;
}

void encode_proof(ByteWriter& w, const PreparedProof& p) {
  w.u64(p.view).u64(p.seq).raw(p.digest);
  encode_batch(w, p.batch);
  encode_votes(w, p.writes);
}

PreparedProof decode_proof(ByteReader& r) {
  PreparedProof p;
  p.view = r.u64();
  p.seq = r.u64();
  p.digest = read_digest(r);
  p.batch = decode_batch(r);
  p.writes = decode_votes(r);
  return p;
}

// Everything but the batch body and the tag.
void encode_consensus_header(ByteWriter& w, const ConsensusMessage& m) {
  w.u8(static_cast<std::uint8_t>(m.phase)).u64(m.view).u64(m.seq).u32(m.sender).raw(m.digest);
  w.u64(m.next_execute);
  w.boolean(m.prepared.has_value());
  if (m.prepared) encode_proof(w, *m.prepared);
  w.u32(static_cast<std::uint32_t>(m.view_changes.size()));
  for (const auto& vc : m.view_changes) encode_consensus(w, vc);
}

}  // namespace

std::string to_string(Phase p) {
  switch (p) {
    case Phase::kPropose: return "PROPOSE";
    case Phase::kWrite: return "WRITE";
    case Phase::kAccept: return "ACCEPT";
    case Phase::kViewChange: return "VIEWCHANGE";
    case Phase::kNewView: return "NEWVIEW";
  }
  return "?";
}

Bytes OrderRequest::signed_bytes() const {
  ByteWriter w;
  w.str("req").str(client).u64(client_seq);
  encode_address(w, reply_to);
  w.bytes(payload);
  return std::move(w).take();
}

Digest batch_digest(const Batch& batch) {
  ByteWriter w;
  encode_batch(w, batch);
  return sha256(w.data());
}

Bytes ConsensusMessage::signed_bytes() const {
  ByteWriter w;
  w.str("cons");
  encode_consensus_header(w, *this);
  return std::move(w).take();
}

Bytes OrderAck::signed_bytes() const {
  ByteWriter w;
  w.str("ack").u32(replica).str(client).u64(client_seq).u64(consensus_seq);
  return std::move(w).take();
}

Bytes Fetch::signed_bytes() const {
  ByteWriter w;
  w.str("fetch").u32(sender).u64(from_seq);
  return std::move(w).take();
}

void encode_request(ByteWriter& w, const OrderRequest& r) {
  w.str(r.client).u64(r.client_seq);
  encode_address(w, r.reply_to);
  w.bytes(r.payload).bytes(r.tag);
}

OrderRequest decode_request(ByteReader& r) {
  OrderRequest q;
  q.client = r.str();
  q.client_seq = r.u64();
  q.reply_to = decode_address(r);
  q.payload = r.bytes();
  q.tag = r.bytes();
  return q;
}

void encode_consensus(ByteWriter& w, const ConsensusMessage& m) {
  encode_consensus_header(w, m);
  w.boolean(m.batch.has_value());
  if (m.batch) encode_batch(w, *m.batch);
  w.bytes(m.tag);
}

ConsensusMessage decode_consensus(ByteReader& r) {
  ConsensusMessage m;
  auto phase = r.u8();
  if (phase < 1 || phase > 5) throw DecodeError("unknown consensus phase");
  m.phase = static_cast<Phase>(phase);
  m.view = r.u64();
  m.seq = r.u64();
  m.sender = r.u32();
  m.digest = read_digest(r);
  m.next_execute = r.u64();
  if (r.boolean()) m.prepared = decode_proof(r);
  auto n = list_size(r);
  for (std::uint32_t i = 0; i < n; ++i) m.view_changes.push_back(decode_consensus(r));
  if (r.boolean()) m.batch = decode_batch(r);
  m.tag = r.bytes();
  return m;
}

Bytes encode_order_message(const OrderMessage& msg) {
  ByteWriter w;
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, OrderRequest>) {
          w.u8(static_cast<std::uint8_t>(Kind::kRequest));
          encode_request(w, m);
        } else if constexpr (std::is_same_v<T, ConsensusMessage>) {
          w.u8(static_cast<std::uint8_t>(Kind::kConsensus));
          encode_consensus(w, m);
        } else if constexpr (std::is_same_v<T, OrderAck>) {
          w.u8(static_cast<std::uint8_t>(Kind::kAck));
          w.u32(m.replica).str(m.client).u64(m.client_seq).u64(m.consensus_seq).bytes(m.tag);
        } else if constexpr (std::is_same_v<T, Fetch>) {
          w.u8(static_cast<std::uint8_t>(Kind::kFetch));
          w.u32(m.sender).u64(m.from_seq).bytes(m.tag);
        } else {
          w.u8(static_cast<std::uint8_t>(Kind::kDecision));
          w.u64(m.view).u64(m.seq).raw(m.digest);
          encode_batch(w, m.batch);
          encode_votes(w, m.accepts);
        }
      },
      msg);
  return std::move(w).take();
}

OrderMessage decode_order_message(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  OrderMessage out;
  switch (static_cast<Kind>(r.u8())) {
    case Kind::kRequest: out = decode_request(r); break;
    case Kind::kConsensus: out = decode_consensus(r); break;
    case Kind::kAck: {
      OrderAck a;
      a.replica = r.u32();
      a.client = r.str();
      a.client_seq = r.u64();
      a.consensus_seq = r.u64();
      a.tag = r.bytes();
      out = a;
      break;
    }
    case Kind::kFetch: {
      Fetch f;
      f.sender = r.u32();
      f.from_seq = r.u64();
      f.tag = r.bytes();
      out = f;
      break;
    }
    case Kind::kDecision: {
      Decision d;
      d.view = r.u64();
      d.seq = r.u64();
      d.digest = read_digest(r);
      d.batch = decode_batch(r);
      d.accepts = decode_votes(r);
      out = d;
      break;
    }
    default: throw DecodeError("unknown order message kind");
  }
  r.expect_done();
  return out;
}

std::string replica_principal(const std::string& group, std::uint32_t index) {
  return group + "#" + std::to_string(index);
}

ConsensusMessage vote_header(Phase phase, std::uint64_t view, std::uint64_t seq,
                             std::uint32_t sender, const Digest& digest) {
  ConsensusMessage m;
  m.phase = phase;
  m.view = view;
  m.seq = seq;
  m.sender = sender;
  m.digest = digest;
  return m;
}

}  // namespace resa::order
