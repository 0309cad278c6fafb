#include "resa/order/frontend.hpp"

namespace resa::order {

Frontend::Frontend(std::string id, Address self, GroupConfig group,
                   std::shared_ptr<const Signer> signer, std::shared_ptr<const Verifier> verifier,
                   FrontendOptions options, Send send)
    : id_(std::move(id)),
      self_(std::move(self)),
      group_(std::move(group)),
      signer_(std::move(signer)),
      verifier_(std::move(verifier)),
      options_(options),
      send_(std::move(send)) {}

void Frontend::multicast(const OrderRequest& r) {
  for (const auto& replica : group_.replicas) send_(replica, r);
}

std::uint64_t Frontend::invoke_ordered(Bytes payload, std::int64_t now_us) {
  OrderRequest r;
  r.client = id_;
  r.client_seq = next_seq_++;
  r.reply_to = self_;
  r.payload = std::move(payload);
  r.tag = signer_->sign(r.signed_bytes());
  auto& o = outstanding_[r.client_seq];
  o.request = r;
  o.first_sent = o.last_sent = now_us;
  multicast(r);
  return r.client_seq;
}

void Frontend::on_ack(const OrderAck& ack, std::int64_t now_us) {
  if (ack.client != id_ || ack.replica >= group_.replicas.size() ||
      !verifier_->verify(replica_principal(group_.group, ack.replica), ack.signed_bytes(), ack.tag)) {
    ++rejected_acks_;
    return;
  }
  auto it = outstanding_.find(ack.client_seq);
  if (it == outstanding_.end()) return;
  it->second.acks.insert(ack.replica);
  if (it->second.acks.size() >= static_cast<std::size_t>(ack_threshold(group_.model, group_.f))) {
    auto seq = it->first;
    outstanding_.erase(it);
    ++completed_;
    if (on_complete_) on_complete_(seq, now_us);
  }
}

void Frontend::on_tick(std::int64_t now_us) {
  std::vector<std::uint64_t> expired;
  for (auto& [seq, o] : outstanding_) {
    if (now_us - o.first_sent >= options_.give_up_us) {
      expired.push_back(seq);
    } else if (now_us - o.last_sent >= options_.retransmit_us) {
      o.last_sent = now_us;
      multicast(o.request);
    }
  }
  for (auto seq : expired) {
    outstanding_.erase(seq);
    ++failed_;
    if (on_failure_) on_failure_(seq, now_us);
  }
}

}  // namespace resa::order
