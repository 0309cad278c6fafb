#include "resa/order/replica.hpp"

#include <algorithm>

namespace resa::order {

namespace {

// Instances further ahead than this are not buffered; catch-up covers them.
constexpr std::uint64_t kWindow = 256;
constexpr std::uint64_t kFetchChunk = 32;

std::optional<PreparedProof> select_prepared(const std::vector<ConsensusMessage>& vcs,
                                             std::uint64_t seq) {
  std::optional<PreparedProof> best;
  for (const auto& vc : vcs) {
    if (!vc.prepared || vc.prepared->seq != seq) continue;
    if (!best || vc.prepared->view > best->view) best = vc.prepared;
  }
  return best;
}

}  // namespace

int order_quorum(FaultModel model, int n, int f) {
  if (model == FaultModel::kBFT) return (n + f + 2) / 2;
  return n / 2 + 1;
}

int ack_threshold(FaultModel model, int f) {
  return model == FaultModel::kBFT ? f + 1 : 1;
}

bool logs_consistent(const DeliveryLog& a, const DeliveryLog& b) {
  std::size_t k = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < k; ++i) {
    if (a[i].seq != b[i].seq || a[i].digest != b[i].digest) return false;
  }
  return true;
}

Replica::Replica(GroupConfig group, std::uint32_t index, std::shared_ptr<const Signer> signer,
                 std::shared_ptr<const Verifier> verifier, ReplicaOptions options, Send send)
    : group_(std::move(group)),
      index_(index),
      signer_(std::move(signer)),
      verifier_(std::move(verifier)),
      options_(options),
      send_(std::move(send)) {
  if (static_cast<int>(group_.replicas.size()) != group_.n || index_ >= group_.replicas.size()) {
    throw Error("replica configuration of group '" + group_.group + "' is inconsistent");
  }
}

void Replica::on_message(const OrderMessage& msg, std::int64_t now_us) {
  now_ = now_us;
  handle(msg);
  flush_self();
}

void Replica::handle(const OrderMessage& msg) {
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, OrderRequest>) {
          handle_request(m);
        } else if constexpr (std::is_same_v<T, ConsensusMessage>) {
          handle_consensus(m);
        } else if constexpr (std::is_same_v<T, Fetch>) {
          handle_fetch(m);
        } else if constexpr (std::is_same_v<T, Decision>) {
          handle_decision(m);
        }
      },
      msg);
}

void Replica::flush_self() {
  while (!self_queue_.empty()) {
    auto m = std::move(self_queue_.front());
    self_queue_.pop_front();
    handle_consensus(m);
  }
}

ConsensusMessage Replica::sign(ConsensusMessage m) const {
  m.sender = index_;
  m.tag = signer_->sign(m.signed_bytes());
  return m;
}

void Replica::broadcast(const ConsensusMessage& m, bool remember) {
  for (std::uint32_t i = 0; i < group_.replicas.size(); ++i) {
    if (i == index_) {
      self_queue_.push_back(m);
    } else {
      send_(group_.replicas[i], m);
    }
  }
  if (remember) resend_.push_back(m);
}

void Replica::send_to(std::uint32_t replica, const OrderMessage& m) {
  send_(group_.replicas[replica], m);
}

bool Replica::verify_batch_requests(const Batch& batch) const {
  return std::all_of(batch.begin(), batch.end(), [&](const OrderRequest& r) {
    return verifier_->verify(r.client, r.signed_bytes(), r.tag);
  });
}

void Replica::handle_request(const OrderRequest& req) {
  if (!verifier_->verify(req.client, req.signed_bytes(), req.tag)) {
    ++stats_.rejected;
    return;
  }
  RequestKey key{req.client, req.client_seq};
  auto next = client_next_.find(req.client);
  if (next != client_next_.end() && req.client_seq < next->second) {
    // Already executed; the acknowledgement may have been lost.
    OrderAck ack{index_, req.client, req.client_seq, 0, {}};
    ack.tag = signer_->sign(ack.signed_bytes());
    send_(req.reply_to, ack);
    return;
  }
  if (pending_.count(key)) return;
  auto held = held_.find(req.client);
  if (held != held_.end() && held->second.count(req.client_seq)) return;

  pending_[key] = PendingEntry{req, now_};
  arrival_order_[arrivals_] = key;
  arrival_index_[key] = arrivals_++;
  maybe_propose();
}

void Replica::maybe_propose() {
  if (!is_leader() || proposing_ || pending_.empty()) return;
  auto inst = instances_.find(next_exec_);
  if (inst != instances_.end() && inst->second.proposals.count(view_)) return;

  Batch batch;
  for (const auto& [_, key] : arrival_order_) {
    if (batch.size() >= options_.max_batch) break;
    batch.push_back(pending_.at(key).request);
  }
  ConsensusMessage m;
  m.phase = Phase::kPropose;
  m.view = view_;
  m.seq = next_exec_;
  m.digest = batch_digest(batch);
  m.batch = std::move(batch);
  proposing_ = true;
  broadcast(sign(std::move(m)));
}

bool Replica::verify_consensus(const ConsensusMessage& m) const {
  if (m.sender >= group_.replicas.size()) return false;
  return verifier_->verify(replica_principal(group_.group, m.sender), m.signed_bytes(), m.tag);
}

void Replica::handle_consensus(const ConsensusMessage& m) {
  if (!verify_consensus(m)) {
    ++stats_.rejected;
    return;
  }
  switch (m.phase) {
    case Phase::kPropose: handle_propose(m); break;
    case Phase::kWrite:
    case Phase::kAccept: handle_vote(m); break;
    case Phase::kViewChange: handle_view_change(m); break;
    case Phase::kNewView: handle_new_view(m); break;
  }
}

void Replica::handle_propose(const ConsensusMessage& m) {
  if (m.sender != group_.leader(m.view) || !m.batch || batch_digest(*m.batch) != m.digest) {
    ++stats_.rejected;
    return;
  }
  if (m.seq < next_exec_) {
    peer_behind(m.sender, m.seq);
    return;
  }
  if (m.seq > next_exec_ + kWindow) {
    we_are_behind(m.sender);
    return;
  }
  if (!verify_batch_requests(*m.batch)) {
    ++stats_.rejected;
    return;
  }
  auto& inst = instances_[m.seq];
  auto it = inst.proposals.find(m.view);
  if (it != inst.proposals.end()) {
    if (it->second.first != m.digest) ++stats_.equivocations;
    return;
  }
  inst.proposals[m.view] = {m.digest, *m.batch};
  inst.bodies[m.digest] = *m.batch;
  if (m.seq > next_exec_) {
    we_are_behind(m.sender);
    return;
  }
  evaluate(m.seq);
}

void Replica::handle_vote(const ConsensusMessage& m) {
  if (m.phase == Phase::kAccept && m.batch && batch_digest(*m.batch) != m.digest) {
    ++stats_.rejected;
    return;
  }
  if (m.seq < next_exec_) {
    peer_behind(m.sender, m.seq);
    return;
  }
  if (m.seq > next_exec_ + kWindow) {
    we_are_behind(m.sender);
    return;
  }
  auto& inst = instances_[m.seq];
  VoteKey key{m.view, m.digest};
  if (m.phase == Phase::kWrite) {
    inst.writes[key][m.sender] = m.tag;
  } else {
    inst.accepts[key][m.sender] = m.tag;
    if (m.batch) inst.bodies.emplace(m.digest, *m.batch);
  }
  if (m.seq > next_exec_) {
    we_are_behind(m.sender);
    return;
  }
  evaluate(m.seq);
}

void Replica::evaluate(std::uint64_t seq) {
  if (seq != next_exec_) return;
  auto found = instances_.find(seq);
  if (found == instances_.end()) return;
  auto& inst = found->second;
  const auto q = static_cast<std::size_t>(group_.quorum());

  for (const auto& [key, voters] : inst.accepts) {
    if (voters.size() < q) continue;
    auto body = inst.bodies.find(key.second);
    if (body == inst.bodies.end()) continue;
    auto view = key.first;
    auto digest = key.second;
    auto batch = body->second;
    auto votes = voters;
    decide(seq, view, digest, batch, votes);
    return;
  }
  if (!installed_) return;

  auto prop = inst.proposals.find(view_);
  if (prop == inst.proposals.end()) return;
  const auto& [digest, batch] = prop->second;
  if (!inst.write_sent.count(view_)) {
    inst.write_sent.insert(view_);
    broadcast(sign(vote_header(Phase::kWrite, view_, seq, index_, digest)));
    return;
  }
  auto writes = inst.writes.find({view_, digest});
  if (writes != inst.writes.end() && writes->second.size() >= q && !inst.accept_sent.count(view_)) {
    inst.accept_sent.insert(view_);
    PreparedProof proof{view_, seq, digest, batch, {}};
    for (const auto& [who, tag] : writes->second) {
      if (proof.writes.size() == q) break;
      proof.writes.emplace_back(who, tag);
    }
    inst.prepared = std::move(proof);
    auto accept = vote_header(Phase::kAccept, view_, seq, index_, digest);
    accept.batch = batch;
    broadcast(sign(std::move(accept)));
  }
}

void Replica::decide(std::uint64_t seq, std::uint64_t view, const Digest& digest,
                     const Batch& batch, const std::map<std::uint32_t, Tag>& accepts) {
  Decision d{view, seq, digest, batch, {}};
  for (const auto& [who, tag] : accepts) {
    if (d.accepts.size() == static_cast<std::size_t>(group_.quorum())) break;
    d.accepts.emplace_back(who, tag);
  }
  decided_[seq] = std::move(d);

  DeliveredBatch entry{seq, view, digest, {}};
  for (const auto& r : batch) {
    RequestKey key{r.client, r.client_seq};
    entry.requests.push_back(key);
    if (pending_.erase(key)) {
      auto idx = arrival_index_.find(key);
      arrival_order_.erase(idx->second);
      arrival_index_.erase(idx);
    }
  }
  log_.push_back(std::move(entry));
  instances_.erase(seq);
  ++next_exec_;
  ++stats_.decided;
  proposing_ = false;
  last_progress_ = now_;
  resend_.clear();

  exec_queue_.push_back(seq);
  execute_ready();

  if (buffered_new_view_ && buffered_new_view_->seq <= next_exec_) {
    auto nv = std::move(*buffered_new_view_);
    buffered_new_view_.reset();
    install_new_view(nv);
    return;
  }
  evaluate(next_exec_);
  maybe_propose();
  try_new_view();
}

void Replica::execute_ready() {
  auto run = [&](const OrderRequest& r, std::uint64_t seq) {
    ready_.push_back({r, seq});
    ++stats_.executed;
    OrderAck ack{index_, r.client, r.client_seq, seq, {}};
    ack.tag = signer_->sign(ack.signed_bytes());
    send_(r.reply_to, ack);
  };
  while (!exec_queue_.empty() && ready_.size() < options_.handoff_capacity) {
    auto seq = exec_queue_.front();
    exec_queue_.pop_front();
    for (const auto& r : decided_.at(seq).batch) {
      auto& next = client_next_[r.client];
      if (r.client_seq < next) continue;
      if (r.client_seq > next) {
        held_[r.client].emplace(r.client_seq, std::make_pair(r, seq));
        continue;
      }
      run(r, seq);
      ++next;
      auto held = held_.find(r.client);
      while (held != held_.end()) {
        auto h = held->second.find(next);
        if (h == held->second.end()) break;
        run(h->second.first, h->second.second);
        held->second.erase(h);
        ++next;
      }
      if (held != held_.end() && held->second.empty()) held_.erase(held);
    }
  }
}

std::vector<Executed> Replica::drain_executed(std::size_t max) {
  std::vector<Executed> out;
  while (!ready_.empty() && out.size() < max) {
    out.push_back(std::move(ready_.front()));
    ready_.pop_front();
  }
  execute_ready();
  return out;
}

void Replica::on_tick(std::int64_t now_us) {
  now_ = now_us;
  const auto timeout = options_.leader_timeout_us;
  if (group_.n > 1 && group_.f > 0) {
    if (installed_) {
      if (!pending_.empty() || proposing_) {
        std::int64_t ref = last_progress_;
        if (!arrival_order_.empty()) {
          ref = std::max(ref, pending_.at(arrival_order_.begin()->second).arrival_us);
        }
        if (now_ - ref >= timeout) {
          // Before suspecting the leader, make sure we are not merely behind.
          for (std::uint32_t i = 0; i < group_.replicas.size(); ++i) we_are_behind(i);
          if (now_ - ref >= timeout + options_.retransmit_us) start_view_change(view_ + 1);
        }
      }
    } else {
      auto backoff = timeout << std::min(vc_attempts_, 5);
      if (vc_quorum_at_ && now_ - *vc_quorum_at_ >= backoff) start_view_change(vc_target_ + 1);
      try_new_view();
    }
  }
  if (now_ - last_retransmit_ >= options_.retransmit_us) {
    last_retransmit_ = now_;
    for (const auto& m : resend_) {
      for (std::uint32_t i = 0; i < group_.replicas.size(); ++i) {
        if (i != index_) send_to(i, m);
      }
    }
  }
  flush_self();
}

void Replica::start_view_change(std::uint64_t target) {
  if (installed_ ? target <= view_ : target <= vc_target_) return;
  vc_attempts_ = installed_ ? 0 : vc_attempts_ + 1;
  installed_ = false;
  vc_target_ = target;
  proposing_ = false;
  vc_quorum_at_.reset();
  vc_started_at_ = now_;
  resend_.clear();
  buffered_new_view_.reset();
  ++stats_.view_changes_started;

  ConsensusMessage vc;
  vc.phase = Phase::kViewChange;
  vc.view = target;
  vc.seq = next_exec_;
  vc.next_execute = next_exec_;
  auto inst = instances_.find(next_exec_);
  if (inst != instances_.end() && inst->second.prepared) vc.prepared = inst->second.prepared;
  broadcast(sign(std::move(vc)));
}

bool Replica::verify_proof(const PreparedProof& p) const {
  if (batch_digest(p.batch) != p.digest) return false;
  std::set<std::uint32_t> voters;
  for (const auto& [who, tag] : p.writes) {
    if (who >= group_.replicas.size() || voters.count(who)) continue;
    auto header = vote_header(Phase::kWrite, p.view, p.seq, who, p.digest);
    if (verifier_->verify(replica_principal(group_.group, who), header.signed_bytes(), tag)) {
      voters.insert(who);
    }
  }
  return voters.size() >= static_cast<std::size_t>(group_.quorum());
}

bool Replica::verify_view_change(const ConsensusMessage& m, std::uint64_t view) const {
  if (m.phase != Phase::kViewChange || m.view != view || m.seq != m.next_execute) return false;
  if (!verify_consensus(m)) return false;
  if (m.prepared) {
    if (m.prepared->seq != m.next_execute || m.prepared->view >= view) return false;
    if (!verify_proof(*m.prepared)) return false;
  }
  return true;
}

void Replica::handle_view_change(const ConsensusMessage& m) {
  if (!verify_view_change(m, m.view)) {
    ++stats_.rejected;
    return;
  }
  if (m.next_execute < next_exec_) peer_behind(m.sender, m.next_execute);
  if (m.next_execute > next_exec_) we_are_behind(m.sender);
  if (m.view <= view_) return;
  view_changes_[m.view][m.sender] = m;

  // Join once f+1 replicas ask for a view beyond ours.
  const auto current = installed_ ? view_ : vc_target_;
  std::map<std::uint32_t, std::uint64_t> highest;
  for (const auto& [view, senders] : view_changes_) {
    if (view <= current) continue;
    for (const auto& [who, _] : senders) highest[who] = std::max(highest[who], view);
  }
  if (highest.size() >= static_cast<std::size_t>(group_.f + 1)) {
    auto target = std::min_element(highest.begin(), highest.end(), [](auto& a, auto& b) {
                    return a.second < b.second;
                  })->second;
    start_view_change(target);
  }
  if (!installed_ && !vc_quorum_at_ &&
      view_changes_[vc_target_].size() >= static_cast<std::size_t>(group_.quorum())) {
    vc_quorum_at_ = now_;
  }
  try_new_view();
}

void Replica::try_new_view() {
  if (installed_ || group_.leader(vc_target_) != index_) return;
  auto found = view_changes_.find(vc_target_);
  if (found == view_changes_.end()) return;
  const auto q = static_cast<std::size_t>(group_.quorum());
  if (found->second.size() < q || !found->second.count(index_)) return;

  std::vector<ConsensusMessage> set{found->second.at(index_)};
  for (const auto& [who, vc] : found->second) {
    if (set.size() == q) break;
    if (who != index_) set.push_back(vc);
  }
  std::uint64_t max_next = 0;
  std::uint32_t ahead = index_;
  for (const auto& vc : set) {
    if (vc.next_execute > max_next) {
      max_next = vc.next_execute;
      ahead = vc.sender;
    }
  }
  if (next_exec_ < max_next) {
    we_are_behind(ahead);
    return;
  }

  ConsensusMessage nv;
  nv.phase = Phase::kNewView;
  nv.view = vc_target_;
  nv.seq = next_exec_;
  if (auto chosen = select_prepared(set, next_exec_)) {
    nv.batch = chosen->batch;
  } else if (!pending_.empty()) {
    Batch fresh;
    for (const auto& [_, key] : arrival_order_) {
      if (fresh.size() >= options_.max_batch) break;
      fresh.push_back(pending_.at(key).request);
    }
    nv.batch = std::move(fresh);
  }
  if (nv.batch) nv.digest = batch_digest(*nv.batch);
  nv.view_changes = std::move(set);
  broadcast(sign(std::move(nv)));
}

bool Replica::verify_new_view(const ConsensusMessage& m) const {
  if (m.sender != group_.leader(m.view)) return false;
  std::set<std::uint32_t> senders;
  std::uint64_t max_next = 0;
  for (const auto& vc : m.view_changes) {
    if (!verify_view_change(vc, m.view)) return false;
    senders.insert(vc.sender);
    max_next = std::max(max_next, vc.next_execute);
  }
  if (senders.size() < static_cast<std::size_t>(group_.quorum())) return false;
  if (m.seq < max_next) return false;
  if (m.batch && batch_digest(*m.batch) != m.digest) return false;
  if (auto chosen = select_prepared(m.view_changes, m.seq)) {
    return m.batch && m.digest == chosen->digest;
  }
  return !m.batch || verify_batch_requests(*m.batch);
}

void Replica::handle_new_view(const ConsensusMessage& m) {
  if (installed_ ? m.view <= view_ : m.view < vc_target_) return;
  if (!verify_new_view(m)) {
    ++stats_.rejected;
    return;
  }
  if (m.seq > next_exec_) {
    // Stop voting in the old view and catch up before installing.
    installed_ = false;
    vc_target_ = m.view;
    if (!vc_quorum_at_) vc_quorum_at_ = now_;
    buffered_new_view_ = m;
    we_are_behind(m.sender);
    return;
  }
  install_new_view(m);
}

void Replica::install_new_view(const ConsensusMessage& m) {
  view_ = m.view;
  installed_ = true;
  vc_target_ = m.view;
  vc_quorum_at_.reset();
  vc_attempts_ = 0;
  proposing_ = false;
  last_progress_ = now_;
  resend_.clear();
  buffered_new_view_.reset();
  ++stats_.views_installed;
  view_changes_.erase(view_changes_.begin(), view_changes_.upper_bound(m.view));
  if (group_.leader(view_) == index_) resend_.push_back(m);

  if (m.seq < next_exec_) {
    // Already decided here; help the new leader if it lags.
    peer_behind(m.sender, m.seq);
  } else if (m.batch) {
    auto& inst = instances_[m.seq];
    inst.proposals[view_] = {m.digest, *m.batch};
    inst.bodies[m.digest] = *m.batch;
    if (group_.leader(view_) == index_) proposing_ = true;
    evaluate(m.seq);
  }
  maybe_propose();
}

void Replica::peer_behind(std::uint32_t peer, std::uint64_t peer_next) {
  if (peer == index_ || peer >= group_.replicas.size()) return;
  auto end = std::min(peer_next + kFetchChunk, next_exec_);
  for (auto s = peer_next; s < end; ++s) {
    auto d = decided_.find(s);
    if (d == decided_.end()) continue;
    auto& last = last_push_[{peer, s}];
    if (last != 0 && now_ - last < options_.retransmit_us) continue;
    last = now_ == 0 ? 1 : now_;
    send_to(peer, d->second);
  }
}

void Replica::we_are_behind(std::uint32_t peer) {
  if (peer == index_ || peer >= group_.replicas.size()) return;
  auto last = last_fetch_.find(peer);
  if (last != last_fetch_.end() && now_ - last->second < options_.retransmit_us) return;
  last_fetch_[peer] = now_;
  Fetch f{index_, next_exec_, {}};
  f.tag = signer_->sign(f.signed_bytes());
  send_to(peer, f);
}

void Replica::handle_fetch(const Fetch& f) {
  if (f.sender >= group_.replicas.size() ||
      !verifier_->verify(replica_principal(group_.group, f.sender), f.signed_bytes(), f.tag)) {
    ++stats_.rejected;
    return;
  }
  peer_behind(f.sender, f.from_seq);
}

void Replica::handle_decision(const Decision& d) {
  if (d.seq < next_exec_ || d.seq > next_exec_ + kWindow) return;
  if (batch_digest(d.batch) != d.digest) {
    ++stats_.rejected;
    return;
  }
  std::map<std::uint32_t, Tag> valid;
  for (const auto& [who, tag] : d.accepts) {
    if (who >= group_.replicas.size() || valid.count(who)) continue;
    auto header = vote_header(Phase::kAccept, d.view, d.seq, who, d.digest);
    if (verifier_->verify(replica_principal(group_.group, who), header.signed_bytes(), tag)) {
      valid[who] = tag;
    }
  }
  if (valid.size() < static_cast<std::size_t>(group_.quorum())) {
    ++stats_.rejected;
    return;
  }
  ++stats_.decisions_fetched;
  auto& inst = instances_[d.seq];
  auto& votes = inst.accepts[{d.view, d.digest}];
  votes.insert(valid.begin(), valid.end());
  inst.bodies.emplace(d.digest, d.batch);
  evaluate(d.seq);
}

Digest Replica::fingerprint() const {
  ByteWriter w;
  w.u64(view_).boolean(installed_).u64(vc_target_).u64(next_exec_).boolean(proposing_);
  w.u32(static_cast<std::uint32_t>(pending_.size()));
  for (const auto& [key, _] : pending_) w.str(key.first).u64(key.second);
  for (const auto& [client, next] : client_next_) w.str(client).u64(next);
  for (const auto& [client, held] : held_) {
    w.str(client);
    for (const auto& [seq, _] : held) w.u64(seq);
  }
  for (const auto& b : log_) w.u64(b.seq).u64(b.view).raw(b.digest);
  for (const auto& [seq, inst] : instances_) {
    w.u64(seq);
    for (const auto& [view, p] : inst.proposals) w.u64(view).raw(p.first);
    for (const auto& [key, votes] : inst.writes) w.u64(key.first).raw(key.second).u32(votes.size());
    for (const auto& [key, votes] : inst.accepts) w.u64(key.first).raw(key.second).u32(votes.size());
    w.boolean(inst.prepared.has_value());
  }
  for (const auto& [view, senders] : view_changes_) {
    w.u64(view);
    for (const auto& [who, _] : senders) w.u32(who);
  }
  w.boolean(buffered_new_view_.has_value());
  w.u64(stats_.decided).u64(stats_.executed).u64(stats_.equivocations);
  w.u64(stats_.view_changes_started).u64(stats_.views_installed);
  return sha256(w.data());
}

}  // namespace resa::order
