#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "resa/core/fault_model.hpp"
#include "resa/order/auth.hpp"
#include "resa/order/messages.hpp"

namespace resa::order {

// Votes needed for WRITE/ACCEPT/VIEWCHANGE quorums.
int order_quorum(FaultModel model, int n, int f);
// Acknowledgements a frontend waits for.
int ack_threshold(FaultModel model, int f);

struct GroupConfig {
  std::string group;
  FaultModel model = FaultModel::kBFT;
  int f = 1;
  int n = 4;
  std::vector<Address> replicas;  // index -> proxy address

  int quorum() const { return order_quorum(model, n, f); }
  std::uint32_t leader(std::uint64_t view) const {
    return static_cast<std::uint32_t>(view % static_cast<std::uint64_t>(n));
  }
};

struct ReplicaOptions {
  std::size_t max_batch = 64;
  std::int64_t leader_timeout_us = 2'000'000;
  std::int64_t retransmit_us = 500'000;
  // Executed requests not yet taken by the hosting unit. Execution pauses
  // while the hand-off queue is full.
  std::size_t handoff_capacity = 1024;
};

using Send = std::function<void(const Address& to, const OrderMessage& msg)>;

struct DeliveredBatch {
  std::uint64_t seq = 0;
  std::uint64_t view = 0;
  Digest digest{};
  std::vector<std::pair<std::string, std::uint64_t>> requests;  // (client, clientSeq)
  bool operator==(const DeliveredBatch&) const = default;
};

using DeliveryLog = std::vector<DeliveredBatch>;

// True iff one log is a prefix of the other.
bool logs_consistent(const DeliveryLog& a, const DeliveryLog& b);

struct Executed {
  OrderRequest request;
  std::uint64_t consensus_seq = 0;
};

struct ReplicaStats {
  std::uint64_t decided = 0;
  std::uint64_t executed = 0;
  std::uint64_t rejected = 0;
  std::uint64_t equivocations = 0;
  std::uint64_t view_changes_started = 0;
  std::uint64_t views_installed = 0;
  std::uint64_t decisions_fetched = 0;
};

// One replica of the agreement protocol: leader-driven PROPOSE / WRITE /
// ACCEPT rounds, view change on leader timeout, and catch-up through
// self-certifying decisions.
class Replica {
 public:
  Replica(GroupConfig group, std::uint32_t index, std::shared_ptr<const Signer> signer,
          std::shared_ptr<const Verifier> verifier, ReplicaOptions options, Send send);

  void on_message(const OrderMessage& msg, std::int64_t now_us);
  void on_tick(std::int64_t now_us);

  // Takes up to `max` executed requests in execution order.
  std::vector<Executed> drain_executed(std::size_t max = SIZE_MAX);

  std::uint32_t index() const { return index_; }
  std::uint64_t view() const { return view_; }
  bool view_installed() const { return installed_; }
  bool is_leader() const { return installed_ && group_.leader(view_) == index_; }
  std::uint64_t next_execute() const { return next_exec_; }
  std::size_t pending_requests() const { return pending_.size(); }
  const DeliveryLog& log() const { return log_; }
  const ReplicaStats& stats() const { return stats_; }
  const GroupConfig& group() const { return group_; }

  // Hash over the protocol state (rejection counters excluded).
  Digest fingerprint() const;

 private:
  using RequestKey = std::pair<std::string, std::uint64_t>;
  using VoteKey = std::pair<std::uint64_t, Digest>;  // (view, digest)

  struct Instance {
    std::map<std::uint64_t, std::pair<Digest, Batch>> proposals;  // per view
    std::map<VoteKey, std::map<std::uint32_t, Tag>> writes;
    std::map<VoteKey, std::map<std::uint32_t, Tag>> accepts;
    std::map<Digest, Batch> bodies;
    std::set<std::uint64_t> write_sent;
    std::set<std::uint64_t> accept_sent;
    std::optional<PreparedProof> prepared;
  };

  struct PendingEntry {
    OrderRequest request;
    std::int64_t arrival_us = 0;
  };

  void handle(const OrderMessage& msg);
  void handle_request(const OrderRequest& req);
  void handle_consensus(const ConsensusMessage& m);
  void handle_propose(const ConsensusMessage& m);
  void handle_vote(const ConsensusMessage& m);
  void handle_view_change(const ConsensusMessage& m);
  void handle_new_view(const ConsensusMessage& m);
  void handle_fetch(const Fetch& f);
  void handle_decision(const Decision& d);

  bool verify_consensus(const ConsensusMessage& m) const;
  bool verify_view_change(const ConsensusMessage& m, std::uint64_t view) const;
  bool verify_new_view(const ConsensusMessage& m) const;
  bool verify_proof(const PreparedProof& p) const;
  bool verify_batch_requests(const Batch& batch) const;

  void evaluate(std::uint64_t seq);
  void decide(std::uint64_t seq, std::uint64_t view, const Digest& digest, const Batch& batch,
              const std::map<std::uint32_t, Tag>& accepts);
  void execute_ready();
  void maybe_propose();
  void start_view_change(std::uint64_t target);
  void try_new_view();
  void install_new_view(const ConsensusMessage& m);
  void peer_behind(std::uint32_t peer, std::uint64_t peer_next);
  void we_are_behind(std::uint32_t peer);

  ConsensusMessage sign(ConsensusMessage m) const;
  void broadcast(const ConsensusMessage& m, bool remember = true);
  void send_to(std::uint32_t replica, const OrderMessage& m);
  void flush_self();

  GroupConfig group_;
  std::uint32_t index_;
  std::shared_ptr<const Signer> signer_;
  std::shared_ptr<const Verifier> verifier_;
  ReplicaOptions options_;
  Send send_;
  std::int64_t now_ = 0;

  std::uint64_t view_ = 0;
  bool installed_ = true;
  std::uint64_t vc_target_ = 0;
  std::optional<std::int64_t> vc_quorum_at_;
  std::int64_t vc_started_at_ = 0;
  int vc_attempts_ = 0;
  std::uint64_t next_exec_ = 0;
  bool proposing_ = false;
  std::int64_t last_progress_ = 0;
  std::int64_t last_retransmit_ = 0;

  std::map<RequestKey, PendingEntry> pending_;
  std::map<std::uint64_t, RequestKey> arrival_order_;
  std::map<RequestKey, std::uint64_t> arrival_index_;
  std::uint64_t arrivals_ = 0;

  std::map<std::string, std::uint64_t> client_next_;
  std::map<std::string, std::map<std::uint64_t, std::pair<OrderRequest, std::uint64_t>>> held_;

  std::map<std::uint64_t, Instance> instances_;
  std::map<std::uint64_t, Decision> decided_;
  std::deque<std::uint64_t> exec_queue_;
  std::deque<Executed> ready_;
  DeliveryLog log_;

  std::map<std::uint64_t, std::map<std::uint32_t, ConsensusMessage>> view_changes_;
  std::optional<ConsensusMessage> buffered_new_view_;
  std::vector<ConsensusMessage> resend_;

  std::map<std::uint32_t, std::int64_t> last_fetch_;
  std::map<std::pair<std::uint32_t, std::uint64_t>, std::int64_t> last_push_;

  std::deque<ConsensusMessage> self_queue_;
  ReplicaStats stats_;
};

}  // namespace resa::order
