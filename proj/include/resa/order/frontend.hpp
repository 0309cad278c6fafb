#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <string>

#include "resa/order/replica.hpp"

namespace resa::order {

struct FrontendOptions {
  std::int64_t retransmit_us = 500'000;
  // Give up on a request after this long without enough acknowledgements.
  std::int64_t give_up_us = 60'000'000;
};

// Client side of the agreement protocol: signs requests, multicasts them to
// every replica, retransmits until f+1 (CFT: 1) replicas acknowledged.
class Frontend {
 public:
  using Callback = std::function<void(std::uint64_t client_seq, std::int64_t now_us)>;

  Frontend(std::string id, Address self, GroupConfig group, std::shared_ptr<const Signer> signer,
           std::shared_ptr<const Verifier> verifier, FrontendOptions options, Send send);

  // Returns the client sequence number assigned to the request.
  std::uint64_t invoke_ordered(Bytes payload, std::int64_t now_us);
  void on_ack(const OrderAck& ack, std::int64_t now_us);
  void on_tick(std::int64_t now_us);

  void set_on_complete(Callback cb) { on_complete_ = std::move(cb); }
  void set_on_failure(Callback cb) { on_failure_ = std::move(cb); }

  const std::string& id() const { return id_; }
  std::size_t outstanding() const { return outstanding_.size(); }
  std::uint64_t completed() const { return completed_; }
  std::uint64_t failed() const { return failed_; }
  std::uint64_t rejected_acks() const { return rejected_acks_; }

 private:
  struct Outstanding {
    OrderRequest request;
    std::int64_t first_sent = 0;
    std::int64_t last_sent = 0;
    std::set<std::uint32_t> acks;
  };

  void multicast(const OrderRequest& r);

  std::string id_;
  Address self_;
  GroupConfig group_;
  std::shared_ptr<const Signer> signer_;
  std::shared_ptr<const Verifier> verifier_;
  FrontendOptions options_;
  Send send_;
  Callback on_complete_;
  Callback on_failure_;
  std::uint64_t next_seq_ = 0;
  std::map<std::uint64_t, Outstanding> outstanding_;
  std::uint64_t completed_ = 0;
  std::uint64_t failed_ = 0;
  std::uint64_t rejected_acks_ = 0;
};

}  // namespace resa::order
