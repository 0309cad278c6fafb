#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "resa/core/component.hpp"
#include "resa/core/fault_model.hpp"

namespace resa::consolidate {

struct SlotKey {
  std::string group;
  std::string port;
  std::uint64_t seq = 0;

  auto operator<=>(const SlotKey&) const = default;
};

struct PendingSlot {
  SlotKey key;
  std::map<std::uint32_t, Bytes> votes;
  bool delivered = false;
  bool mismatch = false;
};

// How votes are matched: a threshold as a function of (f, fault model) and
// a selector that returns the consolidated payload once some pairwise-
// matching subset of at least `threshold` votes exists.
struct Policy {
  std::string name;
  std::function<int(int f, FaultModel model)> threshold;
  std::function<std::optional<Bytes>(std::span<const Bytes> votes, int threshold)> select;
};

Policy bft_policy();
Policy cft_policy();
// Numeric payloads (decimal text) match when they lie within `width` of
// each other; the delivered value is the median of the matching subset.
Policy interval_policy(double width);

struct MismatchReport {
  SlotKey key;
  // Distinct payload classes among the votes (byte equality).
  std::vector<Bytes> classes;
  std::string message;
};

struct IngestResult {
  std::optional<Bytes> deliver;
  std::optional<MismatchReport> mismatch;
  bool duplicate = false;
  bool late = false;
};

// Records one vote for a slot. Delivers at most once per slot; reports a
// mismatch when all n votes are in and no threshold-sized matching subset
// exists.
IngestResult ingest(PendingSlot& slot, std::uint32_t replica, const Bytes& payload,
                    const Policy& policy, int threshold, int n);

// Mismatch check on a complete slot. Returns nothing if a matching subset
// of `threshold` exists or not all votes are present yet.
std::optional<MismatchReport> check_mismatch(const PendingSlot& slot, const Policy& policy,
                                             int threshold, int n);

// Factory: builds a policy from the mechanism parameters of a config entry.
using PolicyFactory = std::function<Policy(const std::map<std::string, double>& params)>;

class Registry {
 public:
  // Ships with BFTConsolidator, CFTConsolidator and IntervalConsolidator.
  static Registry with_builtins();
  static const Registry& builtin();

  void add(const std::string& name, PolicyFactory factory);
  bool contains(const std::string& name) const { return factories_.count(name) > 0; }
  Policy make(const std::string& name, const std::map<std::string, double>& params = {}) const;
  std::vector<std::string> names() const;

 private:
  std::map<std::string, PolicyFactory> factories_;
};

struct ConsolidatorOptions {
  std::uint64_t retention = 10'000;
};

// Framework-provided component that collapses the n output streams of one
// replication group into a single stream toward a receiver. Slots are
// released per (group, sender port) in ascending seq order.
class Consolidator final : public core::Component {
 public:
  Consolidator(std::string id, std::string group, int f, int n, FaultModel model, Policy policy,
               ConsolidatorOptions options = {});

  const std::string& id() const override { return id_; }
  bool accepts(std::string_view) const override { return true; }
  std::vector<core::Event> handle(const core::Event& event) override;
  core::Endpoint route_source(const core::Event& emitted) const override {
    return {id_, emitted.sender_port};
  }

  int threshold() const { return threshold_; }
  const std::vector<MismatchReport>& mismatches() const { return mismatches_; }
  std::uint64_t delivered() const { return delivered_; }
  std::uint64_t ignored_votes() const { return ignored_; }
  std::size_t open_slots() const { return slots_.size(); }

 private:
  struct Stream {
    std::uint64_t next_release = 0;
    std::uint64_t highest_seen = 0;
    // seq -> consolidated event (nullopt = resolved without delivery)
    std::map<std::uint64_t, std::optional<core::Event>> ready;
  };

  void release(Stream& stream, std::vector<core::Event>& out);
  void collect_garbage(const std::string& port, Stream& stream, std::vector<core::Event>& out);
  void drop_if_complete(const SlotKey& key, const Stream& stream);

  std::string id_;
  std::string group_;
  int f_;
  int n_;
  Policy policy_;
  int threshold_;
  ConsolidatorOptions options_;
  std::map<SlotKey, PendingSlot> slots_;
  std::map<std::string, Stream> streams_;
  std::vector<MismatchReport> mismatches_;
  std::uint64_t delivered_ = 0;
  std::uint64_t ignored_ = 0;
};

}  // namespace resa::consolidate
