#include "resa/consolidate.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>

namespace resa::consolidate {

namespace {

std::vector<Bytes> equality_classes(std::span<const Bytes> votes) {
  std::vector<Bytes> classes;
  for (const auto& v : votes) {
    if (std::find(classes.begin(), classes.end(), v) == classes.end()) classes.push_back(v);
  }
  return classes;
}

std::optional<Bytes> select_exact(std::span<const Bytes> votes, int threshold) {
  for (std::size_t i = 0; i < votes.size(); ++i) {
    auto count = std::count(votes.begin(), votes.end(), votes[i]);
    if (count >= threshold) return votes[i];
  }
  return std::nullopt;
}

std::optional<double> parse_number(const Bytes& payload) {
  std::string text(payload.begin(), payload.end());
  if (text.empty()) return std::nullopt;
  char* end = nullptr;
  double v = std::strtod(text.c_str(), &end);
  if (end != text.c_str() + text.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

Bytes format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return Bytes(buf, res.ptr);
}

}  // namespace

Policy bft_policy() {
  return Policy{"BFTConsolidator", [](int f, FaultModel) { return f + 1; }, select_exact};
}

Policy cft_policy() {
  return Policy{"CFTConsolidator", [](int, FaultModel) { return 1; }, select_exact};
}

Policy interval_policy(double width) {
  return Policy{
      "IntervalConsolidator", [](int f, FaultModel) { return f + 1; },
      [width](std::span<const Bytes> votes, int threshold) -> std::optional<Bytes> {
        std::vector<double> values;
        for (const auto& v : votes) {
          if (auto x = parse_number(v)) values.push_back(*x);
        }
        std::sort(values.begin(), values.end());
        // Widest window [lo, hi) with values[hi-1] - values[lo] <= width.
        // Decimal inputs like 3.6 - 3.1 land a hair above 0.5 in binary.
        const double limit = width + 1e-9 * std::max(1.0, std::abs(width));
        std::size_t best_lo = 0, best_len = 0;
        for (std::size_t lo = 0, hi = 0; lo < values.size(); ++lo) {
          hi = std::max(hi, lo);
          while (hi < values.size() && values[hi] - values[lo] <= limit) ++hi;
          if (hi - lo > best_len) {
            best_len = hi - lo;
            best_lo = lo;
          }
        }
        if (best_len == 0 || static_cast<int>(best_len) < threshold) return std::nullopt;
        const double* w = values.data() + best_lo;
        double median = best_len % 2 == 1 ? w[best_len / 2]
                                          : (w[best_len / 2 - 1] + w[best_len / 2]) / 2.0;
        return format_number(median);
      }};
}

std::optional<MismatchReport> check_mismatch(const PendingSlot& slot, const Policy& policy,
                                             int threshold, int n) {
  if (static_cast<int>(slot.votes.size()) < n) return std::nullopt;
  std::vector<Bytes> votes;
  for (const auto& [r, p] : slot.votes) votes.push_back(p);
  if (policy.select(votes, threshold)) return std::nullopt;
  MismatchReport rep;
  rep.key = slot.key;
  rep.classes = equality_classes(votes);
  rep.message = "consolidation mismatch for " + slot.key.group + "." + slot.key.port + "#" +
                std::to_string(slot.key.seq) + ": " + std::to_string(rep.classes.size()) +
                " distinct payload classes, none reaching threshold " + std::to_string(threshold);
  return rep;
}

IngestResult ingest(PendingSlot& slot, std::uint32_t replica, const Bytes& payload,
                    const Policy& policy, int threshold, int n) {
  IngestResult res;
  if (slot.votes.count(replica)) {
    res.duplicate = true;
    return res;
  }
  slot.votes.emplace(replica, payload);
  if (slot.delivered || slot.mismatch) {
    res.late = true;
    return res;
  }
  std::vector<Bytes> votes;
  votes.reserve(slot.votes.size());
  for (const auto& [r, p] : slot.votes) votes.push_back(p);
  if (auto chosen = policy.select(votes, threshold)) {
    slot.delivered = true;
    res.deliver = std::move(chosen);
    return res;
  }
  if (auto rep = check_mismatch(slot, policy, threshold, n)) {
    slot.mismatch = true;
    res.mismatch = std::move(rep);
  }
  return res;
}

Registry Registry::with_builtins() {
  Registry r;
  r.add("BFTConsolidator", [](const auto&) { return bft_policy(); });
  r.add("CFTConsolidator", [](const auto&) { return cft_policy(); });
  r.add("IntervalConsolidator", [](const std::map<std::string, double>& params) {
    auto it = params.find("width");
    return interval_policy(it == params.end() ? 0.5 : it->second);
  });
  return r;
}

const Registry& Registry::builtin() {
  static const Registry instance = with_builtins();
  return instance;
}

void Registry::add(const std::string& name, PolicyFactory factory) {
  if (factories_.count(name)) throw Error("consolidator '" + name + "' is already registered");
  factories_.emplace(name, std::move(factory));
}

Policy Registry::make(const std::string& name, const std::map<std::string, double>& params) const {
  auto it = factories_.find(name);
  if (it == factories_.end()) throw Error("unknown consolidator '" + name + "'");
  Policy p = it->second(params);
  p.name = name;
  return p;
}

std::vector<std::string> Registry::names() const {
  std::vector<std::string> out;
  for (const auto& [name, f] : factories_) out.push_back(name);
  return out;
}

Consolidator::Consolidator(std::string id, std::string group, int f, int n, FaultModel model,
                           Policy policy, ConsolidatorOptions options)
    : id_(std::move(id)),
      group_(std::move(group)),
      f_(f),
      n_(n),
      policy_(std::move(policy)),
      threshold_(std::max(1, policy_.threshold(f, model))),
      options_(options) {}

std::vector<core::Event> Consolidator::handle(const core::Event& event) {
  std::vector<core::Event> out;
  if (!event.origin_replica || static_cast<int>(*event.origin_replica) >= n_) {
    ++ignored_;
    return out;
  }
  Stream& stream = streams_[event.sender_port];
  if (event.seq < stream.next_release || stream.ready.count(event.seq)) {
    ++ignored_;
    SlotKey key{group_, event.sender_port, event.seq};
    auto it = slots_.find(key);
    if (it != slots_.end()) it->second.votes.emplace(*event.origin_replica, event.payload);
    drop_if_complete(key, stream);
    return out;
  }
  SlotKey key{group_, event.sender_port, event.seq};
  auto [it, inserted] = slots_.try_emplace(key);
  if (inserted) it->second.key = key;
  IngestResult res = ingest(it->second, *event.origin_replica, event.payload, policy_, threshold_, n_);
  if (res.duplicate || res.late) ++ignored_;
  stream.highest_seen = std::max(stream.highest_seen, event.seq);
  if (res.deliver) {
    core::Event ev;
    ev.sender = group_;
    ev.sender_port = event.sender_port;
    ev.seq = event.seq;
    ev.payload = std::move(*res.deliver);
    stream.ready.emplace(event.seq, std::move(ev));
  } else if (res.mismatch) {
    mismatches_.push_back(std::move(*res.mismatch));
    stream.ready.emplace(event.seq, std::nullopt);
  }
  release(stream, out);
  collect_garbage(event.sender_port, stream, out);
  drop_if_complete(key, stream);
  return out;
}

void Consolidator::release(Stream& stream, std::vector<core::Event>& out) {
  for (auto it = stream.ready.begin();
       it != stream.ready.end() && it->first == stream.next_release;
       it = stream.ready.erase(it)) {
    if (it->second) {
      out.push_back(std::move(*it->second));
      ++delivered_;
    }
    ++stream.next_release;
  }
}

void Consolidator::collect_garbage(const std::string& port, Stream& stream,
                                   std::vector<core::Event>& out) {
  // A slot stuck at the head of the stream for longer than the retention
  // horizon is given up on so later slots can flow.
  while (stream.highest_seen > stream.next_release + options_.retention &&
         !stream.ready.count(stream.next_release)) {
    MismatchReport rep;
    rep.key = SlotKey{group_, port, stream.next_release};
    rep.message = "slot " + group_ + "." + port + "#" + std::to_string(stream.next_release) +
                  " expired after " + std::to_string(options_.retention) + " newer slots";
    mismatches_.push_back(std::move(rep));
    stream.ready.emplace(stream.next_release, std::nullopt);
    release(stream, out);
  }
  // Released slots that never collect all n votes are dropped once they fall
  // behind the retention horizon.
  for (auto it = slots_.lower_bound(SlotKey{group_, port, 0});
       it != slots_.end() && it->first.group == group_ && it->first.port == port &&
       it->first.seq + options_.retention < stream.next_release;) {
    it = slots_.erase(it);
  }
}

void Consolidator::drop_if_complete(const SlotKey& key, const Stream& stream) {
  auto it = slots_.find(key);
  if (it == slots_.end()) return;
  if (key.seq < stream.next_release && static_cast<int>(it->second.votes.size()) >= n_) {
    slots_.erase(it);
  }
}

}  // namespace resa::consolidate
