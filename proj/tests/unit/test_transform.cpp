#include <gtest/gtest.h>

#include <chrono>
#include <random>

#include "resa/transform.hpp"
#include "support.hpp"

using namespace resa;
using namespace resa::arch;
using resa::core::Connection;
using resa::core::Technology;
namespace ts = resa::testsupport;

namespace {

std::size_t count_if_conn(const Resa& r, const std::function<bool(const Connection&)>& pred) {
  return static_cast<std::size_t>(std::count_if(r.connections.begin(), r.connections.end(), pred));
}

bool all_placed(const Resa& r) {
  auto loc = r.locations();
  for (const auto& c : r.connections) {
    if (!loc.count(c.source.component) || !loc.count(c.target.component)) return false;
  }
  return true;
}

bool starts_with(const std::string& s, const std::string& p) { return s.rfind(p, 0) == 0; }

ResilienceConfig both(int f) {
  auto cfg = ts::replicate("B", f);
  cfg.entries.push_back(ts::replicate("C", f).entries.front());
  return cfg;
}

Lsa chain_with_forwarding_c() {
  auto lsa = ts::chain_lsa();
  lsa.components[2] = {"C", "forward", {ts::in("in"), ts::out("out")}, {}};
  lsa.components.push_back({"D", "counter", {ts::in("in")}, {}});
  lsa.connections.push_back(ts::wire("C.out", "D.in", Technology::kSocket));
  lsa.units.push_back({"u-d", {"D"}});
  return lsa;
}

}  // namespace

TEST(SetupReplication, Fig2BftF1) {
  auto resa = transform::setup_replication(ts::chain_lsa(), ts::replicate("B", 1));
  ASSERT_EQ(resa.groups.size(), 1u);
  const auto& g = resa.groups[0];
  EXPECT_EQ(g.n, 4);
  EXPECT_EQ(g.replica_ids, (std::vector<std::string>{"B#0", "B#1", "B#2", "B#3"}));
  std::set<std::string> units(g.replica_units.begin(), g.replica_units.end());
  EXPECT_EQ(units.size(), 4u);

  ASSERT_EQ(resa.frontends.size(), 1u);
  EXPECT_EQ(resa.frontends[0].unit, "u-a");
  EXPECT_EQ(resa.frontends[0].sender, "A");
  EXPECT_EQ(resa.proxies.size(), 4u);
  ASSERT_EQ(resa.consolidators.size(), 1u);
  EXPECT_EQ(resa.consolidators[0].unit, "u-c");
  EXPECT_EQ(resa.consolidators[0].receiver, "C");
  EXPECT_EQ(resa.consolidators[0].kind, "BFTConsolidator");

  // Consolidation side: 4 replicas -> Cons plus Cons -> C.
  const auto cons = consolidator_id("B", "C");
  EXPECT_EQ(count_if_conn(resa, [&](const Connection& c) { return c.target.component == cons; }), 4u);
  EXPECT_EQ(count_if_conn(resa, [&](const Connection& c) { return c.source.component == cons; }), 1u);
  // Dissemination: A -> frontend over total-order multicast, frontend -> 4 proxies.
  const auto fe = frontend_id("A", "B");
  EXPECT_EQ(count_if_conn(resa, [&](const Connection& c) {
              return c.source.component == "A" && c.target.component == fe &&
                     c.technology == Technology::kTotalOrderMulticast;
            }),
            1u);
  EXPECT_EQ(count_if_conn(resa, [&](const Connection& c) { return c.source.component == fe; }), 4u);
  // The base component is gone.
  EXPECT_EQ(resa.find_component("B"), nullptr);
  EXPECT_EQ(count_if_conn(resa, [&](const Connection& c) {
              return c.source.component == "B" || c.target.component == "B";
            }),
            0u);
  EXPECT_TRUE(all_placed(resa));
}

TEST(SetupReplication, ReplicasAreCopies) {
  auto lsa = ts::chain_lsa();
  lsa.components[1].params["salt"] = "x";
  auto resa = transform::setup_replication(lsa, ts::replicate("B", 1));
  for (int i = 0; i < 4; ++i) {
    const auto* r = resa.find_component(replica_id("B", i));
    ASSERT_NE(r, nullptr);
    EXPECT_EQ(r->type, lsa.components[1].type);
    EXPECT_EQ(r->ports, lsa.components[1].ports);
    EXPECT_EQ(r->params, lsa.components[1].params);
  }
}

TEST(SetupReplication, AllDisabledIsIdentity) {
  auto lsa = ts::chain_lsa();
  auto cfg = ts::replicate("B", 1);
  cfg.entries[0].enabled = false;
  auto resa = transform::setup_replication(lsa, cfg);
  EXPECT_EQ(resa.components, lsa.components);
  EXPECT_EQ(resa.connections, lsa.connections);
  EXPECT_EQ(resa.units, lsa.units);
  EXPECT_TRUE(resa.groups.empty() && resa.frontends.empty() && resa.proxies.empty() &&
              resa.consolidators.empty());
}

TEST(SetupReplication, GroupToGroupIsNByM) {
  auto resa = transform::setup_replication(chain_with_forwarding_c(), both(1));
  // One frontend per sending replica of B toward C.
  std::size_t per_replica = 0;
  for (const auto& f : resa.frontends) {
    if (f.group == "C" && starts_with(f.sender, "B#")) ++per_replica;
  }
  EXPECT_EQ(per_replica, 4u);
  EXPECT_EQ(count_if_conn(resa, [&](const Connection& c) {
              return starts_with(c.source.component, "F[B#") && starts_with(c.target.component, "R[C#");
            }),
            16u);
  // One consolidator in front of every C replica dedups the 4 ordered copies.
  std::size_t before_c = 0;
  for (const auto& k : resa.consolidators) {
    if (k.source_group == "B" && starts_with(k.receiver, "C#")) ++before_c;
  }
  EXPECT_EQ(before_c, 4u);
}

TEST(SetupReplication, DoesNotMutateInputs) {
  auto lsa = chain_with_forwarding_c();
  auto cfg = both(1);
  const auto lsa_copy = lsa;
  const auto cfg_text = serialize_resilience_config(cfg);
  transform::setup_replication(lsa, cfg);
  EXPECT_EQ(lsa, lsa_copy);
  EXPECT_EQ(serialize_resilience_config(cfg), cfg_text);
}

TEST(SetupReplication, HintsPlaceReplicas) {
  auto lsa = ts::chain_lsa();
  lsa.units.push_back({"h0", {}});
  lsa.units.push_back({"h1", {}});
  lsa.units.push_back({"h2", {}});
  transform::PlacementHints hints;
  hints.group_units["B"] = {"h0", "h1", "h2"};
  auto resa = transform::setup_replication(lsa, ts::replicate("B", 1, FaultModel::kCFT), hints);
  EXPECT_EQ(resa.groups[0].replica_units, (std::vector<std::string>{"h0", "h1", "h2"}));
}

TEST(SetupReplication, TooFewCandidateUnits) {
  transform::PlacementHints hints;
  hints.group_units["B"] = {"u-a", "u-c", "u-a"};
  try {
    transform::setup_replication(ts::chain_lsa(), ts::replicate("B", 1), hints);
    FAIL();
  } catch (const transform::InfeasibleError& e) {
    EXPECT_EQ(e.group(), "B");
  }
}

TEST(SetupReplication, InvalidLsaRejected) {
  auto lsa = ts::chain_lsa();
  lsa.units[1].components.clear();
  EXPECT_THROW(transform::setup_replication(lsa, ts::replicate("B", 1)), transform::StructuralError);
}

TEST(InsertBuildingBlocks, PerUnitRules) {
  auto resa = transform::setup_replication(ts::chain_lsa(), ts::replicate("B", 1));
  const auto& lsa = ts::chain_lsa();
  auto on_a = transform::insert_building_blocks({"u-a", {"A"}}, resa.groups, lsa.connections);
  EXPECT_EQ(on_a.frontends.size(), 1u);
  EXPECT_TRUE(on_a.consolidators.empty());
  EXPECT_TRUE(on_a.proxies.empty());
  auto on_c = transform::insert_building_blocks({"u-c", {"C"}}, resa.groups, lsa.connections);
  EXPECT_EQ(on_c.consolidators.size(), 1u);
  EXPECT_TRUE(on_c.frontends.empty());
  auto replica_unit = transform::insert_building_blocks({"x", {"B#1"}}, resa.groups, lsa.connections);
  ASSERT_EQ(replica_unit.proxies.size(), 1u);
  EXPECT_EQ(replica_unit.proxies[0].replica_index, 1);
  EXPECT_EQ(replica_unit.proxies[0].id, "R[B#1]");
  auto lonely = transform::insert_building_blocks({"z", {"Q"}}, resa.groups, lsa.connections);
  EXPECT_TRUE(lonely.frontends.empty() && lonely.proxies.empty() && lonely.consolidators.empty());
}

TEST(InsertBuildingBlocks, SharedUnitSendersGetOwnFrontends) {
  Lsa lsa;
  lsa.components = {{"A1", "forward", {ts::in("in"), ts::out("out")}, {}},
                    {"A2", "forward", {ts::in("in"), ts::out("out")}, {}},
                    {"B", "counter", {ts::in("in")}, {}}};
  lsa.connections = {ts::wire("A1.out", "B.in", Technology::kSocket), ts::wire("A2.out", "B.in", Technology::kSocket)};
  lsa.units = {{"u", {"A1", "A2"}}, {"u-b", {"B"}}};
  auto resa = transform::setup_replication(lsa, ts::replicate("B", 1));
  EXPECT_EQ(resa.frontends.size(), 2u);
}

TEST(RewireConnections, NoGroupsIsUnchanged) {
  auto lsa = ts::chain_lsa();
  std::map<std::string, std::string> loc{{"A", "u-a"}, {"B", "u-b"}, {"C", "u-c"}};
  EXPECT_EQ(transform::rewire_connections(lsa.connections, {}, loc), lsa.connections);
}

TEST(RewireConnections, UnplacedEndpointAborts) {
  auto resa = transform::setup_replication(ts::chain_lsa(), ts::replicate("B", 1));
  std::map<std::string, std::string> loc{{"A", "u-a"}};
  EXPECT_THROW(transform::rewire_connections(ts::chain_lsa().connections, resa.groups, loc),
               transform::StructuralError);
}

TEST(RewireConnections, RelayPortNaming) { EXPECT_EQ(transform::relay_port("B", "out"), "B/out"); }

TEST(CountOracle, RandomArchitecturesMatch) {
  std::mt19937_64 rng(2024);
  const auto start = std::chrono::steady_clock::now();
  for (int i = 0; i < 200; ++i) {
    auto r = ts::random_lsa(rng, 8);
    auto cfg = ts::random_config(rng, r, 2, {0, 1});
    auto resa = transform::setup_replication(r.lsa, cfg);
    EXPECT_EQ(ts::count_actual(resa), ts::count_oracle(r.lsa, cfg))
        << serialize_lsa(r.lsa) << serialize_resilience_config(cfg);
    // No connection touches a replicated base id.
    for (const auto& req : cfg.active()) {
      EXPECT_EQ(count_if_conn(resa, [&](const Connection& c) {
                  return c.source.component == req.component || c.target.component == req.component;
                }),
                0u);
    }
    EXPECT_TRUE(all_placed(resa));
  }
  EXPECT_LT(std::chrono::steady_clock::now() - start, std::chrono::seconds(10));
}

TEST(BehaviourPreservation, ChainAndRandom) {
  std::mt19937_64 rng(99);
  for (int i = 0; i < 8; ++i) {
    auto r = ts::random_lsa(rng, 6);
    auto cfg = ts::random_config(rng, r, 2, {0, 1});
    auto inputs = ts::random_inputs(rng, r, 12);
    auto base = ts::run_and_collect(transform::setup_replication(r.lsa, {}), r.sinks, inputs, 1);
    auto resa = transform::setup_replication(r.lsa, cfg);
    auto got = ts::run_and_collect(resa, r.sinks, inputs, 1 + static_cast<std::uint64_t>(i));
    for (const auto& k : r.sinks) {
      if (const auto* g = resa.group(k)) {
        for (const auto& id : g->replica_ids) EXPECT_EQ(got.at(id), base.at(k)) << id;
      } else {
        EXPECT_EQ(got.at(k), base.at(k)) << k;
      }
    }
  }
}

TEST(BehaviourPreservation, GroupToGroupExactlyOnce) {
  auto lsa = chain_with_forwarding_c();
  std::vector<ts::Input> inputs;
  for (int i = 0; i < 10; ++i) inputs.push_back({i % 3, "A", "in", to_bytes("e" + std::to_string(i))});
  auto base = ts::run_and_collect(transform::setup_replication(lsa, {}), {"D"}, inputs, 3);
  ASSERT_EQ(base.at("D").size(), 10u);
  auto resa = transform::setup_replication(lsa, both(1));
  auto got = ts::run_and_collect(resa, {"D"}, inputs, 3);
  EXPECT_EQ(got.at("D"), base.at("D"));
}
