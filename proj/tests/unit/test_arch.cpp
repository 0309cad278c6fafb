#include <gtest/gtest.h>

#include <random>

#include "resa/arch/model.hpp"
#include "resa/arch/resa.hpp"
#include "resa/transform.hpp"
#include "support.hpp"

using namespace resa;
using namespace resa::arch;

namespace {

const char* kFig2 = R"({
  "components": [
    {"id": "A", "type": "forward", "in": ["in"], "out": ["out"]},
    {"id": "B", "type": "forward", "in": ["in"], "out": ["out"]},
    {"id": "C", "type": "counter", "in": ["in"]}
  ],
  "connections": [
    {"from": "A.out", "to": "B.in"},
    {"from": "B.out", "to": "C.in", "technology": "socket"}
  ],
  "units": [
    {"id": "u1", "components": ["A"]},
    {"id": "u2", "components": ["B"]},
    {"id": "u3", "components": ["C"]}
  ]
})";

std::string fig4(const std::string& ar) {
  return R"({"components":[{"id":"Comp-B","mechanisms":{"activeReplication":)" + ar + "}}]}";
}

std::vector<std::string> codes(const Lsa& lsa) {
  std::vector<std::string> out;
  for (const auto& d : validate_lsa(lsa)) out.push_back(d.code);
  return out;
}

bool has(const std::vector<std::string>& v, const std::string& s) {
  return std::find(v.begin(), v.end(), s) != v.end();
}

}  // namespace

TEST(GroupSize, ReferenceValues) {
  EXPECT_EQ(group_size(1, FaultModel::kBFT), 4);
  EXPECT_EQ(group_size(0, FaultModel::kBFT), 1);
  EXPECT_EQ(group_size(2, FaultModel::kCFT), 5);
  EXPECT_EQ(group_size(0, FaultModel::kCFT), 1);
  EXPECT_THROW(group_size(-1, FaultModel::kBFT), Error);
}

TEST(GroupSize, MonotoneAndBftLarger) {
  for (int f = 0; f < 50; ++f) {
    EXPECT_LT(group_size(f, FaultModel::kBFT), group_size(f + 1, FaultModel::kBFT));
    EXPECT_LT(group_size(f, FaultModel::kCFT), group_size(f + 1, FaultModel::kCFT));
    if (f >= 1) EXPECT_GT(group_size(f, FaultModel::kBFT), group_size(f, FaultModel::kCFT));
  }
}

TEST(ParseLsa, Fig2TopologyIsValid) {
  auto lsa = parse_lsa(kFig2);
  EXPECT_TRUE(validate_lsa(lsa).empty());
  ASSERT_EQ(lsa.connections.size(), 2u);
  // Different units and no explicit technology: socket.
  EXPECT_EQ(lsa.connections[0].technology, core::Technology::kSocket);
  EXPECT_EQ(lsa.unit_of("B"), "u2");
  EXPECT_EQ(parse_lsa(serialize_lsa(lsa)), lsa);
}

TEST(ParseLsa, SameUnitDefaultsToLocal) {
  auto lsa = parse_lsa(R"({"components":[{"id":"A","out":["o"]},{"id":"B","in":["i"]}],
    "connections":[{"from":"A.o","to":"B.i"}],"units":[{"id":"u","components":["A","B"]}]})");
  EXPECT_EQ(lsa.connections[0].technology, core::Technology::kLocal);
}

TEST(ParseLsa, MalformedInput) {
  EXPECT_THROW(parse_lsa("{"), Error);
  EXPECT_THROW(parse_lsa(R"({"connections":[{"from":"Aout","to":"B.in"}]})"), Error);
  EXPECT_THROW(parse_lsa(R"({"connections":[{"from":"A.o","to":"B.i","technology":"pigeon"}]})"), Error);
}

TEST(ValidateLsa, UnresolvedEndpoint) {
  auto lsa = parse_lsa(kFig2);
  lsa.connections.push_back({{"A", "out"}, {"Z", "in"}, core::Technology::kSocket});
  EXPECT_TRUE(has(codes(lsa), "unresolved endpoint"));
}

TEST(ValidateLsa, DuplicateId) {
  auto lsa = parse_lsa(kFig2);
  lsa.components.push_back(lsa.components[0]);
  EXPECT_TRUE(has(codes(lsa), "duplicate id"));
}

TEST(ValidateLsa, PortDirection) {
  auto lsa = parse_lsa(kFig2);
  lsa.connections.push_back({{"C", "in"}, {"A", "in"}, core::Technology::kSocket});
  EXPECT_TRUE(has(codes(lsa), "port direction"));
}

TEST(ValidateLsa, UnitAssignment) {
  auto lsa = parse_lsa(kFig2);
  lsa.units[0].components.clear();
  EXPECT_TRUE(has(codes(lsa), "unit assignment"));
  lsa = parse_lsa(kFig2);
  lsa.units[1].components.push_back("A");
  EXPECT_TRUE(has(codes(lsa), "unit assignment"));
}

TEST(ValidateLsa, DuplicatePortConnectionUnit) {
  auto lsa = parse_lsa(kFig2);
  lsa.components[0].ports.push_back({"out", core::Direction::kOut});
  lsa.connections.push_back(lsa.connections[0]);
  lsa.units.push_back({"u1", {}});
  auto c = codes(lsa);
  EXPECT_TRUE(has(c, "duplicate port"));
  EXPECT_TRUE(has(c, "duplicate connection"));
  EXPECT_TRUE(has(c, "duplicate unit"));
}

TEST(ValidateLsa, AcceptsGeneratedArchitectures) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 200; ++i) {
    auto r = testsupport::random_lsa(rng, 8);
    EXPECT_TRUE(validate_lsa(r.lsa).empty()) << serialize_lsa(r.lsa);
    EXPECT_EQ(parse_lsa(serialize_lsa(r.lsa)), r.lsa);
  }
  EXPECT_TRUE(validate_lsa(testsupport::chain_lsa()).empty());
  EXPECT_TRUE(validate_lsa(testsupport::pipeline_lsa(4, 10)).empty());
}

TEST(ResilienceConfig, Fig4Entry) {
  auto cfg = parse_resilience_config(
      fig4(R"({"enabled":true,"f":1,"faultModel":"BFT","consolidator":"BFTConsolidator"})"));
  auto active = cfg.active();
  ASSERT_EQ(active.size(), 1u);
  EXPECT_EQ(active[0].component, "Comp-B");
  EXPECT_EQ(active[0].model, FaultModel::kBFT);
  EXPECT_EQ(active[0].f, 1);
  EXPECT_EQ(active[0].consolidator, "BFTConsolidator");
  EXPECT_TRUE(cfg.warnings.empty());
}

TEST(ResilienceConfig, DisabledIsInert) {
  auto cfg = parse_resilience_config(
      fig4(R"({"enabled":false,"f":1,"faultModel":"BFT","consolidator":"BFTConsolidator"})"));
  EXPECT_TRUE(cfg.active().empty());
  ASSERT_EQ(cfg.entries.size(), 1u);
}

TEST(ResilienceConfig, Errors) {
  auto field_of = [](const std::string& text) -> std::string {
    try {
      parse_resilience_config(text);
    } catch (const ConfigError& e) {
      EXPECT_EQ(e.component(), "Comp-B");
      return e.field();
    }
    return "<none>";
  };
  EXPECT_EQ(field_of(fig4(R"({"enabled":true,"f":-1,"faultModel":"BFT","consolidator":"BFTConsolidator"})")), "f");
  EXPECT_EQ(field_of(fig4(R"({"enabled":true,"f":1.5,"faultModel":"BFT","consolidator":"BFTConsolidator"})")), "f");
  EXPECT_EQ(field_of(fig4(R"({"enabled":true,"f":1,"faultModel":"XFT","consolidator":"BFTConsolidator"})")),
            "faultModel");
  EXPECT_EQ(field_of(fig4(R"({"enabled":true,"f":1,"faultModel":"BFT","consolidator":"Nope"})")), "consolidator");
  EXPECT_EQ(field_of(fig4(R"({"enabled":true,"f":1,"faultModel":"BFT","n":3})")), "n");
  try {
    parse_resilience_config(R"({"components":[{"mechanisms":{}}]})");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "id");
  }
  EXPECT_THROW(parse_resilience_config(R"({"components":[{"id":"X"},{"id":"X"}]})"), ConfigError);
  EXPECT_THROW(parse_resilience_config(R"({"nothing":1})"), Error);
}

TEST(ResilienceConfig, UnknownKeysWarn) {
  auto cfg = parse_resilience_config(
      R"({"components":[{"id":"Comp-B","color":"red","mechanisms":{"activeReplication":
         {"enabled":true,"f":0,"faultModel":"CFT","consolidator":"CFTConsolidator","speed":3}}}],"v":2})");
  EXPECT_EQ(cfg.warnings.size(), 3u);
  EXPECT_EQ(cfg.active().size(), 1u);
}

TEST(ResilienceConfig, NOverride) {
  auto cfg = parse_resilience_config(fig4(R"({"enabled":true,"f":1,"faultModel":"CFT","n":5})"));
  EXPECT_EQ(effective_group_size(cfg.entries[0]), 5);
  EXPECT_EQ(cfg.entries[0].consolidator, "CFTConsolidator");
}

TEST(ResilienceConfig, RoundTrip) {
  std::mt19937_64 rng(5);
  const char* kinds[] = {"BFTConsolidator", "CFTConsolidator", "IntervalConsolidator"};
  for (int i = 0; i < 100; ++i) {
    ResilienceConfig cfg;
    const int k = static_cast<int>(rng() % 5);
    for (int j = 0; j < k; ++j) {
      ReplicationRequest r;
      r.component = "C" + std::to_string(j);
      r.enabled = rng() % 2;
      r.f = static_cast<int>(rng() % 4);
      r.model = rng() % 2 ? FaultModel::kBFT : FaultModel::kCFT;
      r.consolidator = kinds[rng() % 3];
      if (rng() % 3 == 0) r.n = group_size(r.f, r.model) + static_cast<int>(rng() % 3);
      if (std::string(r.consolidator) == "IntervalConsolidator") r.parameters["tolerance"] = 0.5;
      cfg.entries.push_back(r);
    }
    auto back = parse_resilience_config(serialize_resilience_config(cfg));
    EXPECT_EQ(back.entries, cfg.entries);
    EXPECT_TRUE(back.warnings.empty());
  }
}

TEST(Resa, RoundTripAndLookups) {
  auto resa = transform::setup_replication(testsupport::chain_lsa(),
                                           testsupport::replicate("B", 1, FaultModel::kBFT));
  EXPECT_EQ(parse_resa(serialize_resa(resa)), resa);
  ASSERT_NE(resa.group("B"), nullptr);
  EXPECT_EQ(resa.group("B")->n, 4);
  EXPECT_EQ(resa.group_of_replica(replica_id("B", 2)), resa.group("B"));
  EXPECT_EQ(resa.group_of_replica("A"), nullptr);
  auto loc = resa.locations();
  EXPECT_EQ(loc.at("A"), "u-a");
  EXPECT_EQ(loc.at(replica_id("B", 2)), fresh_replica_unit("B", 2));
}

TEST(Naming, InstanceIds) {
  EXPECT_EQ(replica_id("B", 2), "B#2");
  EXPECT_EQ(frontend_id("A", "B"), "F[A->B]");
  EXPECT_EQ(proxy_id("B#2"), "R[B#2]");
  EXPECT_EQ(consolidator_id("B", "C"), "Cons[B->C]");
  EXPECT_EQ(fresh_replica_unit("B", 2), "unit-b2");
}
