#include <gtest/gtest.h>

#include <set>

#include "json.hpp"
#include "resa/deploy.hpp"
#include "resa/transform.hpp"
#include "support.hpp"

using namespace resa;
using namespace resa::deploy;
using namespace resa::testsupport;
using nlohmann::json;

namespace {

arch::Resa chain_bft() { return transform::setup_replication(chain_lsa(), replicate("B", 1)); }

std::vector<DeviceDescriptor> pis(int count, int capacity = 1) {
  std::vector<DeviceDescriptor> out;
  for (int i = 0; i < count; ++i) {
    out.push_back({"pi" + std::to_string(i), "raspberrypi4b", "arm64", {}, capacity});
  }
  return out;
}

PlacementError::Kind error_kind(const arch::Resa& resa, const std::vector<DeviceDescriptor>& devices,
                                const Pins& pins = {}) {
  try {
    plan_placement(resa, devices, pins);
  } catch (const PlacementError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected a placement error";
  return PlacementError::Kind::kInvalidPin;
}

std::vector<DeviceDescriptor> golden_devices() {
  auto d = pis(6);
  d[0].tags["location"] = "lab";
  d[1].tags["location"] = "lab";
  d[2].tags["location"] = "office";
  d[5].capacity = 2;
  return d;
}

}  // namespace

TEST(DeviceInventory, ParsesAndRoundTrips) {
  auto text = R"({"devices": [
    {"name": "pi0", "type": "raspberrypi4b", "architecture": "arm64", "tags": {"location": "lab"}, "capacity": 2},
    {"name": "pi1", "type": "raspberrypi4b", "architecture": "arm64", "capacity": 1}]})";
  auto devices = parse_devices(text);
  ASSERT_EQ(devices.size(), 2u);
  EXPECT_EQ(devices[0].tags.at("location"), "lab");
  EXPECT_EQ(devices[0].capacity, 2);
  EXPECT_EQ(parse_devices(serialize_devices(devices)), devices);
}

TEST(DeviceInventory, RejectsDuplicatesAndNegativeCapacity) {
  EXPECT_THROW(parse_devices(R"({"devices":[{"name":"a"},{"name":"a"}]})"), Error);
  EXPECT_THROW(parse_devices(R"({"devices":[{"name":"a","capacity":-1}]})"), Error);
  EXPECT_THROW(parse_devices(R"({"devices":[{"type":"x"}]})"), Error);
}

TEST(Pins, ParseUnitEqualsDevice) {
  EXPECT_EQ(parse_pin("unit-b0=pi3"), (std::pair<std::string, std::string>{"unit-b0", "pi3"}));
  EXPECT_THROW(parse_pin("unit-b0"), Error);
  EXPECT_THROW(parse_pin("=pi3"), Error);
}

TEST(Placement, FourReplicasOnSixDevicesAreSpread) {
  auto resa = chain_bft();
  auto devices = pis(6);
  auto a = plan_placement(resa, devices);
  EXPECT_EQ(check_assignment(resa, devices, {}, a), "");
  std::set<std::string> used;
  for (const auto& u : resa.groups[0].replica_units) used.insert(a.at(u));
  EXPECT_EQ(used.size(), 4u);
}

TEST(Placement, FourReplicasOnThreeDevicesFailWithShortfallOne) {
  auto resa = chain_bft();
  try {
    plan_placement(resa, pis(3, 4));
    FAIL() << "expected infeasibility";
  } catch (const PlacementError& e) {
    EXPECT_EQ(e.kind(), PlacementError::Kind::kInfeasible);
    EXPECT_EQ(e.group(), "B");
    EXPECT_EQ(e.shortfall(), 1);
    EXPECT_NE(std::string(e.what()).find("shortfall 1"), std::string::npos);
  }
}

TEST(Placement, PinningTwoReplicasTogetherIsRejected) {
  auto resa = chain_bft();
  Pins pins{{"unit-b0", "pi1"}, {"unit-b1", "pi1"}};
  try {
    plan_placement(resa, pis(6, 2), pins);
    FAIL() << "expected a pin conflict";
  } catch (const PlacementError& e) {
    EXPECT_EQ(e.kind(), PlacementError::Kind::kPinConflict);
    EXPECT_NE(std::string(e.what()).find("anti-affinity"), std::string::npos);
  }
}

TEST(Placement, InvalidPinsAreRejected) {
  auto resa = chain_bft();
  EXPECT_EQ(error_kind(resa, pis(6), {{"nope", "pi0"}}), PlacementError::Kind::kInvalidPin);
  EXPECT_EQ(error_kind(resa, pis(6), {{"u-a", "pi9"}}), PlacementError::Kind::kInvalidPin);
  EXPECT_EQ(error_kind(resa, pis(6), {{"u-a", "pi0"}, {"u-c", "pi0"}}), PlacementError::Kind::kPinConflict);
}

TEST(Placement, PinsAreHonored) {
  auto resa = chain_bft();
  auto devices = pis(6);
  Pins pins{{"unit-b3", "pi0"}, {"u-a", "pi5"}};
  auto a = plan_placement(resa, devices, pins);
  EXPECT_EQ(check_assignment(resa, devices, pins, a), "");
}

TEST(Placement, CapacityShortfallIsReported) {
  auto resa = chain_bft();  // 6 units
  try {
    plan_placement(resa, pis(5));
    FAIL();
  } catch (const PlacementError& e) {
    EXPECT_EQ(e.kind(), PlacementError::Kind::kInfeasible);
    EXPECT_EQ(e.shortfall(), 1);
  }
}

TEST(Placement, LocationsAreSpreadWhenPossible) {
  auto resa = transform::setup_replication(chain_lsa(), replicate("B", 1, FaultModel::kCFT));
  auto devices = pis(6, 2);
  devices[0].tags["location"] = "a";
  devices[1].tags["location"] = "a";
  devices[2].tags["location"] = "a";
  devices[3].tags["location"] = "b";
  devices[4].tags["location"] = "b";
  devices[5].tags["location"] = "c";
  auto a = plan_placement(resa, devices);
  std::set<std::string> locations;
  for (const auto& u : resa.groups[0].replica_units) {
    for (const auto& d : devices) {
      if (d.name == a.at(u)) locations.insert(d.tags.at("location"));
    }
  }
  EXPECT_EQ(locations.size(), 3u);
}

TEST(Placement, SharedUnitsAcrossGroups) {
  auto resa = placement_resa(5);
  auto devices = pis(4);
  devices.push_back({"big", "x86", "amd64", {}, 2});
  auto a = plan_placement(resa, devices);
  EXPECT_EQ(check_assignment(resa, devices, {}, a), "");
}

TEST(Placement, FeasibilityMatchesBruteForce) {
  std::mt19937_64 rng(20240611);
  int feasible = 0, infeasible = 0;
  for (int i = 0; i < 1000; ++i) {
    auto resa = placement_resa(i % kPlacementShapes);
    auto devices = random_devices(rng, 8);
    auto pins = random_pins(rng, resa, devices);
    auto oracle = brute_force_placement(resa, devices, pins);
    std::optional<Assignment> got;
    try {
      got = plan_placement(resa, devices, pins);
    } catch (const PlacementError&) {
    }
    ASSERT_EQ(oracle.has_value(), got.has_value()) << "case " << i;
    if (got) {
      EXPECT_EQ(check_assignment(resa, devices, pins, *got), "");
      ++feasible;
    } else {
      ++infeasible;
    }
  }
  EXPECT_GT(feasible, 20);
  EXPECT_GT(infeasible, 20);
}

TEST(Keys, ReplicaAndFrontendBundlesFollowTheRule) {
  auto resa = chain_bft();
  auto plan = generate_keys(resa, 7);
  int pairs = 0;
  for (const auto& r : resa.groups[0].replica_ids) {
    const auto& b = plan.bundles.at(r);
    ASSERT_TRUE(b.own);
    ++pairs;
    EXPECT_EQ(b.group_keys.at("B").size(), 4u);
    EXPECT_EQ(b.group_keys.size(), 1u);
  }
  EXPECT_EQ(pairs, 4);
  ASSERT_EQ(resa.frontends.size(), 1u);
  const auto& fe = plan.bundles.at(resa.frontends[0].id);
  EXPECT_EQ(fe.group_keys.at("B").size(), 4u);
  ASSERT_TRUE(fe.own);
  EXPECT_EQ(fe.own->principal, resa.frontends[0].id);
  // The frontend's client key reaches the four replicas.
  EXPECT_EQ(plan.public_recipients.at(fe.holder).size(), 5u);
  EXPECT_EQ(plan.bundles.at("B#0").client_keys.count(fe.holder), 1u);
}

TEST(Keys, SingleReplicaHoldsItsOwnPair) {
  auto resa = transform::setup_replication(chain_lsa(), replicate("B", 0));
  auto plan = generate_keys(resa, 7);
  const auto& b = plan.bundles.at("B#0");
  ASSERT_TRUE(b.own);
  EXPECT_EQ(b.group_keys.at("B").size(), 1u);
  EXPECT_EQ(b.group_keys.at("B").at("B#0"), b.own->public_key);
  EXPECT_EQ(plan.secret_holder.at("B#0"), "B#0");
}

TEST(Keys, DerivedPairsSignAndVerify) {
  auto pair = derive_key_pair("B#2", 99);
  order::Ed25519Signer signer(pair);
  order::Ed25519Verifier verifier;
  verifier.add("B#2", pair.public_key);
  auto msg = to_bytes("ordered");
  auto tag = signer.sign(msg);
  EXPECT_TRUE(verifier.verify("B#2", msg, tag));
  msg[0] ^= 1;
  EXPECT_FALSE(verifier.verify("B#2", msg, tag));
  EXPECT_EQ(derive_key_pair("B#2", 99).secret_key, pair.secret_key);
  EXPECT_NE(derive_key_pair("B#2", 98).secret_key, pair.secret_key);
}

TEST(Artifacts, ChainProducesExpectedFileSet) {
  auto resa = chain_bft();
  auto devices = pis(6);
  auto plan = plan_deployment(resa, devices, {}, 1);
  auto files = emit_artifacts(plan, resa, devices);
  int manifests = 0, units = 0, hosts = 0;
  for (const auto& [path, _] : files) {
    manifests += path == "manifest.json";
    units += path.rfind("units/", 0) == 0;
    hosts += path.rfind("hosts/", 0) == 0;
  }
  EXPECT_EQ(manifests, 1);
  EXPECT_EQ(units, 6);
  EXPECT_EQ(hosts, 1);
  const auto& hc = files.at("hosts/B.config");
  EXPECT_EQ(std::count(hc.begin(), hc.end(), '\n'), 4);
  EXPECT_NE(hc.find("2 unit-b2 11000\n"), std::string::npos);
  EXPECT_EQ(check_key_confinement(resa, files), "");

  auto unit = json::parse(files.at("units/unit-b2.json"));
  ASSERT_EQ(unit["replication"].size(), 1u);
  EXPECT_EQ(unit["replication"][0]["n"], 4);
  EXPECT_EQ(unit["replication"][0]["f"], 1);
  EXPECT_EQ(unit["replication"][0]["index"], 2);
}

TEST(Artifacts, SecondGroupGetsPortOffset) {
  auto resa = placement_resa(4);
  auto devices = pis(8, 2);
  auto files = emit_artifacts(plan_deployment(resa, devices), resa, devices);
  EXPECT_NE(files.at("hosts/C.config").find("0 unit-c0 11100\n"), std::string::npos);
  EXPECT_EQ(check_key_confinement(resa, files), "");
}

TEST(Artifacts, EmptyResaYieldsManifestWithoutUnits) {
  arch::Resa empty;
  auto plan = plan_deployment(empty, {}, {}, 0);
  auto files = emit_artifacts(plan, empty, {});
  ASSERT_EQ(files.size(), 1u);
  EXPECT_TRUE(json::parse(files.at("manifest.json"))["units"].empty());
}

TEST(Artifacts, DeterministicForSeed) {
  auto resa = chain_bft();
  auto devices = pis(6);
  auto a = emit_artifacts(plan_deployment(resa, devices, {}, 5), resa, devices);
  auto b = emit_artifacts(plan_deployment(resa, devices, {}, 5), resa, devices);
  auto c = emit_artifacts(plan_deployment(resa, devices, {}, 6), resa, devices);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
}

TEST(Artifacts, MatchGoldenFiles) {
  auto resa = chain_bft();
  auto devices = golden_devices();
  auto plan = plan_deployment(resa, devices, {{"u-a", "pi5"}}, 42);
  auto files = emit_artifacts(plan, resa, devices);
  auto bad = compare_golden(files, std::string(RESA_GOLDEN_DIR) + "/deploy/chain");
  EXPECT_TRUE(bad.empty()) << bad.front();
}
