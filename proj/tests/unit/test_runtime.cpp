#include <gtest/gtest.h>

#include <atomic>
#include <chrono>
#include <thread>

#include "resa/runtime/components.hpp"
#include "resa/runtime/system.hpp"
#include "resa/transform.hpp"
#include "support.hpp"

using namespace resa;
using namespace resa::testsupport;

namespace {

struct Tally {
  std::uint64_t feedback = 0;
  std::set<std::uint64_t> ids;
};

Tally run_pipeline(const arch::Resa& resa, std::uint64_t ticks, harness::FaultScript script = {},
                   std::uint64_t seed = 7) {
  harness::SimConfig cfg;
  cfg.seed = seed;
  cfg.delta_bound = 2;
  runtime::SimSystem sys(resa, cfg, std::move(script));
  sys.sim().set_tracing(false);
  Tally t;
  auto& gen_node = sys.node_of("gen");
  gen_node.set_step_observer([&](const core::Event& e, std::int64_t) {
    if (e.target == "gen" && e.target_port == "feedback") {
      ++t.feedback;
      if (auto id = runtime::loadgen_id(e.payload)) t.ids.insert(*id);
    }
  });
  sys.sim().at(0, [&] { gen_node.inject("gen", "start", {}); });
  sys.run_until(static_cast<std::int64_t>(ticks));
  return t;
}

}  // namespace

TEST(RuntimePipeline, PlainDeliversAllFeedback) {
  auto lsa = pipeline_lsa(4, 50);
  auto resa = transform::setup_replication(lsa, {});
  auto t = run_pipeline(resa, 200);
  EXPECT_EQ(t.feedback, 50u);
  EXPECT_EQ(t.ids.size(), 50u);
}

TEST(RuntimePipeline, ReplicatedDeliversAllFeedback) {
  auto lsa = pipeline_lsa(4, 50);
  auto resa = transform::setup_replication(lsa, replicate("proc", 1));
  auto t = run_pipeline(resa, 400);
  EXPECT_EQ(t.feedback, 50u);
  EXPECT_EQ(t.ids.size(), 50u);
}

TEST(RuntimePipeline, CftGroup) {
  auto resa = transform::setup_replication(pipeline_lsa(4, 40), replicate("proc", 1, FaultModel::kCFT));
  ASSERT_EQ(resa.group("proc")->n, 3);
  EXPECT_EQ(run_pipeline(resa, 400).ids.size(), 40u);
}

TEST(RuntimePipeline, ReplicatedSinkSide) {
  auto resa = transform::setup_replication(pipeline_lsa(2, 30), replicate("rep", 1));
  EXPECT_EQ(run_pipeline(resa, 400).feedback, 30u);
}

TEST(RuntimePipeline, SurvivesReplicaCrashes) {
  auto resa = transform::setup_replication(pipeline_lsa(4, 60), replicate("proc", 1));
  for (int victim = 0; victim < 4; ++victim) {
    harness::FaultScript script;
    script.crashes.push_back({resa.locations().at(arch::replica_id("proc", victim)), 5});
    auto t = run_pipeline(resa, 800, script);
    EXPECT_EQ(t.feedback, 60u) << "victim " << victim;
  }
}

TEST(RuntimeSystem, Lookups) {
  auto resa = transform::setup_replication(pipeline_lsa(4, 10), replicate("proc", 1));
  runtime::SimSystem sys(resa, {});
  EXPECT_EQ(sys.nodes().size(), resa.units.size());
  EXPECT_EQ(sys.node_of("gen").id(), "u-gen");
  EXPECT_EQ(sys.node_of(arch::frontend_id("gen", "proc")).id(), "u-gen");
  EXPECT_NE(sys.node_of("gen").frontend(arch::frontend_id("gen", "proc")), nullptr);
  EXPECT_EQ(sys.node_of("rep").consolidators().size(), 1u);
  auto reps = sys.replicas("proc");
  ASSERT_EQ(reps.size(), 4u);
  for (std::uint32_t i = 0; i < 4; ++i) {
    EXPECT_EQ(reps[i].first, arch::fresh_replica_unit("proc", static_cast<int>(i)));
    ASSERT_NE(reps[i].second, nullptr);
    EXPECT_EQ(reps[i].second->index(), i);
  }
  EXPECT_TRUE(reps[0].second->is_leader());
  EXPECT_TRUE(sys.replicas("gen").empty());
  EXPECT_THROW(sys.node("nowhere"), Error);
  EXPECT_THROW(sys.node_of("ghost"), Error);
}

TEST(RuntimeSystem, GroupConfigAndMemberships) {
  auto resa = transform::setup_replication(pipeline_lsa(4, 10), replicate("proc", 1));
  const auto* g = resa.group("proc");
  auto gc = runtime::group_config(resa, *g);
  EXPECT_EQ(gc.group, "proc");
  EXPECT_EQ(gc.n, 4);
  EXPECT_EQ(gc.quorum(), 3);
  for (int i = 0; i < 4; ++i) {
    EXPECT_EQ(gc.replicas[i].node, arch::fresh_replica_unit("proc", i));
    EXPECT_EQ(gc.replicas[i].block, arch::proxy_id(arch::replica_id("proc", i)));
  }
  auto m = runtime::memberships(resa);
  ASSERT_EQ(m.size(), 1u);
  EXPECT_EQ(m[0].f, 1);
  EXPECT_EQ(m[0].nodes.size(), 4u);
  harness::FaultScript two;
  two.crashes = {{m[0].nodes[0], 1}, {m[0].nodes[1], 1}};
  EXPECT_THROW(harness::validate_fault_script(two, m), Error);
}

TEST(RuntimeSystem, SameSeedSameTrace) {
  auto resa = transform::setup_replication(pipeline_lsa(3, 15), replicate("proc", 1));
  auto trace = [&](std::uint64_t seed) {
    harness::SimConfig cfg;
    cfg.seed = seed;
    cfg.delta_bound = 3;
    runtime::SimSystem sys(resa, cfg);
    sys.sim().at(0, [&] { sys.node_of("gen").inject("gen", "start", {}); });
    sys.run_until(150);
    return harness::format_trace(sys.sim().trace());
  };
  auto a = trace(3);
  EXPECT_EQ(a, trace(3));
  EXPECT_NE(a, trace(4));
}

TEST(Components, Registry) {
  auto types = runtime::ComponentTypes::with_builtins();
  for (const char* t : {"forward", "processor", "reporter", "counter", "transform", "loadgenerator"}) {
    EXPECT_TRUE(types.contains(t)) << t;
  }
  arch::ComponentDecl decl{"X", "nosuch", {in("in")}, {}};
  EXPECT_THROW(types.make(decl, "X"), Error);
  int made = 0;
  types.add("nosuch", [&](const arch::ComponentDecl& d, const std::string& inst) {
    ++made;
    return runtime::ComponentTypes::with_builtins().make({d.id, "counter", d.ports, {}}, inst);
  });
  types.make(decl, "X");
  EXPECT_EQ(made, 1);
}

TEST(Components, LoadgenCodec) {
  for (std::size_t size : {0u, 8u, 150u, 1024u}) {
    auto p = runtime::loadgen_payload(77, size);
    EXPECT_EQ(p.size(), std::max<std::size_t>(size, 8));
    EXPECT_EQ(runtime::loadgen_id(p), 77u);
  }
  EXPECT_FALSE(runtime::loadgen_id(Bytes{1, 2, 3}));
  runtime::LoadGenState s{5, 2, 3, -40};
  auto back = runtime::LoadGenState::decode(s.encode());
  EXPECT_EQ(back.sent, 5u);
  EXPECT_EQ(back.in_flight, 2u);
  EXPECT_EQ(back.received, 3u);
  EXPECT_EQ(back.tokens_milli, -40);
}

TEST(Components, TransformOutput) {
  auto a = runtime::transform_output("s", to_bytes("x"));
  EXPECT_EQ(a, runtime::transform_output("s", to_bytes("x")));
  EXPECT_NE(a, runtime::transform_output("t", to_bytes("x")));
  EXPECT_NE(a, runtime::transform_output("s", to_bytes("y")));
  EXPECT_TRUE(runtime::transform_keeps(a, 0));
  EXPECT_TRUE(runtime::transform_keeps(a, 1));
  int kept = 0;
  for (int i = 0; i < 400; ++i) {
    kept += runtime::transform_keeps(runtime::transform_output("s", to_bytes(std::to_string(i))), 4) ? 1 : 0;
  }
  EXPECT_GT(kept, 50);
  EXPECT_LT(kept, 150);
}

TEST(RuntimeSockets, ReplicatedPipelineWithCrashedReplica) {
  auto resa = transform::setup_replication(pipeline_lsa(4, 200), replicate("proc", 1));
  runtime::SocketSystem sys(resa);
  std::atomic<std::uint64_t> feedback{0};
  sys.node_of("gen").set_step_observer([&](const core::Event& e, std::int64_t) {
    if (e.target_port == "feedback") ++feedback;
  });
  sys.start();
  sys.crash(arch::fresh_replica_unit("proc", 3));
  sys.post("u-gen", [&] { sys.node("u-gen").inject("gen", "start", {}); });
  auto until = std::chrono::steady_clock::now() + std::chrono::seconds(30);
  while (feedback < 200 && std::chrono::steady_clock::now() < until) {
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  sys.stop();
  EXPECT_EQ(feedback.load(), 200u);
  EXPECT_GT(sys.runner("u-gen").metrics().frames_sent.load(), 0u);
}
