#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "resa/arch/model.hpp"
#include "resa/arch/resa.hpp"
#include "resa/deploy.hpp"
#include "resa/harness/sim.hpp"
#include "resa/runtime/system.hpp"

namespace resa::testsupport {

std::string read_file(const std::string& path);

// gen -> proc -> rep -> gen.feedback, one unit each.
arch::Lsa pipeline_lsa(std::uint64_t backlog, std::uint64_t total, std::uint64_t payload = 150,
                       std::uint64_t rate = 0);

arch::ResilienceConfig replicate(const std::string& component, int f,
                                 FaultModel model = FaultModel::kBFT);

core::Port in(const std::string& name);
core::Port out(const std::string& name);
core::Connection wire(const std::string& from, const std::string& to,
                      core::Technology t = core::Technology::kLocal);

// Randomized DAG architectures: sources first, then transforms, then counter
// sinks. Sources have one in-port "in" fed by the test driver.
struct RandomLsa {
  arch::Lsa lsa;
  std::vector<std::string> sources;
  std::vector<std::string> sinks;
};

RandomLsa random_lsa(std::mt19937_64& rng, int max_components = 8);

// Marks up to `max_groups` non-source components as replicated.
arch::ResilienceConfig random_config(std::mt19937_64& rng, const RandomLsa& r, int max_groups,
                                     const std::vector<int>& f_choices);

// Payloads (hex) consumed per sink. A replicated sink contributes one entry
// per replica instance ("K#0", "K#1", ...).
using Deliveries = std::map<std::string, std::multiset<std::string>>;

struct Input {
  std::int64_t tick = 0;
  std::string component;
  std::string port;
  Bytes payload;
};

// Random inputs for the sources of `r`, spread over the first ticks.
std::vector<Input> random_inputs(std::mt19937_64& rng, const RandomLsa& r, int count);

// Runs `resa` in the simulator, feeding `inputs`, until `ticks` passed.
Deliveries run_and_collect(const arch::Resa& resa, const std::vector<std::string>& sinks,
                           const std::vector<Input>& inputs, std::uint64_t seed,
                           std::int64_t ticks = 200, harness::FaultScript script = {});

// Expected sizes of the replication-enriched architecture, counted straight
// from the insertion and rewiring rules (independent of the transformer).
struct BlockCounts {
  std::size_t components = 0;
  std::size_t frontends = 0;
  std::size_t proxies = 0;
  std::size_t consolidators = 0;
  std::size_t connections = 0;
  std::size_t units = 0;
  bool operator==(const BlockCounts&) const = default;
};

BlockCounts count_oracle(const arch::Lsa& lsa, const arch::ResilienceConfig& config);
BlockCounts count_actual(const arch::Resa& resa);

// A -> B -> C on units u-a, u-b, u-c.
arch::Lsa chain_lsa();

// Placement test shapes 0..6: chain LSAs with zero, one or two replicated
// groups, including groups sharing units through placement hints.
constexpr int kPlacementShapes = 7;
arch::Resa placement_resa(int shape);
// 0..max devices with capacities 0..3 and optional "location" tags.
std::vector<deploy::DeviceDescriptor> random_devices(std::mt19937_64& rng, int max_devices = 8);
// Up to two random pins onto listed devices, or none.
deploy::Pins random_pins(std::mt19937_64& rng, const arch::Resa& resa,
                         const std::vector<deploy::DeviceDescriptor>& devices);

// Independent placement oracle: plain depth-first enumeration of unit ->
// device assignments in unit order, rejecting a partial assignment as soon as
// a capacity, anti-affinity or pin constraint is violated.
std::optional<deploy::Assignment> brute_force_placement(const arch::Resa& resa,
                                                        const std::vector<deploy::DeviceDescriptor>& devices,
                                                        const deploy::Pins& pins);

// Empty string when the assignment is complete and satisfies capacity,
// anti-affinity and pins; otherwise the first violation.
std::string check_assignment(const arch::Resa& resa,
                             const std::vector<deploy::DeviceDescriptor>& devices,
                             const deploy::Pins& pins, const deploy::Assignment& a);

// Key confinement over emitted bundle files: each secret in exactly one
// bundle (its owner's), group public keys held by exactly the members and
// invoking frontends. Empty string when satisfied.
std::string check_key_confinement(const arch::Resa& resa,
                                  const std::map<std::string, std::string>& files);

// Compares emitted files with a golden directory. RESA_UPDATE_GOLDEN=1
// rewrites the directory instead. Returns mismatching paths.
std::vector<std::string> compare_golden(const std::map<std::string, std::string>& files,
                                        const std::string& dir);

}  // namespace resa::testsupport
