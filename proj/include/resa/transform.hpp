#pragma once

#include <map>
#include <string>
#include <vector>

#include "resa/arch/model.hpp"
#include "resa/arch/resa.hpp"

namespace resa::transform {

// Optional candidate units per group (group id -> unit ids). Replicas of a
// group without hints each get a fresh unit.
struct PlacementHints {
  std::map<std::string, std::vector<std::string>> group_units;
};

class InfeasibleError : public Error {
 public:
  InfeasibleError(std::string group, const std::string& what)
      : Error("group '" + group + "': " + what), group_(std::move(group)) {}
  const std::string& group() const { return group_; }

 private:
  std::string group_;
};

class StructuralError : public Error {
 public:
  using Error::Error;
};

// Transforms the logical architecture into the replication-enriched one.
// Pure: the inputs are never modified.
arch::Resa setup_replication(const arch::Lsa& lsa, const arch::ResilienceConfig& config,
                             const PlacementHints& hints = {});

struct InsertedBlocks {
  std::vector<arch::FrontendInstance> frontends;
  std::vector<arch::ReplicaProxyInstance> proxies;
  std::vector<arch::ConsolidatorInstance> consolidators;
};

// Insertion rules for one unit. `unit` lists the component instances placed
// on it after replica placement; `connections` are the logical (LSA)
// connections over base component ids.
InsertedBlocks insert_building_blocks(const arch::UnitDecl& unit,
                                      const std::vector<arch::ReplicationGroup>& groups,
                                      const std::vector<core::Connection>& connections);

// Rewiring rules: input dissemination through frontends and replica proxies,
// output consolidation through consolidators, n x m frontend-to-proxy
// connections between two groups. Connections between non-replicated
// components are copied unchanged.
std::vector<core::Connection> rewire_connections(
    const std::vector<core::Connection>& connections,
    const std::vector<arch::ReplicationGroup>& groups,
    const std::map<std::string, std::string>& locations);

// Source port a replica proxy uses to relay group-to-group traffic from
// `group`'s out-port `port` into the matching consolidator.
std::string relay_port(const std::string& group, const std::string& port);

}  // namespace resa::transform
