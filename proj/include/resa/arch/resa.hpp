#pragma once

#include <map>
#include <string>
#include <vector>

#include "resa/arch/model.hpp"

namespace resa::arch {

struct ReplicationGroup {
  std::string base;  // group id == id of the replicated component
  FaultModel model = FaultModel::kBFT;
  int f = 0;
  int n = 1;
  std::vector<std::string> replica_ids;
  std::vector<std::string> replica_units;
  std::string consolidator;
  std::map<std::string, double> parameters;

  bool operator==(const ReplicationGroup&) const = default;
};

struct FrontendInstance {
  std::string id;
  std::string unit;
  std::string sender;
  std::string group;

  bool operator==(const FrontendInstance&) const = default;
};

struct ReplicaProxyInstance {
  std::string id;
  std::string unit;
  std::string group;
  int replica_index = 0;
  std::string replica;  // replica component id, e.g. "B#2"

  bool operator==(const ReplicaProxyInstance&) const = default;
};

struct ConsolidatorInstance {
  std::string id;
  std::string unit;
  std::string source_group;
  std::string receiver;
  std::string kind;

  bool operator==(const ConsolidatorInstance&) const = default;
};

// Replication-enriched architecture. `components` holds the untouched
// non-replicated components plus one declaration per replica instance.
struct Resa {
  std::vector<ComponentDecl> components;
  std::vector<core::Connection> connections;
  std::vector<UnitDecl> units;
  std::vector<ReplicationGroup> groups;
  std::vector<FrontendInstance> frontends;
  std::vector<ReplicaProxyInstance> proxies;
  std::vector<ConsolidatorInstance> consolidators;

  const ReplicationGroup* group(std::string_view base) const;
  // Group the component id belongs to as a replica, if any.
  const ReplicationGroup* group_of_replica(std::string_view component) const;
  const ComponentDecl* find_component(std::string_view id) const;
  // Endpoint id (component or building block) -> unit id.
  std::map<std::string, std::string> locations() const;

  bool operator==(const Resa&) const = default;
};

std::string serialize_resa(const Resa& resa);
Resa parse_resa(std::string_view json_text);

// Instance naming shared by the transformation, runtime and deployment.
std::string replica_id(const std::string& base, int index);
std::string frontend_id(const std::string& sender, const std::string& group);
std::string proxy_id(const std::string& replica);
std::string consolidator_id(const std::string& group, const std::string& receiver);
std::string fresh_replica_unit(const std::string& base, int index);

}  // namespace resa::arch
