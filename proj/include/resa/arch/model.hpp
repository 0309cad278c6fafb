#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "resa/consolidate.hpp"
#include "resa/core/component.hpp"
#include "resa/core/fault_model.hpp"

namespace resa::arch {

// Declarative description of a component; `type` names a behaviour in the
// runtime's component registry, `params` are passed to its factory.
struct ComponentDecl {
  std::string id;
  std::string type;
  std::vector<core::Port> ports;
  std::map<std::string, std::string> params;

  bool has_port(std::string_view name, core::Direction dir) const;
  bool operator==(const ComponentDecl&) const = default;
};

struct UnitDecl {
  std::string id;
  std::vector<std::string> components;

  bool operator==(const UnitDecl&) const = default;
};

struct Lsa {
  std::vector<ComponentDecl> components;
  std::vector<core::Connection> connections;
  std::vector<UnitDecl> units;

  const ComponentDecl* find_component(std::string_view id) const;
  // Empty when unassigned.
  std::string unit_of(std::string_view component) const;

  bool operator==(const Lsa&) const = default;
};

struct Diagnostic {
  std::string code;
  std::string message;
};

// Returns an empty list iff the architecture is well formed.
std::vector<Diagnostic> validate_lsa(const Lsa& lsa);

Lsa parse_lsa(std::string_view json_text);
std::string serialize_lsa(const Lsa& lsa);

// ---------------------------------------------------------------------------
// Resilience configuration

struct ReplicationRequest {
  std::string component;
  bool enabled = false;
  int f = 0;
  FaultModel model = FaultModel::kBFT;
  std::string consolidator;
  std::optional<int> n;
  std::map<std::string, double> parameters;

  bool operator==(const ReplicationRequest&) const = default;
};

struct ResilienceConfig {
  std::vector<ReplicationRequest> entries;
  std::vector<std::string> warnings;

  std::vector<ReplicationRequest> active() const;
  const ReplicationRequest* find(std::string_view component) const;
};

class ConfigError : public Error {
 public:
  ConfigError(std::string component, std::string field, const std::string& what);
  const std::string& component() const { return component_; }
  const std::string& field() const { return field_; }

 private:
  std::string component_;
  std::string field_;
};

ResilienceConfig parse_resilience_config(
    std::string_view text,
    const consolidate::Registry& registry = consolidate::Registry::builtin());
std::string serialize_resilience_config(const ResilienceConfig& config);

// Minimal group size tolerating f faults: 3f+1 (BFT) or 2f+1 (CFT).
int group_size(int f, FaultModel model);

// Size actually used for a request: the explicit override if present
// (must satisfy the bound), the minimal size otherwise.
int effective_group_size(const ReplicationRequest& request);

}  // namespace resa::arch
