#include "resa/transform.hpp"

#include <algorithm>
#include <set>

namespace resa::transform {

using arch::ReplicationGroup;
using core::Connection;
using core::Endpoint;
using core::Technology;

namespace {

const ReplicationGroup* find_group(const std::vector<ReplicationGroup>& groups,
                                   const std::string& base) {
  for (const auto& g : groups) {
    if (g.base == base) return &g;
  }
  return nullptr;
}

// Base id of a component instance: the group id for replicas, itself otherwise.
std::string base_of(const std::vector<ReplicationGroup>& groups, const std::string& id) {
  for (const auto& g : groups) {
    if (std::find(g.replica_ids.begin(), g.replica_ids.end(), id) != g.replica_ids.end()) {
      return g.base;
    }
  }
  return id;
}

// Logical senders of a connection: the replicas for a replicated source.
std::vector<std::string> instances(const std::vector<ReplicationGroup>& groups,
                                   const std::string& base) {
  if (const auto* g = find_group(groups, base)) return g->replica_ids;
  return {base};
}

template <typename T>
void push_unique(std::vector<T>& out, std::set<T>& seen, T value) {
  if (seen.insert(value).second) out.push_back(std::move(value));
}

}  // namespace

std::string relay_port(const std::string& group, const std::string& port) {
  return group + "/" + port;
}

InsertedBlocks insert_building_blocks(const arch::UnitDecl& unit,
                                      const std::vector<ReplicationGroup>& groups,
                                      const std::vector<Connection>& connections) {
  InsertedBlocks out;
  std::set<std::string> seen;
  for (const auto& instance : unit.components) {
    const std::string base = base_of(groups, instance);
    // Frontend: per replicated component this instance sends to.
    for (const auto& c : connections) {
      if (c.source.component != base) continue;
      if (const auto* g = find_group(groups, c.target.component)) {
        auto id = arch::frontend_id(instance, g->base);
        if (seen.insert(id).second) out.frontends.push_back({id, unit.id, instance, g->base});
      }
    }
    // Consolidator: per replicated component this instance receives from.
    for (const auto& c : connections) {
      if (c.target.component != base) continue;
      if (const auto* g = find_group(groups, c.source.component)) {
        auto id = arch::consolidator_id(g->base, instance);
        if (seen.insert(id).second) {
          out.consolidators.push_back({id, unit.id, g->base, instance, g->consolidator});
        }
      }
    }
    // Replica proxy: iff a replica instance is placed here.
    if (const auto* g = find_group(groups, base); g && base != instance) {
      auto idx = std::find(g->replica_ids.begin(), g->replica_ids.end(), instance) -
                 g->replica_ids.begin();
      out.proxies.push_back(
          {arch::proxy_id(instance), unit.id, g->base, static_cast<int>(idx), instance});
    }
  }
  return out;
}

std::vector<Connection> rewire_connections(const std::vector<Connection>& connections,
                                           const std::vector<ReplicationGroup>& groups,
                                           const std::map<std::string, std::string>& locations) {
  auto link = [&](const std::string& a, const std::string& b) {
    auto ia = locations.find(a), ib = locations.find(b);
    bool same = ia != locations.end() && ib != locations.end() && ia->second == ib->second;
    return same ? Technology::kLocal : Technology::kSocket;
  };

  std::vector<Connection> out;
  std::set<Connection> seen;
  for (const auto& c : connections) {
    const auto* src = find_group(groups, c.source.component);
    const auto* dst = find_group(groups, c.target.component);
    if (!src && !dst) {
      push_unique(out, seen, c);
      continue;
    }
    if (dst) {
      // Input dissemination: every sending instance talks to its own
      // frontend, which reaches every replica proxy of the target group.
      for (const auto& sender : instances(groups, c.source.component)) {
        const auto fe = arch::frontend_id(sender, dst->base);
        push_unique(out, seen,
                    Connection{{sender, c.source.port}, {fe, c.target.port},
                               Technology::kTotalOrderMulticast});
        for (const auto& replica : dst->replica_ids) {
          push_unique(out, seen,
                      Connection{{fe, "out"}, {arch::proxy_id(replica), "in"},
                                 Technology::kTotalOrderMulticast});
        }
      }
      for (const auto& replica : dst->replica_ids) {
        const auto proxy = arch::proxy_id(replica);
        if (src) {
          // Ordered copies from the n sending replicas are deduplicated by a
          // consolidator in front of each receiving replica.
          const auto cons = arch::consolidator_id(src->base, replica);
          push_unique(out, seen,
                      Connection{{proxy, relay_port(src->base, c.source.port)},
                                 {cons, c.source.port}, Technology::kLocal});
          push_unique(out, seen,
                      Connection{{cons, c.source.port}, {replica, c.target.port}, Technology::kLocal});
        } else {
          push_unique(out, seen,
                      Connection{{proxy, c.target.port}, {replica, c.target.port}, Technology::kLocal});
        }
      }
      continue;
    }
    // Output consolidation toward a non-replicated receiver.
    const auto cons = arch::consolidator_id(src->base, c.target.component);
    for (const auto& replica : src->replica_ids) {
      push_unique(out, seen,
                  Connection{{replica, c.source.port}, {cons, c.source.port}, link(replica, cons)});
    }
    push_unique(out, seen,
                Connection{{cons, c.source.port}, {c.target.component, c.target.port},
                           Technology::kLocal});
  }

  for (const auto& c : out) {
    if (!locations.count(c.source.component) || !locations.count(c.target.component)) {
      throw StructuralError("internal invariant violated: rewired connection " + c.source.str() +
                            " -> " + c.target.str() + " references an unplaced endpoint");
    }
  }
  return out;
}

arch::Resa setup_replication(const arch::Lsa& lsa, const arch::ResilienceConfig& config,
                             const PlacementHints& hints) {
  if (auto diags = arch::validate_lsa(lsa); !diags.empty()) {
    std::string msg = "cannot transform an invalid LSA:";
    for (const auto& d : diags) msg += "\n  " + d.code + ": " + d.message;
    throw StructuralError(msg);
  }

  std::set<std::string> taken_units;
  for (const auto& u : lsa.units) taken_units.insert(u.id);

  // Groups in LSA component order, so output is independent of config order.
  std::vector<ReplicationGroup> groups;
  for (const auto& comp : lsa.components) {
    const auto* req = config.find(comp.id);
    if (!req || !req->enabled) continue;
    ReplicationGroup g;
    g.base = comp.id;
    g.model = req->model;
    g.f = req->f;
    g.n = arch::effective_group_size(*req);
    g.consolidator = req->consolidator;
    g.parameters = req->parameters;
    auto hint = hints.group_units.find(comp.id);
    std::vector<std::string> candidates;
    if (hint != hints.group_units.end()) {
      std::set<std::string> distinct;
      for (const auto& u : hint->second) {
        if (distinct.insert(u).second) candidates.push_back(u);
      }
      if (static_cast<int>(candidates.size()) < g.n) {
        throw InfeasibleError(comp.id, "needs " + std::to_string(g.n) + " distinct units but only " +
                                           std::to_string(candidates.size()) + " candidates were given");
      }
    }
    for (int i = 0; i < g.n; ++i) {
      g.replica_ids.push_back(arch::replica_id(comp.id, i));
      std::string unit;
      if (!candidates.empty()) {
        unit = candidates[i];
      } else {
        unit = arch::fresh_replica_unit(comp.id, i);
        while (taken_units.count(unit)) unit += "x";
      }
      taken_units.insert(unit);
      g.replica_units.push_back(unit);
    }
    groups.push_back(std::move(g));
  }
  for (const auto& req : config.active()) {
    if (!lsa.find_component(req.component)) {
      throw StructuralError("component '" + req.component +
                            "' is configured for replication but is not part of the LSA");
    }
  }

  arch::Resa resa;
  resa.groups = groups;

  for (const auto& comp : lsa.components) {
    if (const auto* g = find_group(groups, comp.id)) {
      for (const auto& rid : g->replica_ids) {
        auto copy = comp;
        copy.id = rid;
        resa.components.push_back(std::move(copy));
      }
    } else {
      resa.components.push_back(comp);
    }
  }

  // Units: replicated bases leave their unit; units emptied by that vanish.
  for (const auto& u : lsa.units) {
    arch::UnitDecl copy{u.id, {}};
    for (const auto& c : u.components) {
      if (!find_group(groups, c)) copy.components.push_back(c);
    }
    if (!copy.components.empty() || u.components.empty()) resa.units.push_back(std::move(copy));
  }
  for (const auto& g : groups) {
    for (int i = 0; i < g.n; ++i) {
      auto it = std::find_if(resa.units.begin(), resa.units.end(),
                             [&](const arch::UnitDecl& u) { return u.id == g.replica_units[i]; });
      if (it == resa.units.end()) {
        resa.units.push_back({g.replica_units[i], {}});
        it = std::prev(resa.units.end());
      }
      it->components.push_back(g.replica_ids[i]);
    }
  }
  for (const auto& g : groups) {
    // Two replicas of one group sharing a unit would void fault independence.
    std::set<std::string> distinct(g.replica_units.begin(), g.replica_units.end());
    if (static_cast<int>(distinct.size()) != g.n) {
      throw InfeasibleError(g.base, "replicas must be placed on pairwise-distinct units");
    }
  }

  for (const auto& u : resa.units) {
    auto blocks = insert_building_blocks(u, groups, lsa.connections);
    for (auto& f : blocks.frontends) resa.frontends.push_back(std::move(f));
    for (auto& p : blocks.proxies) resa.proxies.push_back(std::move(p));
    for (auto& c : blocks.consolidators) resa.consolidators.push_back(std::move(c));
  }

  resa.connections = rewire_connections(lsa.connections, groups, resa.locations());
  return resa;
}

}  // namespace resa::transform
