#include "resa/arch/resa.hpp"

#include <cctype>

#include "json.hpp"

namespace resa::arch {

using nlohmann::json;

// Defined in model.cpp.
json lsa_parts_to_json(const std::vector<ComponentDecl>& components,
                       const std::vector<core::Connection>& connections,
                       const std::vector<UnitDecl>& units);
void lsa_parts_from_json(const json& j, std::vector<ComponentDecl>& components,
                         std::vector<core::Connection>& connections, std::vector<UnitDecl>& units);

std::string replica_id(const std::string& base, int index) {
  return base + "#" + std::to_string(index);
}

std::string frontend_id(const std::string& sender, const std::string& group) {
  return "F[" + sender + "->" + group + "]";
}

std::string proxy_id(const std::string& replica) { return "R[" + replica + "]"; }

std::string consolidator_id(const std::string& group, const std::string& receiver) {
  return "Cons[" + group + "->" + receiver + "]";
}

std::string fresh_replica_unit(const std::string& base, int index) {
  std::string name = "unit-";
  for (char c : base) {
    name.push_back(std::isalnum(static_cast<unsigned char>(c))
                       ? static_cast<char>(std::tolower(static_cast<unsigned char>(c)))
                       : '-');
  }
  return name + std::to_string(index);
}

const ReplicationGroup* Resa::group(std::string_view base) const {
  for (const auto& g : groups) {
    if (g.base == base) return &g;
  }
  return nullptr;
}

const ReplicationGroup* Resa::group_of_replica(std::string_view component) const {
  for (const auto& g : groups) {
    for (const auto& r : g.replica_ids) {
      if (r == component) return &g;
    }
  }
  return nullptr;
}

const ComponentDecl* Resa::find_component(std::string_view id) const {
  for (const auto& c : components) {
    if (c.id == id) return &c;
  }
  return nullptr;
}

std::map<std::string, std::string> Resa::locations() const {
  std::map<std::string, std::string> loc;
  for (const auto& u : units) {
    for (const auto& c : u.components) loc[c] = u.id;
  }
  for (const auto& f : frontends) loc[f.id] = f.unit;
  for (const auto& p : proxies) loc[p.id] = p.unit;
  for (const auto& c : consolidators) loc[c.id] = c.unit;
  return loc;
}

std::string serialize_resa(const Resa& resa) {
  json j = lsa_parts_to_json(resa.components, resa.connections, resa.units);
  j["groups"] = json::array();
  for (const auto& g : resa.groups) {
    json gj{{"id", g.base},
            {"faultModel", to_string(g.model)},
            {"f", g.f},
            {"n", g.n},
            {"replicas", g.replica_ids},
            {"units", g.replica_units},
            {"consolidator", g.consolidator}};
    if (!g.parameters.empty()) gj["parameters"] = g.parameters;
    j["groups"].push_back(gj);
  }
  j["frontends"] = json::array();
  for (const auto& f : resa.frontends) {
    j["frontends"].push_back(
        json{{"id", f.id}, {"unit", f.unit}, {"sender", f.sender}, {"group", f.group}});
  }
  j["proxies"] = json::array();
  for (const auto& p : resa.proxies) {
    j["proxies"].push_back(json{{"id", p.id},
                                {"unit", p.unit},
                                {"group", p.group},
                                {"replicaIndex", p.replica_index},
                                {"replica", p.replica}});
  }
  j["consolidators"] = json::array();
  for (const auto& c : resa.consolidators) {
    j["consolidators"].push_back(json{{"id", c.id},
                                      {"unit", c.unit},
                                      {"sourceGroup", c.source_group},
                                      {"receiver", c.receiver},
                                      {"kind", c.kind}});
  }
  return j.dump(2) + "\n";
}

Resa parse_resa(std::string_view json_text) {
  Resa r;
  try {
    json j = json::parse(json_text);
    lsa_parts_from_json(j, r.components, r.connections, r.units);
    for (const auto& g : j.value("groups", json::array())) {
      ReplicationGroup rg;
      rg.base = g.at("id").get<std::string>();
      rg.model = fault_model_from_string(g.at("faultModel").get<std::string>());
      rg.f = g.at("f").get<int>();
      rg.n = g.at("n").get<int>();
      rg.replica_ids = g.at("replicas").get<std::vector<std::string>>();
      rg.replica_units = g.at("units").get<std::vector<std::string>>();
      rg.consolidator = g.value("consolidator", std::string{});
      if (g.contains("parameters")) {
        rg.parameters = g.at("parameters").get<std::map<std::string, double>>();
      }
      r.groups.push_back(std::move(rg));
    }
    for (const auto& f : j.value("frontends", json::array())) {
      r.frontends.push_back({f.at("id"), f.at("unit"), f.at("sender"), f.at("group")});
    }
    for (const auto& p : j.value("proxies", json::array())) {
      r.proxies.push_back(
          {p.at("id"), p.at("unit"), p.at("group"), p.at("replicaIndex").get<int>(), p.at("replica")});
    }
    for (const auto& c : j.value("consolidators", json::array())) {
      r.consolidators.push_back(
          {c.at("id"), c.at("unit"), c.at("sourceGroup"), c.at("receiver"), c.at("kind")});
    }
  } catch (const json::exception& e) {
    throw Error(std::string("malformed ReSA file: ") + e.what());
  }
  return r;
}

}  // namespace resa::arch
