#include "resa/arch/model.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "json.hpp"

namespace resa::arch {

using nlohmann::json;

namespace {

core::Endpoint parse_endpoint(const std::string& text) {
  auto dot = text.rfind('.');
  if (dot == std::string::npos || dot == 0 || dot + 1 == text.size()) {
    throw Error("endpoint '" + text + "' is not of the form <component>.<port>");
  }
  return {text.substr(0, dot), text.substr(dot + 1)};
}

json ports_json(const std::vector<core::Port>& ports, core::Direction dir) {
  json arr = json::array();
  for (const auto& p : ports) {
    if (p.direction == dir) arr.push_back(p.name);
  }
  return arr;
}

}  // namespace

bool ComponentDecl::has_port(std::string_view name, core::Direction dir) const {
  return std::any_of(ports.begin(), ports.end(),
                     [&](const core::Port& p) { return p.name == name && p.direction == dir; });
}

const ComponentDecl* Lsa::find_component(std::string_view id) const {
  for (const auto& c : components) {
    if (c.id == id) return &c;
  }
  return nullptr;
}

std::string Lsa::unit_of(std::string_view component) const {
  for (const auto& u : units) {
    if (std::find(u.components.begin(), u.components.end(), component) != u.components.end()) {
      return u.id;
    }
  }
  return {};
}

std::vector<Diagnostic> validate_lsa(const Lsa& lsa) {
  std::vector<Diagnostic> out;
  std::map<std::string, const ComponentDecl*> by_id;
  for (const auto& c : lsa.components) {
    if (!by_id.emplace(c.id, &c).second) {
      out.push_back({"duplicate id", "component id '" + c.id + "' is declared more than once"});
    }
    std::set<std::pair<std::string, int>> seen;
    for (const auto& p : c.ports) {
      if (!seen.emplace(p.name, static_cast<int>(p.direction)).second) {
        out.push_back({"duplicate port", "component '" + c.id + "' declares port '" + p.name +
                                             "' twice in the same direction"});
      }
    }
  }

  std::set<core::Connection> seen_connections;
  for (const auto& conn : lsa.connections) {
    const std::string label = conn.source.str() + " -> " + conn.target.str();
    auto src = by_id.find(conn.source.component);
    auto dst = by_id.find(conn.target.component);
    if (src == by_id.end()) {
      out.push_back({"unresolved endpoint", label + ": unknown component '" +
                                                conn.source.component + "'"});
    } else if (!src->second->has_port(conn.source.port, core::Direction::kOut)) {
      out.push_back({"port direction",
                     label + ": '" + conn.source.str() + "' is not an out-port"});
    }
    if (dst == by_id.end()) {
      out.push_back({"unresolved endpoint", label + ": unknown component '" +
                                                conn.target.component + "'"});
    } else if (!dst->second->has_port(conn.target.port, core::Direction::kIn)) {
      out.push_back({"port direction", label + ": '" + conn.target.str() + "' is not an in-port"});
    }
    core::Connection key = conn;
    key.technology = core::Technology::kLocal;
    if (!seen_connections.insert(key).second) {
      out.push_back({"duplicate connection", label + " is declared more than once"});
    }
  }

  std::map<std::string, int> assignments;
  std::set<std::string> unit_ids;
  for (const auto& u : lsa.units) {
    if (!unit_ids.insert(u.id).second) {
      out.push_back({"duplicate unit", "unit id '" + u.id + "' is declared more than once"});
    }
    for (const auto& c : u.components) {
      if (!by_id.count(c)) {
        out.push_back({"unresolved endpoint", "unit '" + u.id + "' lists unknown component '" + c + "'"});
      }
      ++assignments[c];
    }
  }
  for (const auto& c : lsa.components) {
    int k = assignments[c.id];
    if (k != 1) {
      out.push_back({"unit assignment", "component '" + c.id + "' is assigned to " +
                                            std::to_string(k) + " units (expected exactly 1)"});
    }
  }
  return out;
}

namespace {

ComponentDecl component_from_json(const json& j) {
  ComponentDecl c;
  c.id = j.at("id").get<std::string>();
  c.type = j.value("type", std::string{});
  for (const auto& p : j.value("in", json::array())) {
    c.ports.push_back({p.get<std::string>(), core::Direction::kIn});
  }
  for (const auto& p : j.value("out", json::array())) {
    c.ports.push_back({p.get<std::string>(), core::Direction::kOut});
  }
  if (j.contains("params")) {
    for (const auto& [k, v] : j.at("params").items()) {
      c.params[k] = v.is_string() ? v.get<std::string>() : v.dump();
    }
  }
  return c;
}

json component_to_json(const ComponentDecl& c) {
  json j;
  j["id"] = c.id;
  j["type"] = c.type;
  j["in"] = ports_json(c.ports, core::Direction::kIn);
  j["out"] = ports_json(c.ports, core::Direction::kOut);
  if (!c.params.empty()) j["params"] = c.params;
  return j;
}

json connection_to_json(const core::Connection& c) {
  return json{{"from", c.source.str()},
              {"to", c.target.str()},
              {"technology", core::to_string(c.technology)}};
}

core::Connection connection_from_json(const json& j) {
  core::Connection c;
  c.source = parse_endpoint(j.at("from").get<std::string>());
  c.target = parse_endpoint(j.at("to").get<std::string>());
  if (j.contains("technology")) {
    c.technology = core::technology_from_string(j.at("technology").get<std::string>());
  }
  return c;
}

json units_to_json(const std::vector<UnitDecl>& units) {
  json arr = json::array();
  for (const auto& u : units) arr.push_back(json{{"id", u.id}, {"components", u.components}});
  return arr;
}

std::vector<UnitDecl> units_from_json(const json& arr) {
  std::vector<UnitDecl> out;
  for (const auto& u : arr) {
    out.push_back({u.at("id").get<std::string>(),
                   u.value("components", std::vector<std::string>{})});
  }
  return out;
}

}  // namespace

// Exposed to resa.cpp.
json lsa_parts_to_json(const std::vector<ComponentDecl>& components,
                       const std::vector<core::Connection>& connections,
                       const std::vector<UnitDecl>& units) {
  json j;
  j["components"] = json::array();
  for (const auto& c : components) j["components"].push_back(component_to_json(c));
  j["connections"] = json::array();
  for (const auto& c : connections) j["connections"].push_back(connection_to_json(c));
  j["units"] = units_to_json(units);
  return j;
}

void lsa_parts_from_json(const json& j, std::vector<ComponentDecl>& components,
                         std::vector<core::Connection>& connections,
                         std::vector<UnitDecl>& units) {
  for (const auto& c : j.value("components", json::array())) {
    components.push_back(component_from_json(c));
  }
  for (const auto& c : j.value("connections", json::array())) {
    connections.push_back(connection_from_json(c));
  }
  units = units_from_json(j.value("units", json::array()));
}

Lsa parse_lsa(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw Error(std::string("LSA file is not valid JSON: ") + e.what());
  }
  Lsa lsa;
  try {
    lsa_parts_from_json(j, lsa.components, lsa.connections, lsa.units);
    // Connections without an explicit technology are local when both ends
    // share a unit and socket-based otherwise.
    const auto& raw = j.value("connections", json::array());
    for (std::size_t i = 0; i < raw.size(); ++i) {
      if (raw[i].contains("technology")) continue;
      auto& c = lsa.connections[i];
      auto su = lsa.unit_of(c.source.component);
      auto tu = lsa.unit_of(c.target.component);
      c.technology = (!su.empty() && su == tu) ? core::Technology::kLocal : core::Technology::kSocket;
    }
  } catch (const json::exception& e) {
    throw Error(std::string("malformed LSA file: ") + e.what());
  }
  return lsa;
}

std::string serialize_lsa(const Lsa& lsa) {
  return lsa_parts_to_json(lsa.components, lsa.connections, lsa.units).dump(2) + "\n";
}

// ---------------------------------------------------------------------------

ConfigError::ConfigError(std::string component, std::string field, const std::string& what)
    : Error("resilience config, component '" + component + "', field '" + field + "': " + what),
      component_(std::move(component)),
      field_(std::move(field)) {}

std::vector<ReplicationRequest> ResilienceConfig::active() const {
  std::vector<ReplicationRequest> out;
  for (const auto& e : entries) {
    if (e.enabled) out.push_back(e);
  }
  return out;
}

const ReplicationRequest* ResilienceConfig::find(std::string_view component) const {
  for (const auto& e : entries) {
    if (e.component == component) return &e;
  }
  return nullptr;
}

int group_size(int f, FaultModel model) {
  if (f < 0) throw Error("f must be non-negative, got " + std::to_string(f));
  return model == FaultModel::kBFT ? 3 * f + 1 : 2 * f + 1;
}

int effective_group_size(const ReplicationRequest& request) {
  int bound = group_size(request.f, request.model);
  return request.n ? std::max(*request.n, bound) : bound;
}

namespace {

void warn_unknown(const json& obj, std::initializer_list<const char*> known,
                  const std::string& where, std::vector<std::string>& warnings) {
  if (!obj.is_object()) return;
  for (const auto& [key, value] : obj.items()) {
    bool ok = std::any_of(known.begin(), known.end(), [&](const char* k) { return key == k; });
    if (!ok) warnings.push_back(where + ": ignoring unknown key '" + key + "'");
  }
}

int integer_field(const json& obj, const char* field, const std::string& component) {
  if (!obj.contains(field)) throw ConfigError(component, field, "missing");
  const json& v = obj.at(field);
  if (v.is_number_integer()) return v.get<int>();
  if (v.is_number_float()) {
    double d = v.get<double>();
    if (std::floor(d) == d) return static_cast<int>(d);
  }
  throw ConfigError(component, field, "must be an integer, got " + v.dump());
}

}  // namespace

ResilienceConfig parse_resilience_config(std::string_view text,
                                         const consolidate::Registry& registry) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(std::string("resilience config is not valid JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("components") || !j.at("components").is_array()) {
    throw Error("resilience config must have a top-level \"components\" array");
  }
  ResilienceConfig cfg;
  warn_unknown(j, {"components"}, "top level", cfg.warnings);
  std::set<std::string> seen;
  std::size_t index = 0;
  for (const auto& entry : j.at("components")) {
    const std::string label = "entry " + std::to_string(index++);
    if (!entry.is_object() || !entry.contains("id") || !entry.at("id").is_string()) {
      throw ConfigError(label, "id", "missing");
    }
    ReplicationRequest req;
    req.component = entry.at("id").get<std::string>();
    if (!seen.insert(req.component).second) {
      throw ConfigError(req.component, "id", "component appears more than once");
    }
    warn_unknown(entry, {"id", "mechanisms"}, req.component, cfg.warnings);
    const json mechanisms = entry.value("mechanisms", json::object());
    warn_unknown(mechanisms, {"activeReplication"}, req.component + ".mechanisms", cfg.warnings);
    if (!mechanisms.contains("activeReplication")) {
      cfg.entries.push_back(std::move(req));
      continue;
    }
    const json& ar = mechanisms.at("activeReplication");
    warn_unknown(ar, {"enabled", "f", "faultModel", "consolidator", "n", "parameters"},
                 req.component + ".activeReplication", cfg.warnings);
    if (!ar.contains("enabled") || !ar.at("enabled").is_boolean()) {
      throw ConfigError(req.component, "enabled", "missing or not a boolean");
    }
    req.enabled = ar.at("enabled").get<bool>();
    req.f = integer_field(ar, "f", req.component);
    if (req.f < 0) throw ConfigError(req.component, "f", "must be non-negative, got " + std::to_string(req.f));
    if (!ar.contains("faultModel") || !ar.at("faultModel").is_string()) {
      throw ConfigError(req.component, "faultModel", "missing");
    }
    const auto model = ar.at("faultModel").get<std::string>();
    if (model != "BFT" && model != "CFT") {
      throw ConfigError(req.component, "faultModel", "must be BFT or CFT, got '" + model + "'");
    }
    req.model = fault_model_from_string(model);
    if (ar.contains("consolidator")) {
      if (!ar.at("consolidator").is_string()) {
        throw ConfigError(req.component, "consolidator", "must be a string");
      }
      req.consolidator = ar.at("consolidator").get<std::string>();
    } else {
      req.consolidator = req.model == FaultModel::kBFT ? "BFTConsolidator" : "CFTConsolidator";
    }
    if (!registry.contains(req.consolidator)) {
      throw ConfigError(req.component, "consolidator", "unknown consolidator '" + req.consolidator + "'");
    }
    if (ar.contains("n")) {
      int n = integer_field(ar, "n", req.component);
      int bound = group_size(req.f, req.model);
      if (n < bound) {
        throw ConfigError(req.component, "n",
                          "n=" + std::to_string(n) + " is below the bound " + std::to_string(bound));
      }
      req.n = n;
    }
    if (ar.contains("parameters")) {
      for (const auto& [k, v] : ar.at("parameters").items()) {
        if (!v.is_number()) throw ConfigError(req.component, "parameters." + k, "must be numeric");
        req.parameters[k] = v.get<double>();
      }
    }
    cfg.entries.push_back(std::move(req));
  }
  return cfg;
}

std::string serialize_resilience_config(const ResilienceConfig& config) {
  json comps = json::array();
  for (const auto& e : config.entries) {
    json entry{{"id", e.component}};
    if (!e.consolidator.empty()) {
      json ar{{"enabled", e.enabled},
              {"f", e.f},
              {"faultModel", to_string(e.model)},
              {"consolidator", e.consolidator}};
      if (e.n) ar["n"] = *e.n;
      if (!e.parameters.empty()) ar["parameters"] = e.parameters;
      entry["mechanisms"] = json{{"activeReplication", ar}};
    } else {
      entry["mechanisms"] = json::object();
    }
    comps.push_back(entry);
  }
  return json{{"components", comps}}.dump(2) + "\n";
}

}  // namespace resa::arch
