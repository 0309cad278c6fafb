#include "resa/deploy.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>

#include "json.hpp"
#include "resa/core/crypto.hpp"

namespace resa::deploy {

using nlohmann::json;
using Kind = PlacementError::Kind;

std::vector<DeviceDescriptor> parse_devices(std::string_view json_text) {
  std::vector<DeviceDescriptor> out;
  try {
    json j = json::parse(json_text);
    const json& list = j.is_array() ? j : j.at("devices");
    for (const auto& d : list) {
      DeviceDescriptor dev;
      dev.name = d.at("name").get<std::string>();
      dev.type = d.value("type", "");
      dev.architecture = d.value("architecture", "");
      dev.tags = d.value("tags", std::map<std::string, std::string>{});
      dev.capacity = d.value("capacity", 1);
      out.push_back(std::move(dev));
    }
  } catch (const json::exception& e) {
    throw Error(std::string("device inventory: ") + e.what());
  }
  validate_devices(out);
  return out;
}

static json device_json(const DeviceDescriptor& d) {
  return {{"name", d.name},
          {"type", d.type},
          {"architecture", d.architecture},
          {"tags", d.tags},
          {"capacity", d.capacity}};
}

std::string serialize_devices(const std::vector<DeviceDescriptor>& devices) {
  json arr = json::array();
  for (const auto& d : devices) arr.push_back(device_json(d));
  return json{{"devices", arr}}.dump(2) + "\n";
}

void validate_devices(const std::vector<DeviceDescriptor>& devices) {
  std::set<std::string> names;
  for (const auto& d : devices) {
    if (d.name.empty()) throw Error("device with empty name");
    if (!names.insert(d.name).second) throw Error("device '" + d.name + "' is listed more than once");
    if (d.capacity < 0) throw Error("device '" + d.name + "' has negative capacity");
  }
}

std::pair<std::string, std::string> parse_pin(const std::string& text) {
  auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 == text.size()) {
    throw Error("pin '" + text + "' is not of the form unit=device");
  }
  return {text.substr(0, eq), text.substr(eq + 1)};
}

std::map<std::string, std::vector<std::string>> group_units(const arch::Resa& resa) {
  std::map<std::string, std::vector<std::string>> out;
  for (const auto& g : resa.groups) out[g.base] = g.replica_units;
  return out;
}

Assignment plan_placement(const arch::Resa& resa, const std::vector<DeviceDescriptor>& devices,
                          const Pins& pins) {
  validate_devices(devices);
  std::map<std::string, int> residual;
  std::map<std::string, const DeviceDescriptor*> by_name;
  for (const auto& d : devices) {
    residual[d.name] = d.capacity;
    by_name[d.name] = &d;
  }
  std::set<std::string> units;
  for (const auto& u : resa.units) units.insert(u.id);

  Assignment a;
  for (const auto& [unit, device] : pins) {
    if (!units.count(unit)) throw PlacementError(Kind::kInvalidPin, "", 0, "pin names unknown unit '" + unit + "'");
    if (!residual.count(device)) {
      throw PlacementError(Kind::kInvalidPin, "", 0, "pin names unknown device '" + device + "'");
    }
    if (--residual[device] < 0) {
      throw PlacementError(Kind::kPinConflict, "", 0,
                           "pins exceed the capacity of device '" + device + "'");
    }
    a[unit] = device;
  }

  // Groups largest first; ties by id.
  std::vector<const arch::ReplicationGroup*> groups;
  for (const auto& g : resa.groups) groups.push_back(&g);
  std::stable_sort(groups.begin(), groups.end(),
                   [](const auto* x, const auto* y) { return x->replica_units.size() > y->replica_units.size(); });

  std::map<std::string, std::set<std::string>> conflicts;  // unit -> units sharing a group
  for (const auto* g : groups) {
    const auto& us = g->replica_units;
    for (std::size_t i = 0; i < us.size(); ++i) {
      for (std::size_t j = 0; j < us.size(); ++j) {
        if (i == j) continue;
        if (us[i] == us[j]) {
          throw PlacementError(Kind::kInfeasible, g->base, 1,
                               "group '" + g->base + "': two replicas share unit '" + us[i] +
                                   "', violating anti-affinity");
        }
        conflicts[us[i]].insert(us[j]);
      }
      auto pi = a.find(us[i]);
      if (pi == a.end()) continue;
      for (std::size_t j = i + 1; j < us.size(); ++j) {
        auto pj = a.find(us[j]);
        if (pj != a.end() && pj->second == pi->second) {
          throw PlacementError(Kind::kPinConflict, g->base, 0,
                               "anti-affinity: replicas of group '" + g->base + "' on units '" + us[i] +
                                   "' and '" + us[j] + "' are pinned to the same device '" + pi->second + "'");
        }
      }
    }
    int eligible = 0;
    for (const auto& d : devices) eligible += d.capacity > 0 ? 1 : 0;
    int n = static_cast<int>(us.size());
    if (eligible < n) {
      throw PlacementError(Kind::kInfeasible, g->base, n - eligible,
                           "group '" + g->base + "' needs " + std::to_string(n) +
                               " distinct devices but only " + std::to_string(eligible) +
                               " are eligible (shortfall " + std::to_string(n - eligible) + ")");
    }
  }
  int capacity = 0;
  for (const auto& d : devices) capacity += d.capacity;
  int unit_count = static_cast<int>(units.size());
  if (capacity < unit_count) {
    throw PlacementError(Kind::kInfeasible, "", unit_count - capacity,
                         std::to_string(unit_count) + " units exceed total device capacity " +
                             std::to_string(capacity) + " (shortfall " +
                             std::to_string(unit_count - capacity) + ")");
  }

  std::vector<std::string> order;
  for (const auto* g : groups) {
    for (const auto& u : g->replica_units) {
      if (!a.count(u) && std::find(order.begin(), order.end(), u) == order.end()) order.push_back(u);
    }
  }
  std::vector<std::string> plain;
  for (const auto& u : resa.units) {
    if (!a.count(u.id) && std::find(order.begin(), order.end(), u.id) == order.end()) plain.push_back(u.id);
  }
  std::sort(plain.begin(), plain.end());

  auto location = [&](const std::string& device) -> std::string {
    auto it = by_name[device]->tags.find("location");
    return it == by_name[device]->tags.end() ? std::string() : it->second;
  };

  std::function<bool(std::size_t)> search = [&](std::size_t i) -> bool {
    if (i == order.size()) {
      int left = 0;
      for (const auto& [_, r] : residual) left += r;
      if (left < static_cast<int>(plain.size())) return false;
      auto dev = residual.begin();
      for (const auto& u : plain) {
        while (dev->second == 0) ++dev;
        a[u] = dev->first;
        --dev->second;
      }
      return true;
    }
    const auto& unit = order[i];
    std::set<std::string> taken, used_locations;
    for (const auto& other : conflicts[unit]) {
      auto it = a.find(other);
      if (it == a.end()) continue;
      taken.insert(it->second);
      auto loc = location(it->second);
      if (!loc.empty()) used_locations.insert(loc);
    }
    std::vector<std::string> candidates;
    for (const auto& [name, r] : residual) {
      if (r > 0 && !taken.count(name)) candidates.push_back(name);
    }
    std::stable_sort(candidates.begin(), candidates.end(), [&](const auto& x, const auto& y) {
      auto lx = location(x), ly = location(y);
      bool sx = !lx.empty() && used_locations.count(lx), sy = !ly.empty() && used_locations.count(ly);
      return sx < sy;
    });
    for (const auto& d : candidates) {
      a[unit] = d;
      --residual[d];
      if (search(i + 1)) return true;
      ++residual[d];
      a.erase(unit);
    }
    return false;
  };

  if (!search(0)) {
    std::string g = groups.empty() ? std::string() : groups.front()->base;
    throw PlacementError(Kind::kInfeasible, g, 1,
                         "no assignment satisfies capacity, anti-affinity and pins" +
                             (g.empty() ? std::string() : " (largest group '" + g + "')"));
  }
  return a;
}

order::KeyPair derive_key_pair(const std::string& principal, std::uint64_t seed) {
  ByteWriter w;
  w.str("resa-deploy-key").u64(seed).str(principal);
  auto digest = sha256(w.data());
  return order::KeyPair::from_seed(principal, digest);
}

KeyPlan generate_keys(const arch::Resa& resa, std::uint64_t seed) {
  KeyPlan plan;
  for (const auto& g : resa.groups) {
    for (std::size_t i = 0; i < g.replica_ids.size(); ++i) {
      KeyBundle b;
      b.holder = g.replica_ids[i];
      b.unit = i < g.replica_units.size() ? g.replica_units[i] : std::string();
      b.own = derive_key_pair(b.holder, seed);
      plan.bundles[b.holder] = std::move(b);
    }
  }
  for (const auto& f : resa.frontends) {
    KeyBundle b;
    b.holder = f.id;
    b.unit = f.unit;
    b.own = derive_key_pair(f.id, seed);
    plan.bundles[b.holder] = std::move(b);
  }
  for (auto& [holder, b] : plan.bundles) {
    plan.secret_holder[holder] = holder;
    plan.public_recipients[holder].push_back(holder);
  }
  auto give = [&](const std::string& key_owner, const std::string& recipient) {
    auto& r = plan.public_recipients[key_owner];
    if (std::find(r.begin(), r.end(), recipient) == r.end()) r.push_back(recipient);
  };
  for (const auto& g : resa.groups) {
    std::vector<std::string> members = g.replica_ids;
    std::vector<std::string> invokers;
    for (const auto& f : resa.frontends) {
      if (f.group == g.base) invokers.push_back(f.id);
    }
    for (const auto& key_owner : members) {
      const auto& pk = plan.bundles[key_owner].own->public_key;
      for (const auto& r : members) {
        plan.bundles[r].group_keys[g.base][key_owner] = pk;
        give(key_owner, r);
      }
      for (const auto& r : invokers) {
        plan.bundles[r].group_keys[g.base][key_owner] = pk;
        give(key_owner, r);
      }
    }
    for (const auto& client : invokers) {
      const auto& pk = plan.bundles[client].own->public_key;
      for (const auto& r : members) {
        plan.bundles[r].client_keys[client] = pk;
        give(client, r);
      }
    }
  }
  for (auto& [_, r] : plan.public_recipients) std::sort(r.begin(), r.end());
  return plan;
}

DeploymentPlan plan_deployment(const arch::Resa& resa, const std::vector<DeviceDescriptor>& devices,
                               const Pins& pins, std::uint64_t seed) {
  DeploymentPlan p;
  p.assignment = plan_placement(resa, devices, pins);
  p.keys = generate_keys(resa, seed);
  p.seed = seed;
  return p;
}

int group_port(int group_index) { return kBasePort + kGroupPortStride * group_index; }

std::string file_stem(const std::string& id) {
  std::string out;
  for (char c : id) {
    bool keep = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
    out.push_back(keep ? c : '_');
  }
  return out;
}

namespace {

std::string endpoint(const core::Endpoint& e) { return e.component + "." + e.port; }

json ports(const arch::ComponentDecl& c, core::Direction dir) {
  json arr = json::array();
  for (const auto& p : c.ports) {
    if (p.direction == dir) arr.push_back(p.name);
  }
  return arr;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

}  // namespace

std::map<std::string, std::string> emit_artifacts(const DeploymentPlan& plan, const arch::Resa& resa,
                                                  const std::vector<DeviceDescriptor>& devices) {
  std::map<std::string, std::string> files;
  const auto loc = resa.locations();
  auto device_of = [&](const std::string& unit) {
    auto it = plan.assignment.find(unit);
    return it == plan.assignment.end() ? std::string() : it->second;
  };
  auto bundle_path = [](const std::string& holder) { return "keys/" + file_stem(holder) + ".json"; };
  auto host_path = [](const std::string& group) { return "hosts/" + file_stem(group) + ".config"; };

  json manifest;
  manifest["kind"] = "resa-deployment";
  manifest["seed"] = plan.seed;
  manifest["devices"] = json::array();
  for (const auto& d : devices) manifest["devices"].push_back(device_json(d));
  manifest["groups"] = json::array();
  for (std::size_t gi = 0; gi < resa.groups.size(); ++gi) {
    const auto& g = resa.groups[gi];
    const int port = group_port(static_cast<int>(gi));
    manifest["groups"].push_back({{"id", g.base},
                                  {"faultModel", to_string(g.model)},
                                  {"f", g.f},
                                  {"n", g.n},
                                  {"port", port},
                                  {"hostConfig", host_path(g.base)}});
    std::string hosts;
    for (std::size_t i = 0; i < g.replica_units.size(); ++i) {
      hosts += std::to_string(i) + " " + g.replica_units[i] + " " + std::to_string(port) + "\n";
    }
    files[host_path(g.base)] = hosts;
  }

  manifest["units"] = json::array();
  for (const auto& u : resa.units) {
    json uj;
    uj["unit"] = u.id;
    uj["device"] = device_of(u.id);
    uj["components"] = json::array();
    for (const auto& cid : u.components) {
      const auto* c = resa.find_component(cid);
      if (!c) continue;
      uj["components"].push_back({{"id", c->id},
                                  {"type", c->type},
                                  {"params", c->params},
                                  {"in", ports(*c, core::Direction::kIn)},
                                  {"out", ports(*c, core::Direction::kOut)}});
    }
    uj["frontends"] = json::array();
    for (const auto& f : resa.frontends) {
      if (f.unit == u.id) uj["frontends"].push_back({{"id", f.id}, {"sender", f.sender}, {"group", f.group}});
    }
    uj["proxies"] = json::array();
    uj["replication"] = json::array();
    for (const auto& p : resa.proxies) {
      if (p.unit != u.id) continue;
      uj["proxies"].push_back(
          {{"id", p.id}, {"group", p.group}, {"index", p.replica_index}, {"replica", p.replica}});
      const auto* g = resa.group(p.group);
      if (!g) continue;
      int gi = static_cast<int>(g - resa.groups.data());
      uj["replication"].push_back({{"group", g->base},
                                   {"index", p.replica_index},
                                   {"n", g->n},
                                   {"f", g->f},
                                   {"faultModel", to_string(g->model)},
                                   {"port", group_port(gi)},
                                   {"hostConfig", host_path(g->base)}});
    }
    uj["consolidators"] = json::array();
    for (const auto& c : resa.consolidators) {
      if (c.unit != u.id) continue;
      uj["consolidators"].push_back(
          {{"id", c.id}, {"group", c.source_group}, {"receiver", c.receiver}, {"kind", c.kind}});
    }
    uj["connections"] = json::array();
    for (const auto& c : resa.connections) {
      auto su = loc.count(c.source.component) ? loc.at(c.source.component) : std::string();
      auto tu = loc.count(c.target.component) ? loc.at(c.target.component) : std::string();
      if (su != u.id && tu != u.id) continue;
      uj["connections"].push_back({{"from", endpoint(c.source)},
                                   {"to", endpoint(c.target)},
                                   {"technology", core::to_string(c.technology)},
                                   {"peerUnit", su == u.id ? tu : su}});
    }
    uj["keys"] = json::array();
    for (const auto& [holder, b] : plan.keys.bundles) {
      if (b.unit == u.id) uj["keys"].push_back(bundle_path(holder));
    }
    const auto config_path = "units/" + file_stem(u.id) + ".json";
    files[config_path] = dump(uj);
    manifest["units"].push_back({{"unit", u.id},
                                 {"service", u.id},
                                 {"device", device_of(u.id)},
                                 {"config", config_path},
                                 {"keys", uj["keys"]}});
  }
  files["manifest.json"] = dump(manifest);

  for (const auto& [holder, b] : plan.keys.bundles) {
    json bj;
    bj["holder"] = b.holder;
    bj["unit"] = b.unit;
    if (b.own) {
      bj["keyPair"] = {{"principal", b.own->principal},
                       {"secretKey", to_hex(b.own->secret_key)},
                       {"publicKey", to_hex(b.own->public_key)}};
    } else {
      bj["keyPair"] = nullptr;
    }
    json gk = json::object();
    for (const auto& [g, keys] : b.group_keys) {
      for (const auto& [principal, pk] : keys) gk[g][principal] = to_hex(pk);
    }
    bj["groupKeys"] = gk;
    json ck = json::object();
    for (const auto& [principal, pk] : b.client_keys) ck[principal] = to_hex(pk);
    bj["clientKeys"] = ck;
    files[bundle_path(holder)] = dump(bj);
  }
  return files;
}

void write_artifacts(const std::map<std::string, std::string>& files, const std::string& out_dir) {
  namespace fs = std::filesystem;
  for (const auto& [rel, contents] : files) {
    fs::path p = fs::path(out_dir) / rel;
    std::error_code ec;
    fs::create_directories(p.parent_path(), ec);
    if (ec) throw Error("cannot create directory " + p.parent_path().string() + ": " + ec.message());
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error("cannot write " + p.string());
    out << contents;
  }
}

}  // namespace resa::deploy
