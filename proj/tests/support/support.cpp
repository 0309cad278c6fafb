#include "support.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <tuple>

#include "json.hpp"
#include "resa/transform.hpp"

namespace resa::testsupport {

using core::Connection;
using core::Direction;
using core::Technology;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

core::Port in(const std::string& name) { return {name, Direction::kIn}; }
core::Port out(const std::string& name) { return {name, Direction::kOut}; }

Connection wire(const std::string& from, const std::string& to, Technology t) {
  auto split = [](const std::string& s) {
    auto dot = s.find('.');
    return core::Endpoint{s.substr(0, dot), s.substr(dot + 1)};
  };
  return {split(from), split(to), t};
}

arch::Lsa pipeline_lsa(std::uint64_t backlog, std::uint64_t total, std::uint64_t payload,
                       std::uint64_t rate) {
  arch::Lsa lsa;
  arch::ComponentDecl gen{"gen", "loadgenerator", {in("start"), in("feedback"), in("clock"), out("out")}, {}};
  gen.params = {{"backlog", std::to_string(backlog)},
                {"total", std::to_string(total)},
                {"payload", std::to_string(payload)},
                {"rate", std::to_string(rate)}};
  lsa.components.push_back(gen);
  lsa.components.push_back({"proc", "processor", {in("in"), out("out")}, {}});
  lsa.components.push_back({"rep", "reporter", {in("in"), out("feedback")}, {}});
  lsa.connections = {wire("gen.out", "proc.in", Technology::kSocket),
                     wire("proc.out", "rep.in", Technology::kSocket),
                     wire("rep.feedback", "gen.feedback", Technology::kSocket)};
  lsa.units = {{"u-gen", {"gen"}}, {"u-proc", {"proc"}}, {"u-rep", {"rep"}}};
  return lsa;
}

arch::ResilienceConfig replicate(const std::string& component, int f, FaultModel model) {
  arch::ResilienceConfig c;
  arch::ReplicationRequest r;
  r.component = component;
  r.enabled = true;
  r.f = f;
  r.model = model;
  r.consolidator = model == FaultModel::kBFT ? "BFTConsolidator" : "CFTConsolidator";
  c.entries.push_back(r);
  return c;
}

RandomLsa random_lsa(std::mt19937_64& rng, int max_components) {
  auto pick = [&](int lo, int hi) { return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1)); };
  RandomLsa r;
  const int total = pick(3, std::max(3, max_components));
  const int sources = pick(1, std::min(2, total - 2));
  const int sinks = pick(1, std::min(2, total - sources - 1));
  const int middle = total - sources - sinks;

  std::vector<std::string> ids;
  for (int i = 0; i < sources; ++i) {
    auto id = "S" + std::to_string(i);
    r.lsa.components.push_back({id, "forward", {in("in")}, {}});
    r.sources.push_back(id);
    ids.push_back(id);
  }
  for (int i = 0; i < middle; ++i) {
    auto id = "T" + std::to_string(i);
    arch::ComponentDecl d{id, "transform", {}, {{"keep_mod", pick(0, 2) == 0 ? "2" : "1"}}};
    ids.push_back(id);
    r.lsa.components.push_back(d);
  }
  for (int i = 0; i < sinks; ++i) {
    auto id = "K" + std::to_string(i);
    r.lsa.components.push_back({id, "counter", {}, {}});
    r.sinks.push_back(id);
    ids.push_back(id);
  }
  // In-ports for everything but sources, out-ports for everything but sinks.
  for (std::size_t i = 0; i < r.lsa.components.size(); ++i) {
    auto& c = r.lsa.components[i];
    bool is_source = static_cast<int>(i) < sources;
    bool is_sink = static_cast<int>(i) >= sources + middle;
    if (!is_source) {
      int ins = pick(1, 2);
      for (int k = 0; k < ins; ++k) c.ports.push_back(in("i" + std::to_string(k)));
    }
    if (!is_sink) {
      int outs = pick(1, 2);
      for (int k = 0; k < outs; ++k) c.ports.push_back(out("o" + std::to_string(k)));
    }
  }
  std::set<std::tuple<std::string, std::string, std::string, std::string>> seen;
  for (std::size_t i = 0; i < r.lsa.components.size(); ++i) {
    const auto& c = r.lsa.components[i];
    for (const auto& p : c.ports) {
      if (p.direction != Direction::kOut) continue;
      int fanout = pick(1, 2);
      for (int k = 0; k < fanout; ++k) {
        auto j = static_cast<std::size_t>(pick(static_cast<int>(std::max<std::size_t>(i + 1, sources)),
                                               total - 1));
        const auto& t = r.lsa.components[j];
        std::vector<std::string> ins;
        for (const auto& q : t.ports) {
          if (q.direction == Direction::kIn) ins.push_back(q.name);
        }
        const auto& q = ins[rng() % ins.size()];
        if (!seen.emplace(c.id, p.name, t.id, q).second) continue;
        r.lsa.connections.push_back({{c.id, p.name}, {t.id, q}, Technology::kLocal});
      }
    }
  }
  // Units: 1..3, every component on exactly one; technology follows units.
  const int units = pick(1, 3);
  for (int u = 0; u < units; ++u) r.lsa.units.push_back({"u" + std::to_string(u), {}});
  for (const auto& id : ids) r.lsa.units[rng() % units].components.push_back(id);
  std::erase_if(r.lsa.units, [](const arch::UnitDecl& u) { return u.components.empty(); });
  for (auto& c : r.lsa.connections) {
    c.technology = r.lsa.unit_of(c.source.component) == r.lsa.unit_of(c.target.component)
                       ? Technology::kLocal
                       : Technology::kSocket;
  }
  return r;
}

arch::ResilienceConfig random_config(std::mt19937_64& rng, const RandomLsa& r, int max_groups,
                                     const std::vector<int>& f_choices) {
  std::vector<std::string> candidates;
  for (const auto& c : r.lsa.components) {
    if (std::find(r.sources.begin(), r.sources.end(), c.id) == r.sources.end()) {
      candidates.push_back(c.id);
    }
  }
  std::shuffle(candidates.begin(), candidates.end(), rng);
  const int groups = static_cast<int>(rng() % static_cast<std::uint64_t>(max_groups + 1));
  arch::ResilienceConfig cfg;
  for (int i = 0; i < groups && i < static_cast<int>(candidates.size()); ++i) {
    auto model = rng() % 2 == 0 ? FaultModel::kBFT : FaultModel::kCFT;
    int f = f_choices[rng() % f_choices.size()];
    auto one = replicate(candidates[static_cast<std::size_t>(i)], f, model);
    cfg.entries.push_back(one.entries.front());
  }
  return cfg;
}

BlockCounts count_oracle(const arch::Lsa& lsa, const arch::ResilienceConfig& config) {
  std::map<std::string, int> n;
  for (const auto& e : config.entries) {
    if (!e.enabled) continue;
    int size = e.n ? *e.n : (e.model == FaultModel::kBFT ? 3 * e.f + 1 : 2 * e.f + 1);
    n[e.component] = size;
  }
  auto replicated = [&](const std::string& c) { return n.count(c) > 0; };

  using Tuple = std::vector<std::string>;
  std::set<Tuple> frontends, consolidators, connections;
  for (const auto& c : lsa.connections) {
    const auto& s = c.source.component;
    const auto& p = c.source.port;
    const auto& t = c.target.component;
    const auto& q = c.target.port;
    bool rs = replicated(s), rt = replicated(t);
    if (!rs && !rt) {
      connections.insert({"plain", s, p, t, q});
    } else if (!rs && rt) {
      frontends.insert({s, t});
      connections.insert({"to-frontend", s, p, t, q});
      for (int k = 0; k < n[t]; ++k) {
        connections.insert({"frontend-proxy", s, t, std::to_string(k)});
        connections.insert({"proxy-replica", t, std::to_string(k), q});
      }
    } else if (rs && !rt) {
      consolidators.insert({s, t});
      for (int i = 0; i < n[s]; ++i) connections.insert({"replica-cons", s, std::to_string(i), t, p});
      connections.insert({"cons-receiver", s, t, p, q});
    } else {
      for (int i = 0; i < n[s]; ++i) {
        frontends.insert({s + "#" + std::to_string(i), t});
        connections.insert({"to-frontend", s + "#" + std::to_string(i), p, t, q});
        for (int j = 0; j < n[t]; ++j) {
          connections.insert({"frontend-proxy", s + "#" + std::to_string(i), t, std::to_string(j)});
        }
      }
      for (int j = 0; j < n[t]; ++j) {
        consolidators.insert({s, t + "#" + std::to_string(j)});
        connections.insert({"proxy-cons", s, p, t, std::to_string(j)});
        connections.insert({"cons-replica", s, p, t, std::to_string(j), q});
      }
    }
  }

  BlockCounts b;
  b.frontends = frontends.size();
  b.consolidators = consolidators.size();
  b.connections = connections.size();
  for (const auto& c : lsa.components) b.components += replicated(c.id) ? n[c.id] : 1;
  for (const auto& [_, size] : n) b.proxies += static_cast<std::size_t>(size);
  for (const auto& u : lsa.units) {
    bool keeps = u.components.empty();
    for (const auto& c : u.components) keeps = keeps || !replicated(c);
    if (keeps) ++b.units;
  }
  for (const auto& [_, size] : n) b.units += static_cast<std::size_t>(size);
  return b;
}

BlockCounts count_actual(const arch::Resa& resa) {
  BlockCounts b;
  b.components = resa.components.size();
  b.frontends = resa.frontends.size();
  b.proxies = resa.proxies.size();
  b.consolidators = resa.consolidators.size();
  b.connections = resa.connections.size();
  b.units = resa.units.size();
  return b;
}

arch::Lsa chain_lsa() {
  arch::Lsa lsa;
  lsa.components.push_back({"A", "forward", {in("in"), out("out")}, {}});
  lsa.components.push_back({"B", "forward", {in("in"), out("out")}, {}});
  lsa.components.push_back({"C", "counter", {in("in")}, {}});
  lsa.connections = {wire("A.out", "B.in", Technology::kSocket), wire("B.out", "C.in", Technology::kSocket)};
  lsa.units = {{"u-a", {"A"}}, {"u-b", {"B"}}, {"u-c", {"C"}}};
  return lsa;
}

arch::Resa placement_resa(int shape) {
  arch::Lsa lsa = chain_lsa();
  if (shape >= 4) {
    lsa.components[2] = {"C", "forward", {in("in"), out("out")}, {}};
    lsa.components.push_back({"D", "counter", {in("in")}, {}});
    lsa.connections.push_back(wire("C.out", "D.in", Technology::kSocket));
    lsa.units.push_back({"u-d", {"D"}});
  }
  arch::ResilienceConfig cfg;
  transform::PlacementHints hints;
  auto add = [&](const std::string& c, int f, FaultModel m) {
    cfg.entries.push_back(replicate(c, f, m).entries.front());
  };
  switch (shape) {
    case 0: break;
    case 1: add("B", 0, FaultModel::kBFT); break;
    case 2: add("B", 1, FaultModel::kCFT); break;
    case 3: add("B", 1, FaultModel::kBFT); break;
    case 4:
      add("B", 1, FaultModel::kBFT);
      add("C", 1, FaultModel::kCFT);
      break;
    case 5:
      add("B", 1, FaultModel::kBFT);
      add("C", 1, FaultModel::kCFT);
      hints.group_units["B"] = {"h0", "h1", "h2", "h3"};
      hints.group_units["C"] = {"h1", "h2", "h3"};
      break;
    default:
      add("B", 1, FaultModel::kCFT);
      add("C", 1, FaultModel::kCFT);
      hints.group_units["B"] = {"h0", "h1", "h2"};
      hints.group_units["C"] = {"h2", "h3", "h4"};
      break;
  }
  return transform::setup_replication(lsa, cfg, hints);
}

std::vector<deploy::DeviceDescriptor> random_devices(std::mt19937_64& rng, int max_devices) {
  static const char* kLocations[] = {"", "north", "south"};
  std::vector<deploy::DeviceDescriptor> out;
  const int n = static_cast<int>(rng() % static_cast<std::uint64_t>(max_devices + 1));
  for (int i = 0; i < n; ++i) {
    deploy::DeviceDescriptor d;
    d.name = "pi" + std::to_string(i);
    d.type = "raspberrypi4b";
    d.architecture = "arm64";
    const auto roll = rng() % 8;
    d.capacity = roll == 0 ? 0 : roll < 5 ? 1 : roll < 7 ? 2 : 3;
    std::string loc = kLocations[rng() % 3];
    if (!loc.empty()) d.tags["location"] = loc;
    out.push_back(d);
  }
  return out;
}

deploy::Pins random_pins(std::mt19937_64& rng, const arch::Resa& resa,
                         const std::vector<deploy::DeviceDescriptor>& devices) {
  deploy::Pins pins;
  if (devices.empty() || resa.units.empty() || rng() % 3 != 0) return pins;
  const auto count = 1 + rng() % 2;
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto& u = resa.units[rng() % resa.units.size()].id;
    pins[u] = devices[rng() % devices.size()].name;
  }
  return pins;
}

std::optional<deploy::Assignment> brute_force_placement(const arch::Resa& resa,
                                                        const std::vector<deploy::DeviceDescriptor>& devices,
                                                        const deploy::Pins& pins) {
  std::vector<std::string> units;
  for (const auto& u : resa.units) units.push_back(u.id);
  std::vector<int> load(devices.size(), 0);
  std::map<std::string, std::size_t> at;
  std::optional<deploy::Assignment> found;

  auto ok = [&](const std::string& unit, std::size_t d) {
    if (load[d] >= devices[d].capacity) return false;
    auto pin = pins.find(unit);
    if (pin != pins.end() && pin->second != devices[d].name) return false;
    for (const auto& g : resa.groups) {
      if (std::find(g.replica_units.begin(), g.replica_units.end(), unit) == g.replica_units.end()) continue;
      for (const auto& other : g.replica_units) {
        if (other == unit) continue;
        auto it = at.find(other);
        if (it != at.end() && it->second == d) return false;
      }
    }
    return true;
  };
  std::function<void(std::size_t)> go = [&](std::size_t i) {
    if (found) return;
    if (i == units.size()) {
      deploy::Assignment a;
      for (const auto& [u, d] : at) a[u] = devices[d].name;
      found = a;
      return;
    }
    for (std::size_t d = 0; d < devices.size() && !found; ++d) {
      if (!ok(units[i], d)) continue;
      at[units[i]] = d;
      ++load[d];
      go(i + 1);
      --load[d];
      at.erase(units[i]);
    }
  };
  int capacity = 0;
  for (const auto& d : devices) capacity += d.capacity;
  if (capacity < static_cast<int>(units.size())) return std::nullopt;
  // A group with two replicas on one unit can never be separated.
  for (const auto& g : resa.groups) {
    std::set<std::string> distinct(g.replica_units.begin(), g.replica_units.end());
    if (distinct.size() != g.replica_units.size()) return std::nullopt;
  }
  go(0);
  return found;
}

std::string check_assignment(const arch::Resa& resa,
                             const std::vector<deploy::DeviceDescriptor>& devices,
                             const deploy::Pins& pins, const deploy::Assignment& a) {
  std::map<std::string, int> cap, load;
  for (const auto& d : devices) cap[d.name] = d.capacity;
  for (const auto& u : resa.units) {
    auto it = a.find(u.id);
    if (it == a.end()) return "unit " + u.id + " unassigned";
    if (!cap.count(it->second)) return "unit " + u.id + " on unknown device " + it->second;
    if (++load[it->second] > cap[it->second]) return "device " + it->second + " over capacity";
  }
  if (a.size() != resa.units.size()) return "assignment lists unknown units";
  for (const auto& [u, d] : pins) {
    if (a.at(u) != d) return "pin " + u + "=" + d + " not honored";
  }
  for (const auto& g : resa.groups) {
    std::set<std::string> devs;
    for (const auto& u : g.replica_units) devs.insert(a.at(u));
    if (static_cast<int>(devs.size()) != g.n) return "group " + g.base + " spans fewer than n devices";
  }
  return {};
}

std::string check_key_confinement(const arch::Resa& resa,
                                  const std::map<std::string, std::string>& files) {
  using nlohmann::json;
  std::map<std::string, json> bundles;  // holder -> bundle
  for (const auto& [path, text] : files) {
    if (path.rfind("keys/", 0) != 0) continue;
    auto j = json::parse(text);
    bundles[j.at("holder").get<std::string>()] = j;
  }
  std::map<std::string, std::string> public_of;  // principal -> public key hex
  for (const auto& [holder, b] : bundles) {
    if (b.at("keyPair").is_null()) continue;
    const auto principal = b["keyPair"]["principal"].get<std::string>();
    if (principal != holder) return "bundle " + holder + " holds the key pair of " + principal;
    const auto secret = b["keyPair"]["secretKey"].get<std::string>();
    public_of[principal] = b["keyPair"]["publicKey"].get<std::string>();
    int holders = 0;
    for (const auto& [path, text] : files) {
      if (text.find(secret) != std::string::npos) ++holders;
    }
    if (holders != 1) return "secret key of " + principal + " appears in " + std::to_string(holders) + " files";
  }
  for (const auto& g : resa.groups) {
    std::set<std::string> expected(g.replica_ids.begin(), g.replica_ids.end());
    for (const auto& f : resa.frontends) {
      if (f.group == g.base) expected.insert(f.id);
    }
    std::set<std::string> actual;
    for (const auto& [holder, b] : bundles) {
      if (!b.at("groupKeys").contains(g.base)) continue;
      actual.insert(holder);
      const auto& keys = b["groupKeys"][g.base];
      if (static_cast<int>(keys.size()) != g.n) return "bundle " + holder + " has a partial key set of " + g.base;
      for (const auto& r : g.replica_ids) {
        if (!keys.contains(r) || keys[r].get<std::string>() != public_of[r]) {
          return "bundle " + holder + " lacks the public key of " + r;
        }
      }
    }
    if (actual != expected) return "public keys of " + g.base + " reach the wrong bundles";
  }
  return {};
}

std::vector<std::string> compare_golden(const std::map<std::string, std::string>& files,
                                        const std::string& dir) {
  namespace fs = std::filesystem;
  std::vector<std::string> bad;
  const char* update = std::getenv("RESA_UPDATE_GOLDEN");
  if (update && std::string(update) == "1") {
    fs::remove_all(dir);
    deploy::write_artifacts(files, dir);
    return bad;
  }
  std::set<std::string> on_disk;
  if (fs::exists(dir)) {
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
      if (e.is_regular_file()) on_disk.insert(fs::relative(e.path(), dir).generic_string());
    }
  }
  for (const auto& [path, text] : files) {
    if (!on_disk.erase(path)) {
      bad.push_back(path + " (missing golden)");
    } else if (read_file((fs::path(dir) / path).string()) != text) {
      bad.push_back(path);
    }
  }
  for (const auto& extra : on_disk) bad.push_back(extra + " (not emitted)");
  return bad;
}

std::vector<Input> random_inputs(std::mt19937_64& rng, const RandomLsa& r, int count) {
  std::vector<Input> out;
  for (int i = 0; i < count; ++i) {
    Input in;
    in.tick = static_cast<std::int64_t>(rng() % 10);
    in.component = r.sources[rng() % r.sources.size()];
    in.port = "in";
    in.payload = to_bytes("p" + std::to_string(i) + "-" + std::to_string(rng() % 1000));
    out.push_back(std::move(in));
  }
  return out;
}

Deliveries run_and_collect(const arch::Resa& resa, const std::vector<std::string>& sinks,
                           const std::vector<Input>& inputs, std::uint64_t seed, std::int64_t ticks,
                           harness::FaultScript script) {
  harness::SimConfig cfg;
  cfg.seed = seed;
  cfg.delta_bound = 2;
  runtime::SimSystem sys(resa, cfg, std::move(script));
  sys.sim().set_tracing(false);
  std::set<std::string> watched;
  for (const auto& k : sinks) {
    if (const auto* g = resa.group(k)) {
      for (const auto& id : g->replica_ids) watched.insert(id);
    } else {
      watched.insert(k);
    }
  }
  Deliveries got;
  for (const auto& id : watched) got[id];
  for (const auto& node : sys.nodes()) {
    node->set_step_observer([&got, &watched](const core::Event& e, std::int64_t) {
      if (watched.count(e.target)) got[e.target].insert(to_hex(e.payload));
    });
  }
  for (const auto& in : inputs) {
    auto* node = &sys.node_of(in.component);
    sys.sim().at(in.tick, [node, in] { node->inject(in.component, in.port, in.payload); });
  }
  sys.run_until(ticks);
  return got;
}

}  // namespace resa::testsupport
