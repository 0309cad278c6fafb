// resa: validate and transform architectures, plan deployments, run benchmarks.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "resa/bench.hpp"
#include "resa/deploy.hpp"
#include "resa/transform.hpp"

namespace {

using namespace resa;

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spill(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << text;
}

std::vector<std::uint64_t> parse_list(const std::string& text) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size() || v == 0) throw Error("'" + item + "' is not a positive integer");
    out.push_back(v);
  }
  if (out.empty()) throw Error("empty list");
  return out;
}

int cmd_validate(const std::string& lsa_path, const std::string& config_path) {
  auto lsa = arch::parse_lsa(slurp(lsa_path));
  auto diags = arch::validate_lsa(lsa);
  for (const auto& d : diags) std::cout << "error: " << d.code << ": " << d.message << "\n";
  if (!config_path.empty()) {
    auto cfg = arch::parse_resilience_config(slurp(config_path));
    for (const auto& w : cfg.warnings) std::cout << "warning: " << w << "\n";
    for (const auto& r : cfg.active()) {
      if (!lsa.find_component(r.component)) {
        std::cout << "error: unknown component: '" << r.component << "' is configured but not declared\n";
        diags.push_back({"unknown component", r.component});
      }
    }
  }
  if (diags.empty()) std::cout << "ok: " << lsa.components.size() << " components, " << lsa.connections.size()
                               << " connections, " << lsa.units.size() << " units\n";
  return diags.empty() ? 0 : 1;
}

int cmd_transform(const std::string& lsa_path, const std::string& config_path,
                  const std::vector<std::string>& places, const std::string& out) {
  auto lsa = arch::parse_lsa(slurp(lsa_path));
  auto cfg = arch::parse_resilience_config(slurp(config_path));
  for (const auto& w : cfg.warnings) std::cerr << "warning: " << w << "\n";
  transform::PlacementHints hints;
  for (const auto& p : places) {
    auto eq = p.find('=');
    if (eq == std::string::npos) throw Error("--place expects group=unit,unit,...");
    std::stringstream ss(p.substr(eq + 1));
    std::string unit;
    auto& units = hints.group_units[p.substr(0, eq)];
    while (std::getline(ss, unit, ',')) units.push_back(unit);
  }
  auto resa = transform::setup_replication(lsa, cfg, hints);
  spill(out, arch::serialize_resa(resa));
  std::cerr << "groups " << resa.groups.size() << ", frontends " << resa.frontends.size() << ", proxies "
            << resa.proxies.size() << ", consolidators " << resa.consolidators.size() << ", connections "
            << resa.connections.size() << ", units " << resa.units.size() << "\n";
  return 0;
}

int cmd_plan(const std::string& resa_path, const std::string& devices_path,
             const std::vector<std::string>& pin_args, std::uint64_t seed, const std::string& out) {
  auto resa = arch::parse_resa(slurp(resa_path));
  auto devices = deploy::parse_devices(slurp(devices_path));
  deploy::Pins pins;
  for (const auto& p : pin_args) {
    auto [unit, device] = deploy::parse_pin(p);
    if (!pins.emplace(unit, device).second) throw Error("unit '" + unit + "' is pinned twice");
  }
  try {
    auto plan = deploy::plan_deployment(resa, devices, pins, seed);
    auto files = deploy::emit_artifacts(plan, resa, devices);
    deploy::write_artifacts(files, out);
    for (const auto& [unit, device] : plan.assignment) std::cout << unit << " -> " << device << "\n";
    std::cout << files.size() << " files written to " << out << "\n";
  } catch (const deploy::PlacementError& e) {
    std::cerr << "resa plan: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

struct BenchArgs {
  std::string experiment;
  bool sim = false;
  bool sockets = false;
  std::uint64_t seed = 1;
  std::string backlog;
  std::string clients;
  std::vector<std::uint64_t> payload;
  double crash_at = 18;
  std::uint64_t events = 10'000;
  std::uint64_t requests = 200;
  std::uint64_t work = 0;
  double rate = 50;
  double duration = 40;
  bool crash_follower = false;
  std::string out;
};

int cmd_bench(const BenchArgs& a) {
  const auto network = a.sockets ? bench::Network::kSockets : bench::Network::kSim;
  for (auto p : a.payload) {
    if (p != 0 && p != 1024) throw Error("--payload must be 0 or 1024");
  }
  if (a.experiment == "overhead") {
    bench::OverheadOptions o;
    o.network = network;
    o.seed = a.seed;
    o.events = a.events;
    o.work = a.work;
    if (!a.backlog.empty()) o.backlogs = parse_list(a.backlog);
    auto base = bench::run_overhead(o, false);
    auto repl = bench::run_overhead(o, true);
    bench::write_files(bench::overhead_report(base, repl), a.out);
    bool lost = false;
    std::printf("%-11s %8s %10s %12s %8s\n", "variant", "backlog", "ops/s", "latency_ms", "X*R/N");
    for (const auto* curve : {&base, &repl}) {
      for (const auto& p : *curve) {
        std::printf("%-11s %8llu %10.1f %12.3f %8.3f\n", curve == &base ? "baseline" : "replicated",
                    static_cast<unsigned long long>(p.backlog), p.ops_per_s, p.latency_ms, p.littles_ratio);
        if (!p.missing.empty() || p.delivered != o.events) {
          std::fprintf(stderr, "event loss at backlog %llu: %zu ids missing\n",
                       static_cast<unsigned long long>(p.backlog), p.missing.size());
          lost = true;
        }
      }
    }
    return lost ? 1 : 0;
  }
  if (a.experiment == "ordering") {
    bench::OrderingOptions o;
    o.network = network;
    o.seed = a.seed;
    o.requests_per_client = a.requests;
    if (!a.clients.empty()) {
      o.clients.clear();
      for (auto c : parse_list(a.clients)) o.clients.push_back(static_cast<int>(c));
    }
    std::vector<bench::OrderingPoint> points;
    for (auto payload : a.payload.empty() ? std::vector<std::uint64_t>{0, 1024} : a.payload) {
      o.payload = payload;
      for (const auto& p : bench::run_ordering(o)) points.push_back(p);
    }
    bench::write_files(bench::ordering_report(points), a.out);
    std::printf("%8s %8s %10s %12s\n", "clients", "payload", "ops/s", "latency_ms");
    for (const auto& p : points) {
      std::printf("%8d %8llu %10.1f %12.3f\n", p.clients, static_cast<unsigned long long>(p.payload),
                  p.ops_per_s, p.latency_ms);
    }
    return 0;
  }
  if (a.experiment == "leader-failure") {
    bench::LeaderFailureOptions o;
    o.network = network;
    o.seed = a.seed;
    o.crash_at_s = a.crash_at;
    o.rate = a.rate;
    o.duration_s = a.duration;
    o.crash_leader = !a.crash_follower;
    if (network == bench::Network::kSockets) o.sim_tick_us = 10'000;
    auto r = bench::run_leader_failure(o);
    auto files = bench::leader_failure_report(r, o);
    bench::write_files(files, a.out);
    std::cout << files.at("recovery.txt");
    if (!r.missing.empty()) {
      std::cerr << "event loss: " << r.missing.size() << " ids missing\n";
      return 1;
    }
    return 0;
  }
  throw Error("unknown experiment '" + a.experiment + "' (ordering, overhead, leader-failure)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Replication-enriched architectures: transform, plan, benchmark"};
  app.require_subcommand(1);

  std::string lsa_path, config_path, out, resa_path, devices_path;
  std::vector<std::string> places, pins;
  std::uint64_t seed = 0;

  auto* validate = app.add_subcommand("validate", "Check an architecture and an optional resilience config");
  validate->add_option("--lsa", lsa_path, "Architecture file")->required();
  validate->add_option("--config", config_path, "Resilience configuration file");

  auto* transform = app.add_subcommand("transform", "Insert replication building blocks");
  transform->add_option("--lsa", lsa_path, "Architecture file")->required();
  transform->add_option("--config", config_path, "Resilience configuration file")->required();
  transform->add_option("--place", places, "Candidate units for a group: group=unit,unit,...");
  transform->add_option("--out", out, "Output file (default stdout)");

  auto* plan = app.add_subcommand("plan", "Place units on devices and emit deployment artifacts");
  plan->add_option("--resa", resa_path, "Transformed architecture file")->required();
  plan->add_option("--devices", devices_path, "Device inventory file")->required();
  plan->add_option("--pin", pins, "Fix a unit to a device: unit=device");
  plan->add_option("--seed", seed, "Key generation seed");
  plan->add_option("--out", out, "Output directory")->required();

  BenchArgs b;
  auto* bench_cmd = app.add_subcommand("bench", "Run a benchmark experiment");
  bench_cmd->add_option("experiment", b.experiment, "ordering | overhead | leader-failure")->required();
  auto* sim_flag = bench_cmd->add_flag("--sim", b.sim, "Simulated network (default)");
  bench_cmd->add_flag("--sockets", b.sockets, "Loopback TCP, one reactor thread per unit")->excludes(sim_flag);
  bench_cmd->add_option("--seed", b.seed, "Simulator seed");
  bench_cmd->add_option("--backlog", b.backlog, "Backlog sweep, comma separated");
  bench_cmd->add_option("--clients", b.clients, "Client counts, comma separated");
  bench_cmd->add_option("--payload", b.payload, "Request payload bytes (0 or 1024)");
  bench_cmd->add_option("--crash-at", b.crash_at, "Leader crash time in seconds");
  bench_cmd->add_option("--events", b.events, "Events per overhead run");
  bench_cmd->add_option("--requests", b.requests, "Requests per ordering client");
  bench_cmd->add_option("--work", b.work, "Processor hashing rounds per event");
  bench_cmd->add_option("--rate", b.rate, "Offered load for leader-failure, events/s");
  bench_cmd->add_option("--duration", b.duration, "Generation time for leader-failure, seconds");
  bench_cmd->add_flag("--crash-follower", b.crash_follower, "Crash replica 1 instead of the leader");
  bench_cmd->add_option("--out", b.out, "Output directory")->required();

  CLI11_PARSE(app, argc, argv);
  try {
    if (*validate) return cmd_validate(lsa_path, config_path);
    if (*transform) return cmd_transform(lsa_path, config_path, places, out);
    if (*plan) return cmd_plan(resa_path, devices_path, pins, seed, out);
    if (*bench_cmd) return cmd_bench(b);
  } catch (const std::exception& e) {
    std::cerr << "resa: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
