#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "resa/arch/resa.hpp"
#include "resa/order/auth.hpp"

namespace resa::deploy {

struct DeviceDescriptor {
  std::string name;
  std::string type;
  std::string architecture;
  std::map<std::string, std::string> tags;
  int capacity = 0;  // max units

  bool operator==(const DeviceDescriptor&) const = default;
};

// {"devices": [{"name", "type", "architecture", "tags": {...}, "capacity"}]}
std::vector<DeviceDescriptor> parse_devices(std::string_view json_text);
std::string serialize_devices(const std::vector<DeviceDescriptor>& devices);
// Duplicate names, negative capacity.
void validate_devices(const std::vector<DeviceDescriptor>& devices);

// unit -> device
using Pins = std::map<std::string, std::string>;
using Assignment = std::map<std::string, std::string>;

// "unit=device"
std::pair<std::string, std::string> parse_pin(const std::string& text);

class PlacementError : public Error {
 public:
  enum class Kind { kInvalidPin, kPinConflict, kInfeasible };
  PlacementError(Kind kind, std::string group, int shortfall, const std::string& what)
      : Error(what), kind_(kind), group_(std::move(group)), shortfall_(shortfall) {}
  Kind kind() const { return kind_; }
  const std::string& group() const { return group_; }
  int shortfall() const { return shortfall_; }

 private:
  Kind kind_;
  std::string group_;
  int shortfall_;
};

// Units hosting replicas of each group (group id -> units, index order).
std::map<std::string, std::vector<std::string>> group_units(const arch::Resa& resa);

// Every unit on one device within capacity; the units of every replication
// group on pairwise distinct devices; pins honored. Complete: throws
// PlacementError(kInfeasible) only when no such assignment exists. Among
// candidate devices, the search prefers ones whose "location" tag is not yet
// used by the group, then the lexicographically smallest name.
Assignment plan_placement(const arch::Resa& resa, const std::vector<DeviceDescriptor>& devices,
                          const Pins& pins = {});

// Key material bundles. A bundle belongs to one replica or one frontend and
// is named after that block's principal.
struct KeyBundle {
  std::string holder;  // principal
  std::string unit;
  std::optional<order::KeyPair> own;  // replica key or frontend client key
  // group -> principal -> public key
  std::map<std::string, std::map<std::string, Bytes>> group_keys;
  // Public keys of frontends that invoke a group this bundle replicates.
  std::map<std::string, Bytes> client_keys;
};

struct KeyPlan {
  std::map<std::string, KeyBundle> bundles;  // by holder
  // principal of a key pair -> holder of the secret, recipients of the public key
  std::map<std::string, std::string> secret_holder;
  std::map<std::string, std::vector<std::string>> public_recipients;
};

// Deterministic in (resa, seed).
KeyPlan generate_keys(const arch::Resa& resa, std::uint64_t seed);
order::KeyPair derive_key_pair(const std::string& principal, std::uint64_t seed);

struct DeploymentPlan {
  Assignment assignment;
  KeyPlan keys;
  std::uint64_t seed = 0;
};

DeploymentPlan plan_deployment(const arch::Resa& resa, const std::vector<DeviceDescriptor>& devices,
                               const Pins& pins = {}, std::uint64_t seed = 0);

constexpr int kBasePort = 11000;
constexpr int kGroupPortStride = 100;
int group_port(int group_index);

// Relative path -> contents:
//   manifest.json
//   units/<unit>.json
//   hosts/<group>.config   lines "<replicaIndex> <unit> <port>"
//   keys/<holder>.json
std::map<std::string, std::string> emit_artifacts(const DeploymentPlan& plan, const arch::Resa& resa,
                                                  const std::vector<DeviceDescriptor>& devices);

void write_artifacts(const std::map<std::string, std::string>& files, const std::string& out_dir);

// File-name-safe form of a block id ("F[A->B]" -> "F_A-_B_").
std::string file_stem(const std::string& id);

}  // namespace resa::deploy
