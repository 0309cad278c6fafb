#pragma once

#include <string>

#include "resa/core/bytes.hpp"

namespace resa {

enum class FaultModel { kBFT, kCFT };

inline std::string to_string(FaultModel m) { return m == FaultModel::kBFT ? "BFT" : "CFT"; }

inline FaultModel fault_model_from_string(const std::string& s) {
  if (s == "BFT") return FaultModel::kBFT;
  if (s == "CFT") return FaultModel::kCFT;
  throw Error("unknown fault model '" + s + "'");
}

}  // namespace resa
