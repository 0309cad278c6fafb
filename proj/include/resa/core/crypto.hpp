#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>

#include "resa/core/bytes.hpp"

namespace resa {

using Digest = std::array<std::uint8_t, 32>;

void ensure_sodium();

// Thin wrappers over libsodium; sodium_init() is called lazily.
Digest sha256(std::span<const std::uint8_t> data);
Digest hmac_sha256(std::span<const std::uint8_t> key, std::span<const std::uint8_t> data);
bool equal_constant_time(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b);

inline std::string digest_hex(const Digest& d) { return to_hex(d); }

}  // namespace resa
