#pragma once

#include <map>
#include <memory>
#include <span>
#include <string>

#include "resa/core/bytes.hpp"

namespace resa::order {

using Tag = Bytes;

// Produces authentication tags on behalf of exactly one principal.
class Signer {
 public:
  virtual ~Signer() = default;
  virtual const std::string& principal() const = 0;
  virtual Tag sign(std::span<const std::uint8_t> message) const = 0;
};

// Checks tags of any principal it knows about.
class Verifier {
 public:
  virtual ~Verifier() = default;
  virtual bool verify(const std::string& principal, std::span<const std::uint8_t> message,
                      std::span<const std::uint8_t> tag) const = 0;
};

// Keyed-hash authentication (HMAC-SHA256). Keys are derived from a master
// secret and the principal name, so every party of a simulation can be
// given a consistent keyring.
class HmacKeyring : public Verifier {
 public:
  explicit HmacKeyring(Bytes master_secret);

  std::shared_ptr<const Signer> signer(const std::string& principal) const;
  bool verify(const std::string& principal, std::span<const std::uint8_t> message,
              std::span<const std::uint8_t> tag) const override;

 private:
  Bytes key_for(const std::string& principal) const;
  Bytes master_;
};

// Asymmetric key pair (Ed25519).
struct KeyPair {
  std::string principal;
  Bytes secret_key;  // 64 bytes (seed || public key), libsodium layout
  Bytes public_key;  // 32 bytes

  // Deterministic generation from a 32-byte seed.
  static KeyPair from_seed(std::string principal, std::span<const std::uint8_t> seed);
  static KeyPair random(std::string principal);
};

class Ed25519Signer : public Signer {
 public:
  explicit Ed25519Signer(KeyPair pair) : pair_(std::move(pair)) {}
  const std::string& principal() const override { return pair_.principal; }
  Tag sign(std::span<const std::uint8_t> message) const override;

 private:
  KeyPair pair_;
};

class Ed25519Verifier : public Verifier {
 public:
  void add(const std::string& principal, Bytes public_key) { keys_[principal] = std::move(public_key); }
  bool verify(const std::string& principal, std::span<const std::uint8_t> message,
              std::span<const std::uint8_t> tag) const override;

 private:
  std::map<std::string, Bytes> keys_;
};

bool ed25519_verify(std::span<const std::uint8_t> public_key, std::span<const std::uint8_t> message,
                    std::span<const std::uint8_t> signature);

}  // namespace resa::order
