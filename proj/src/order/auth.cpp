#include "resa/order/auth.hpp"

#include <sodium.h>

#include "resa/core/crypto.hpp"

namespace resa::order {

namespace {

class HmacSigner final : public Signer {
 public:
  HmacSigner(std::string principal, Bytes key) : principal_(std::move(principal)), key_(std::move(key)) {}
  const std::string& principal() const override { return principal_; }
  Tag sign(std::span<const std::uint8_t> message) const override {
    auto d = hmac_sha256(key_, message);
    return Tag(d.begin(), d.end());
  }

 private:
  std::string principal_;
  Bytes key_;
};

}  // namespace

HmacKeyring::HmacKeyring(Bytes master_secret) : master_(std::move(master_secret)) {}

Bytes HmacKeyring::key_for(const std::string& principal) const {
  auto d = hmac_sha256(master_, to_bytes(principal));
  return Bytes(d.begin(), d.end());
}

std::shared_ptr<const Signer> HmacKeyring::signer(const std::string& principal) const {
  return std::make_shared<HmacSigner>(principal, key_for(principal));
}

bool HmacKeyring::verify(const std::string& principal, std::span<const std::uint8_t> message,
                         std::span<const std::uint8_t> tag) const {
  auto expected = hmac_sha256(key_for(principal), message);
  return equal_constant_time(expected, tag);
}

KeyPair KeyPair::from_seed(std::string principal, std::span<const std::uint8_t> seed) {
  ensure_sodium();
  if (seed.size() != crypto_sign_SEEDBYTES) throw Error("Ed25519 seed must be 32 bytes");
  KeyPair kp;
  kp.principal = std::move(principal);
  kp.secret_key.resize(crypto_sign_SECRETKEYBYTES);
  kp.public_key.resize(crypto_sign_PUBLICKEYBYTES);
  crypto_sign_seed_keypair(kp.public_key.data(), kp.secret_key.data(), seed.data());
  return kp;
}

KeyPair KeyPair::random(std::string principal) {
  ensure_sodium();
  Bytes seed(crypto_sign_SEEDBYTES);
  randombytes_buf(seed.data(), seed.size());
  return from_seed(std::move(principal), seed);
}

Tag Ed25519Signer::sign(std::span<const std::uint8_t> message) const {
  Tag sig(crypto_sign_BYTES);
  crypto_sign_detached(sig.data(), nullptr, message.data(), message.size(), pair_.secret_key.data());
  return sig;
}

bool ed25519_verify(std::span<const std::uint8_t> public_key, std::span<const std::uint8_t> message,
                    std::span<const std::uint8_t> signature) {
  ensure_sodium();
  if (public_key.size() != crypto_sign_PUBLICKEYBYTES || signature.size() != crypto_sign_BYTES) {
    return false;
  }
  return crypto_sign_verify_detached(signature.data(), message.data(), message.size(),
                                     public_key.data()) == 0;
}

bool Ed25519Verifier::verify(const std::string& principal, std::span<const std::uint8_t> message,
                             std::span<const std::uint8_t> tag) const {
  auto it = keys_.find(principal);
  return it != keys_.end() && ed25519_verify(it->second, message, tag);
}

}  // namespace resa::order
