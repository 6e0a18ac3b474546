#pragma once

// Thin wrappers over OpenSSL for the fixed primitive suite:
// SHA-256, HKDF-SHA-256, AES-256-GCM (12-byte nonce) and Ed25519.

#include <array>
#include <cstdint>
#include <memory>
#include <mutex>
#include <random>
#include <stdexcept>
#include <string_view>

#include "medledger/bytes.hpp"

namespace medledger {

Digest sha256(ByteView data);
Digest sha256(std::string_view data);

/// HKDF-SHA-256 with an empty salt. `label` is appended to "medledger/v1/" to
/// form the info string.
Bytes hkdf_sha256(ByteView ikm, std::string_view label, std::size_t length);

inline constexpr std::size_t kAeadKeySize = 32;
inline constexpr std::size_t kAeadNonceSize = 12;
inline constexpr std::size_t kAeadTagSize = 16;

/// Returns ciphertext || 16-byte tag.
Bytes aead_seal(ByteView key, ByteView nonce, ByteView plaintext, ByteView aad);

/// Throws AeadError when the tag does not verify.
Bytes aead_open(ByteView key, ByteView nonce, ByteView sealed, ByteView aad);

struct AeadError : std::runtime_error {
  AeadError() : std::runtime_error("authentication failed") {}
};

// --- Ed25519 ---------------------------------------------------------------

struct SigPublicKey {
  std::array<std::uint8_t, 32> bytes{};
  auto operator<=>(const SigPublicKey&) const = default;
};

struct SigSecretKey {
  std::array<std::uint8_t, 32> seed{};
};

struct Signature {
  std::array<std::uint8_t, 64> bytes{};
  auto operator<=>(const Signature&) const = default;
};

struct SigningKey {
  SigSecretKey secret;
  SigPublicKey public_key;

  static SigningKey from_seed(const SigSecretKey& seed);
};

Signature sign(const SigSecretKey& key, ByteView message);
bool verify(const SigPublicKey& key, ByteView message, const Signature& sig);

// --- Entropy ---------------------------------------------------------------

class RandomSource {
 public:
  virtual ~RandomSource() = default;
  virtual void fill(std::span<std::uint8_t> out) = 0;

  Bytes bytes(std::size_t n) {
    Bytes b(n);
    fill(b);
    return b;
  }
};

struct EntropyError : std::runtime_error {
  EntropyError() : std::runtime_error("entropy source failure") {}
};

/// OpenSSL DRBG. Safe to share between threads.
class SystemRandom final : public RandomSource {
 public:
  void fill(std::span<std::uint8_t> out) override;
};

/// Deterministic stream for tests and simulations. Not for key material in
/// deployments.
class SeededRandom final : public RandomSource {
 public:
  explicit SeededRandom(std::uint64_t seed) : engine_(seed) {}
  void fill(std::span<std::uint8_t> out) override;

 private:
  std::mutex mu_;
  std::mt19937_64 engine_;
};

SigningKey generate_signing_key(RandomSource& rng);

}  // namespace medledger
