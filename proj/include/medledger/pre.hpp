#pragma once

// Unidirectional single-hop proxy re-encryption over a prime-order subgroup
// of Z_p^*, plus the KEM/DEM sealing used for record payloads.
//
// Second-level ciphertext under key a:   (m * g^k, g^(a*k))
// Re-key from a to b with blinding r:    rk1 = r * a^-1 mod q, r wrapped to pk_b
// First-level ciphertext after re-keying: (m * g^k, g^(k*r))
//
// The proxy only ever needs (c1, c2, rk1). Anyone holding both r and rk1 can
// recover a = r * rk1^-1, so proxy and delegatee must not collude.

#include <compare>
#include <cstdint>
#include <gmpxx.h>
#include <memory>
#include <stdexcept>
#include <string>

#include "medledger/bytes.hpp"
#include "medledger/codec.hpp"
#include "medledger/primitives.hpp"

namespace medledger::pre {

namespace detail {
class ModExp;
}

enum class GroupId : std::uint8_t { Toy = 1, Prod = 2 };

std::string to_string(GroupId id);
GroupId group_id_from_string(std::string_view name);

enum class Errc {
  InvalidElement,
  InvalidScalar,
  WrongLevel,
  NotDelegatee,
  CorruptRecord,
  InvalidPayload,
  Malformed,
};

std::string_view to_string(Errc code);

class Error : public std::runtime_error {
 public:
  explicit Error(Errc code) : std::runtime_error(std::string(to_string(code))), code_(code) {}
  Errc code() const { return code_; }

 private:
  Errc code_;
};

struct Scalar {
  mpz_class value;
  bool operator==(const Scalar& o) const { return value == o.value; }
};

struct Element {
  mpz_class value;
  bool operator==(const Element& o) const { return value == o.value; }
};

/// p prime, q prime with q | p-1, g of order q.
class GroupParams {
 public:
  GroupParams(GroupId id, mpz_class p, mpz_class q, mpz_class g);

  static const GroupParams& toy();
  static const GroupParams& prod();
  static const GroupParams& get(GroupId id);

  GroupId id() const { return id_; }
  const mpz_class& p() const { return p_; }
  const mpz_class& q() const { return q_; }
  Element generator() const { return Element{g_}; }

  bool contains(const Element& x) const;
  bool valid_scalar(const Scalar& s) const { return s.value >= 1 && s.value < q_; }

  Element pow(const Element& base, const Scalar& exponent) const;
  Element pow_g(const Scalar& exponent) const;
  Element mul(const Element& a, const Element& b) const;
  Element inverse(const Element& a) const;
  Scalar scalar_mul(const Scalar& a, const Scalar& b) const;
  Scalar scalar_inverse(const Scalar& a) const;

  /// Uniform in [1, q-1].
  Scalar random_scalar(RandomSource& rng) const;

  std::size_t element_width() const { return element_width_; }
  std::size_t scalar_width() const { return scalar_width_; }

  Bytes encode(const Element& e) const;
  Bytes encode(const Scalar& s) const;
  /// Rejects wrong widths and non-members with InvalidElement.
  Element decode_element(ByteView raw) const;
  /// Rejects wrong widths and out-of-range values with InvalidScalar.
  Scalar decode_scalar(ByteView raw) const;

  /// SHA-256 of the encoded public key.
  Digest fingerprint(const Element& pk) const { return sha256(encode(pk)); }

 private:
  GroupId id_;
  mpz_class p_, q_, g_;
  bool safe_prime_;
  std::size_t element_width_;
  std::size_t scalar_width_;
  std::shared_ptr<const detail::ModExp> exp_;  // null for small groups
};

struct KeyPair {
  Scalar sk;
  Element pk;
};

enum class Level : std::uint8_t { Second = 2, First = 1 };

struct PreCiphertext {
  Element c1;
  Element c2;
  Level level = Level::Second;

  bool operator==(const PreCiphertext&) const = default;
};

struct WrappedScalar {
  Element eph_pk;
  Bytes sealed;

  bool operator==(const WrappedScalar&) const = default;
};

struct ReEncryptionKey {
  Scalar rk1;
  WrappedScalar wrapped_r;
  Digest from_fp;
  Digest to_fp;
};

struct SealedRecord {
  PreCiphertext encapsulation;
  Bytes nonce;
  Bytes body;
  Bytes context;

  bool operator==(const SealedRecord&) const = default;
};

/// What the proxy hands back to a delegatee: the record with a first-level
/// encapsulation, plus the blinding scalar wrapped to the delegatee.
struct DelegatedRecord {
  SealedRecord record;
  WrappedScalar wrapped_r;

  bool operator==(const DelegatedRecord&) const = default;
};

KeyPair keygen(const GroupParams& params, RandomSource& rng);
KeyPair keypair_from_secret(const GroupParams& params, const Scalar& sk);

PreCiphertext encrypt_element(const GroupParams& params, const Element& pk, const Element& m,
                              const Scalar& k);
PreCiphertext encrypt_element(const GroupParams& params, const Element& pk, const Element& m,
                              RandomSource& rng);
Element decrypt_second(const GroupParams& params, const Scalar& sk, const PreCiphertext& ct);

WrappedScalar wrap_scalar(const GroupParams& params, const Element& pk_to, const Scalar& r,
                          RandomSource& rng);
Scalar unwrap_scalar(const GroupParams& params, const Scalar& sk_to, const WrappedScalar& ws);

/// Deterministic seam: `r` supplied by the caller.
ReEncryptionKey rekeygen(const GroupParams& params, const Scalar& sk_from, const Element& pk_to,
                         const Scalar& r, RandomSource& rng);
/// Draws r so that rk1 differs from both sk_from and r. Rejects sk_from = 1,
/// for which rk1 would equal r for every r.
ReEncryptionKey rekeygen(const GroupParams& params, const Scalar& sk_from, const Element& pk_to,
                         RandomSource& rng);

/// Needs no secret: a function of the ciphertext and the proxy share only.
PreCiphertext reencrypt(const GroupParams& params, const PreCiphertext& ct, const Scalar& rk1);

Element decrypt_first(const GroupParams& params, const Scalar& sk_to, const PreCiphertext& ct,
                      const WrappedScalar& wrapped_r);
/// Same as above with the blinding scalar already unwrapped.
Element decrypt_first_with_r(const GroupParams& params, const Scalar& r, const PreCiphertext& ct);

SealedRecord seal_record(const GroupParams& params, const Element& pk_stream, ByteView payload,
                         ByteView context, RandomSource& rng);
Bytes open_record(const GroupParams& params, const Scalar& sk_stream, const SealedRecord& sealed);

/// Proxy transformation of a sealed record: re-encrypts the encapsulation and
/// copies nonce, body and context verbatim.
SealedRecord reencrypt_record(const GroupParams& params, const SealedRecord& sealed,
                              const Scalar& rk1);
Bytes open_delegated(const GroupParams& params, const Scalar& sk_to, const DelegatedRecord& rec);
/// Opens a first-level record given the blinding scalar directly.
Bytes open_first_level(const GroupParams& params, const Scalar& r, const SealedRecord& sealed);

// Canonical encodings. Element and scalar widths come from `params`.
void encode(Writer& w, const GroupParams& params, const PreCiphertext& ct);
void encode(Writer& w, const GroupParams& params, const WrappedScalar& ws);
void encode(Writer& w, const GroupParams& params, const SealedRecord& rec);
PreCiphertext decode_ciphertext(Reader& r, const GroupParams& params);
WrappedScalar decode_wrapped(Reader& r, const GroupParams& params);
SealedRecord decode_sealed(Reader& r, const GroupParams& params);

Bytes serialize(const GroupParams& params, const WrappedScalar& ws);
Bytes serialize(const GroupParams& params, const SealedRecord& rec);
Bytes serialize(const GroupParams& params, const DelegatedRecord& rec);
WrappedScalar parse_wrapped(const GroupParams& params, ByteView raw);
SealedRecord parse_sealed(const GroupParams& params, ByteView raw);
DelegatedRecord parse_delegated(const GroupParams& params, ByteView raw);

}  // namespace medledger::pre
