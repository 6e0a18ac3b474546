#include "medledger/pre.hpp"

#include <algorithm>

#include "modexp.hpp"

namespace medledger::pre {

namespace {

// RFC 3526 group 14: 2048-bit safe prime, generator 2 is a quadratic residue.
constexpr const char* kProdPrimeHex =
    "FFFFFFFFFFFFFFFFC90FDAA22168C234C4C6628B80DC1CD129024E088A67CC74"
    "020BBEA63B139B22514A08798E3404DDEF9519B3CD3A431B302B0A6DF25F1437"
    "4FE1356D6D51C245E485B576625E7EC6F44C42E9A637ED6B0BFF5CB6F406B7ED"
    "EE386BFB5A899FA5AE9F24117C4B1FE649286651ECE45B3DC2007CB8A163BF05"
    "98DA48361C55D39A69163FA8FD24CF5F83655D23DCA3AD961C62F356208552BB"
    "9ED529077096966D670C354E4ABC9804F1746C08CA18217C32905E462E36CE3B"
    "E39E772C180E86039B2783A2EC07A28FB5C55DF06F4C52C9DE2BCBF695581718"
    "3995497CEA956AE515D2261898FA051015728E5A8AACAA68FFFFFFFFFFFFFFFF";

std::size_t byte_width(const mpz_class& v) { return (mpz_sizeinbase(v.get_mpz_t(), 2) + 7) / 8; }

Bytes export_fixed(const mpz_class& v, std::size_t width) {
  Bytes out(width, 0);
  std::size_t count = 0;
  Bytes tmp(std::max<std::size_t>(byte_width(v), 1));
  mpz_export(tmp.data(), &count, 1, 1, 1, 0, v.get_mpz_t());
  if (count > width) throw std::logic_error("value wider than encoding width");
  std::copy(tmp.begin(), tmp.begin() + count, out.end() - count);
  return out;
}

mpz_class import_bytes(ByteView raw) {
  mpz_class v;
  if (!raw.empty()) mpz_import(v.get_mpz_t(), raw.size(), 1, 1, 1, 0, raw.data());
  return v;
}

struct WrapKeys {
  Bytes key;
  Bytes nonce;
};

WrapKeys derive_wrap_keys(const GroupParams& params, const Element& shared, const Element& eph,
                          const Element& pk_to) {
  Bytes ikm = params.encode(shared);
  auto e = params.encode(eph);
  auto t = params.encode(pk_to);
  ikm.insert(ikm.end(), e.begin(), e.end());
  ikm.insert(ikm.end(), t.begin(), t.end());
  auto okm = hkdf_sha256(ikm, "wrap", kAeadKeySize + kAeadNonceSize);
  return {Bytes(okm.begin(), okm.begin() + kAeadKeySize),
          Bytes(okm.begin() + kAeadKeySize, okm.end())};
}

Bytes derive_dek(const GroupParams& params, const Element& m, ByteView context) {
  Bytes ikm = params.encode(m);
  ikm.insert(ikm.end(), context.begin(), context.end());
  return hkdf_sha256(ikm, "dek", kAeadKeySize);
}

void require_element(const GroupParams& params, const Element& x) {
  if (!params.contains(x)) throw Error(Errc::InvalidElement);
}

void require_scalar(const GroupParams& params, const Scalar& s) {
  if (!params.valid_scalar(s)) throw Error(Errc::InvalidScalar);
}

Bytes open_body(const GroupParams& params, const Element& m, const SealedRecord& sealed) {
  try {
    auto dek = derive_dek(params, m, sealed.context);
    return aead_open(dek, sealed.nonce, sealed.body, sealed.context);
  } catch (const AeadError&) {
    throw Error(Errc::CorruptRecord);
  } catch (const std::invalid_argument&) {
    throw Error(Errc::CorruptRecord);
  }
}

}  // namespace

std::string to_string(GroupId id) {
  switch (id) {
    case GroupId::Toy: return "toy";
    case GroupId::Prod: return "prod";
  }
  return "unknown";
}

GroupId group_id_from_string(std::string_view name) {
  if (name == "toy") return GroupId::Toy;
  if (name == "prod") return GroupId::Prod;
  throw std::invalid_argument("unknown group: " + std::string(name));
}

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::InvalidElement: return "InvalidElement";
    case Errc::InvalidScalar: return "InvalidScalar";
    case Errc::WrongLevel: return "WrongLevel";
    case Errc::NotDelegatee: return "NotDelegatee";
    case Errc::CorruptRecord: return "CorruptRecord";
    case Errc::InvalidPayload: return "InvalidPayload";
    case Errc::Malformed: return "Malformed";
  }
  return "Unknown";
}

GroupParams::GroupParams(GroupId id, mpz_class p, mpz_class q, mpz_class g)
    : id_(id), p_(std::move(p)), q_(std::move(q)), g_(std::move(g)) {
  mpz_class rem = (p_ - 1) % q_;
  mpz_class gq;
  mpz_powm(gq.get_mpz_t(), g_.get_mpz_t(), q_.get_mpz_t(), p_.get_mpz_t());
  if (rem != 0 || gq != 1 || g_ == 1 || g_ <= 0 || g_ >= p_)
    throw std::invalid_argument("invalid group parameters");
  safe_prime_ = (p_ == 2 * q_ + 1);
  element_width_ = byte_width(p_);
  scalar_width_ = byte_width(q_);
  if (element_width_ >= 64) {
    exp_ = std::make_shared<detail::ModExp>(p_, g_, mpz_sizeinbase(q_.get_mpz_t(), 2));
  }
}

const GroupParams& GroupParams::toy() {
  static const GroupParams params(GroupId::Toy, 23, 11, 2);
  return params;
}

const GroupParams& GroupParams::prod() {
  static const GroupParams params = [] {
    mpz_class p(kProdPrimeHex, 16);
    mpz_class q = (p - 1) / 2;
    return GroupParams(GroupId::Prod, p, q, 2);
  }();
  return params;
}

const GroupParams& GroupParams::get(GroupId id) {
  switch (id) {
    case GroupId::Toy: return toy();
    case GroupId::Prod: return prod();
  }
  throw std::invalid_argument("unknown group id");
}

bool GroupParams::contains(const Element& x) const {
  if (x.value < 1 || x.value >= p_) return false;
  if (safe_prime_) {
    // The order-q subgroup of a safe-prime group is the quadratic residues.
    return mpz_legendre(x.value.get_mpz_t(), p_.get_mpz_t()) == 1;
  }
  mpz_class r;
  mpz_powm(r.get_mpz_t(), x.value.get_mpz_t(), q_.get_mpz_t(), p_.get_mpz_t());
  return r == 1;
}

Element GroupParams::pow(const Element& base, const Scalar& exponent) const {
  Element out;
  mpz_class e = exponent.value % q_;
  if (e < 0) e += q_;
  if (exp_) {
    out.value = exp_->pow(base.value, e);
  } else {
    mpz_powm(out.value.get_mpz_t(), base.value.get_mpz_t(), e.get_mpz_t(), p_.get_mpz_t());
  }
  return out;
}

Element GroupParams::pow_g(const Scalar& exponent) const {
  if (!exp_) return pow(generator(), exponent);
  mpz_class e = exponent.value % q_;
  if (e < 0) e += q_;
  return Element{exp_->pow_g(e)};
}

Element GroupParams::mul(const Element& a, const Element& b) const {
  return Element{mpz_class((a.value * b.value) % p_)};
}

Element GroupParams::inverse(const Element& a) const {
  Element out;
  if (mpz_invert(out.value.get_mpz_t(), a.value.get_mpz_t(), p_.get_mpz_t()) == 0)
    throw Error(Errc::InvalidElement);
  return out;
}

Scalar GroupParams::scalar_mul(const Scalar& a, const Scalar& b) const {
  return Scalar{mpz_class((a.value * b.value) % q_)};
}

Scalar GroupParams::scalar_inverse(const Scalar& a) const {
  Scalar out;
  if (mpz_invert(out.value.get_mpz_t(), a.value.get_mpz_t(), q_.get_mpz_t()) == 0)
    throw Error(Errc::InvalidScalar);
  return out;
}

Scalar GroupParams::random_scalar(RandomSource& rng) const {
  // 64 extra bits make the modular bias negligible.
  auto raw = rng.bytes(scalar_width_ + 8);
  mpz_class v = import_bytes(raw);
  mpz_class range = q_ - 1;
  return Scalar{mpz_class(v % range + 1)};
}

Bytes GroupParams::encode(const Element& e) const { return export_fixed(e.value, element_width_); }

Bytes GroupParams::encode(const Scalar& s) const { return export_fixed(s.value, scalar_width_); }

Element GroupParams::decode_element(ByteView raw) const {
  if (raw.size() != element_width_) throw Error(Errc::InvalidElement);
  Element e{import_bytes(raw)};
  require_element(*this, e);
  return e;
}

Scalar GroupParams::decode_scalar(ByteView raw) const {
  if (raw.size() != scalar_width_) throw Error(Errc::InvalidScalar);
  Scalar s{import_bytes(raw)};
  require_scalar(*this, s);
  return s;
}

KeyPair keygen(const GroupParams& params, RandomSource& rng) {
  return keypair_from_secret(params, params.random_scalar(rng));
}

KeyPair keypair_from_secret(const GroupParams& params, const Scalar& sk) {
  require_scalar(params, sk);
  return KeyPair{sk, params.pow_g(sk)};
}

PreCiphertext encrypt_element(const GroupParams& params, const Element& pk, const Element& m,
                              const Scalar& k) {
  require_element(params, pk);
  require_element(params, m);
  require_scalar(params, k);
  return PreCiphertext{params.mul(m, params.pow_g(k)), params.pow(pk, k), Level::Second};
}

PreCiphertext encrypt_element(const GroupParams& params, const Element& pk, const Element& m,
                              RandomSource& rng) {
  return encrypt_element(params, pk, m, params.random_scalar(rng));
}

Element decrypt_second(const GroupParams& params, const Scalar& sk, const PreCiphertext& ct) {
  if (ct.level != Level::Second) throw Error(Errc::WrongLevel);
  require_scalar(params, sk);
  require_element(params, ct.c1);
  require_element(params, ct.c2);
  auto gk = params.pow(ct.c2, params.scalar_inverse(sk));
  return params.mul(ct.c1, params.inverse(gk));
}

WrappedScalar wrap_scalar(const GroupParams& params, const Element& pk_to, const Scalar& r,
                          RandomSource& rng) {
  require_element(params, pk_to);
  require_scalar(params, r);
  auto eph_sk = params.random_scalar(rng);
  auto eph_pk = params.pow_g(eph_sk);
  auto shared = params.pow(pk_to, eph_sk);
  auto keys = derive_wrap_keys(params, shared, eph_pk, pk_to);
  auto aad = params.encode(eph_pk);
  return WrappedScalar{eph_pk, aead_seal(keys.key, keys.nonce, params.encode(r), aad)};
}

Scalar unwrap_scalar(const GroupParams& params, const Scalar& sk_to, const WrappedScalar& ws) {
  require_scalar(params, sk_to);
  if (!params.contains(ws.eph_pk)) throw Error(Errc::NotDelegatee);
  auto pk_to = params.pow_g(sk_to);
  auto shared = params.pow(ws.eph_pk, sk_to);
  auto keys = derive_wrap_keys(params, shared, ws.eph_pk, pk_to);
  Bytes raw;
  try {
    raw = aead_open(keys.key, keys.nonce, ws.sealed, params.encode(ws.eph_pk));
  } catch (const AeadError&) {
    throw Error(Errc::NotDelegatee);
  }
  try {
    return params.decode_scalar(raw);
  } catch (const Error&) {
    throw Error(Errc::NotDelegatee);
  }
}

ReEncryptionKey rekeygen(const GroupParams& params, const Scalar& sk_from, const Element& pk_to,
                         const Scalar& r, RandomSource& rng) {
  require_scalar(params, sk_from);
  require_scalar(params, r);
  ReEncryptionKey rk;
  rk.rk1 = params.scalar_mul(r, params.scalar_inverse(sk_from));
  rk.wrapped_r = wrap_scalar(params, pk_to, r, rng);
  rk.from_fp = params.fingerprint(params.pow_g(sk_from));
  rk.to_fp = params.fingerprint(pk_to);
  return rk;
}

ReEncryptionKey rekeygen(const GroupParams& params, const Scalar& sk_from, const Element& pk_to,
                         RandomSource& rng) {
  require_scalar(params, sk_from);
  if (sk_from.value == 1) throw Error(Errc::InvalidScalar);
  const auto a_inv = params.scalar_inverse(sk_from);
  for (;;) {
    auto r = params.random_scalar(rng);
    auto rk1 = params.scalar_mul(r, a_inv);
    if (rk1 == sk_from || rk1 == r) continue;
    return rekeygen(params, sk_from, pk_to, r, rng);
  }
}

PreCiphertext reencrypt(const GroupParams& params, const PreCiphertext& ct, const Scalar& rk1) {
  if (ct.level != Level::Second) throw Error(Errc::WrongLevel);
  require_scalar(params, rk1);
  require_element(params, ct.c1);
  require_element(params, ct.c2);
  return PreCiphertext{ct.c1, params.pow(ct.c2, rk1), Level::First};
}

Element decrypt_first_with_r(const GroupParams& params, const Scalar& r, const PreCiphertext& ct) {
  if (ct.level != Level::First) throw Error(Errc::WrongLevel);
  require_scalar(params, r);
  require_element(params, ct.c1);
  require_element(params, ct.c2);
  auto gk = params.pow(ct.c2, params.scalar_inverse(r));
  return params.mul(ct.c1, params.inverse(gk));
}

Element decrypt_first(const GroupParams& params, const Scalar& sk_to, const PreCiphertext& ct,
                      const WrappedScalar& wrapped_r) {
  if (ct.level != Level::First) throw Error(Errc::WrongLevel);
  return decrypt_first_with_r(params, unwrap_scalar(params, sk_to, wrapped_r), ct);
}

SealedRecord seal_record(const GroupParams& params, const Element& pk_stream, ByteView payload,
                         ByteView context, RandomSource& rng) {
  if (payload.empty()) throw Error(Errc::InvalidPayload);
  auto m = params.pow_g(params.random_scalar(rng));
  SealedRecord out;
  out.encapsulation = encrypt_element(params, pk_stream, m, rng);
  out.nonce = rng.bytes(kAeadNonceSize);
  out.context.assign(context.begin(), context.end());
  out.body = aead_seal(derive_dek(params, m, context), out.nonce, payload, context);
  return out;
}

Bytes open_record(const GroupParams& params, const Scalar& sk_stream, const SealedRecord& sealed) {
  Element m;
  try {
    m = decrypt_second(params, sk_stream, sealed.encapsulation);
  } catch (const Error& e) {
    if (e.code() == Errc::InvalidElement) throw Error(Errc::CorruptRecord);
    throw;
  }
  return open_body(params, m, sealed);
}

SealedRecord reencrypt_record(const GroupParams& params, const SealedRecord& sealed,
                              const Scalar& rk1) {
  SealedRecord out = sealed;
  out.encapsulation = reencrypt(params, sealed.encapsulation, rk1);
  return out;
}

Bytes open_first_level(const GroupParams& params, const Scalar& r, const SealedRecord& sealed) {
  Element m;
  try {
    m = decrypt_first_with_r(params, r, sealed.encapsulation);
  } catch (const Error& e) {
    if (e.code() == Errc::InvalidElement) throw Error(Errc::CorruptRecord);
    throw;
  }
  return open_body(params, m, sealed);
}

Bytes open_delegated(const GroupParams& params, const Scalar& sk_to, const DelegatedRecord& rec) {
  if (rec.record.encapsulation.level != Level::First) throw Error(Errc::WrongLevel);
  auto r = unwrap_scalar(params, sk_to, rec.wrapped_r);
  return open_first_level(params, r, rec.record);
}

// --- encodings ---------------------------------------------------------------

void encode(Writer& w, const GroupParams& params, const PreCiphertext& ct) {
  w.u8(static_cast<std::uint8_t>(ct.level));
  w.raw(params.encode(ct.c1));
  w.raw(params.encode(ct.c2));
}

void encode(Writer& w, const GroupParams& params, const WrappedScalar& ws) {
  w.raw(params.encode(ws.eph_pk));
  w.bytes(ws.sealed);
}

void encode(Writer& w, const GroupParams& params, const SealedRecord& rec) {
  encode(w, params, rec.encapsulation);
  w.bytes(rec.nonce);
  w.bytes(rec.body);
  w.bytes(rec.context);
}

PreCiphertext decode_ciphertext(Reader& r, const GroupParams& params) {
  PreCiphertext ct;
  auto level = r.u8();
  if (level != static_cast<std::uint8_t>(Level::Second) &&
      level != static_cast<std::uint8_t>(Level::First))
    throw Error(Errc::Malformed);
  ct.level = static_cast<Level>(level);
  ct.c1 = params.decode_element(r.raw(params.element_width()));
  ct.c2 = params.decode_element(r.raw(params.element_width()));
  return ct;
}

WrappedScalar decode_wrapped(Reader& r, const GroupParams& params) {
  WrappedScalar ws;
  ws.eph_pk = params.decode_element(r.raw(params.element_width()));
  ws.sealed = r.bytes();
  return ws;
}

SealedRecord decode_sealed(Reader& r, const GroupParams& params) {
  SealedRecord rec;
  rec.encapsulation = decode_ciphertext(r, params);
  rec.nonce = r.bytes();
  if (rec.nonce.size() != kAeadNonceSize) throw Error(Errc::Malformed);
  rec.body = r.bytes();
  rec.context = r.bytes();
  return rec;
}

Bytes serialize(const GroupParams& params, const WrappedScalar& ws) {
  Writer w;
  encode(w, params, ws);
  return std::move(w).take();
}

Bytes serialize(const GroupParams& params, const SealedRecord& rec) {
  Writer w;
  encode(w, params, rec);
  return std::move(w).take();
}

Bytes serialize(const GroupParams& params, const DelegatedRecord& rec) {
  Writer w;
  encode(w, params, rec.record);
  encode(w, params, rec.wrapped_r);
  return std::move(w).take();
}

WrappedScalar parse_wrapped(const GroupParams& params, ByteView raw) {
  try {
    Reader r(raw);
    auto ws = decode_wrapped(r, params);
    r.expect_end();
    return ws;
  } catch (const DecodeError&) {
    throw Error(Errc::Malformed);
  } catch (const Error&) {
    throw Error(Errc::Malformed);
  }
}

SealedRecord parse_sealed(const GroupParams& params, ByteView raw) {
  try {
    Reader r(raw);
    auto rec = decode_sealed(r, params);
    r.expect_end();
    return rec;
  } catch (const DecodeError&) {
    throw Error(Errc::CorruptRecord);
  } catch (const Error&) {
    throw Error(Errc::CorruptRecord);
  }
}

DelegatedRecord parse_delegated(const GroupParams& params, ByteView raw) {
  try {
    Reader r(raw);
    DelegatedRecord rec;
    rec.record = decode_sealed(r, params);
    rec.wrapped_r = decode_wrapped(r, params);
    r.expect_end();
    return rec;
  } catch (const DecodeError&) {
    throw Error(Errc::CorruptRecord);
  } catch (const Error&) {
    throw Error(Errc::CorruptRecord);
  }
}

}  // namespace medledger::pre
