#pragma once

// Canonical binary encoding shared by every on-chain and on-wire structure.
// Integers are fixed-width big-endian, byte strings carry a 4-byte big-endian
// length prefix, lists carry a 4-byte count prefix. Fields are written in
// declaration order, so encodings are injective per type.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

#include "medledger/bytes.hpp"
#include "medledger/primitives.hpp"

namespace medledger {

struct DecodeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class Writer {
 public:
  Writer& u8(std::uint8_t v);
  Writer& u32(std::uint32_t v);
  Writer& u64(std::uint64_t v);
  Writer& boolean(bool v) { return u8(v ? 1 : 0); }
  Writer& raw(ByteView data);
  Writer& bytes(ByteView data);
  Writer& str(std::string_view s);
  Writer& digest(const Digest& d) { return raw(d.bytes); }
  Writer& pubkey(const SigPublicKey& k) { return raw(k.bytes); }
  Writer& signature(const Signature& s) { return raw(s.bytes); }
  Writer& count(std::size_t n);

  const Bytes& data() const& { return out_; }
  Bytes take() && { return std::move(out_); }

 private:
  Bytes out_;
};

class Reader {
 public:
  explicit Reader(ByteView in) : in_(in) {}

  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  bool boolean();
  Bytes raw(std::size_t n);
  Bytes bytes();
  std::string str();
  Digest digest();
  SigPublicKey pubkey();
  Signature signature();
  /// Reads a list count and rejects counts that cannot possibly fit in the
  /// remaining input given `min_item_size` bytes per item.
  std::uint32_t count(std::size_t min_item_size = 1);

  std::size_t remaining() const { return in_.size() - pos_; }
  std::size_t position() const { return pos_; }
  void expect_end() const;

 private:
  ByteView take(std::size_t n);

  ByteView in_;
  std::size_t pos_ = 0;
};

/// Decodes `T` with `T::decode(Reader&)` and insists the whole input was used.
template <typename T>
T decode_exact(ByteView data) {
  Reader r(data);
  T value = T::decode(r);
  r.expect_end();
  return value;
}

}  // namespace medledger
