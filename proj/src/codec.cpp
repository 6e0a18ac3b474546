#include "medledger/codec.hpp"

#include <algorithm>
#include <limits>

namespace medledger {

Writer& Writer::u8(std::uint8_t v) {
  out_.push_back(v);
  return *this;
}

Writer& Writer::u32(std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) out_.push_back(static_cast<std::uint8_t>(v >> shift));
  return *this;
}

Writer& Writer::u64(std::uint64_t v) {
  for (int shift = 56; shift >= 0; shift -= 8) out_.push_back(static_cast<std::uint8_t>(v >> shift));
  return *this;
}

Writer& Writer::raw(ByteView data) {
  out_.insert(out_.end(), data.begin(), data.end());
  return *this;
}

Writer& Writer::bytes(ByteView data) {
  count(data.size());
  return raw(data);
}

Writer& Writer::str(std::string_view s) {
  return bytes(ByteView(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
}

Writer& Writer::count(std::size_t n) {
  if (n > std::numeric_limits<std::uint32_t>::max())
    throw std::length_error("canonical encoding: length exceeds 32 bits");
  return u32(static_cast<std::uint32_t>(n));
}

ByteView Reader::take(std::size_t n) {
  if (n > remaining()) throw DecodeError("truncated input");
  auto view = in_.subspan(pos_, n);
  pos_ += n;
  return view;
}

std::uint8_t Reader::u8() { return take(1)[0]; }

std::uint32_t Reader::u32() {
  auto b = take(4);
  std::uint32_t v = 0;
  for (auto x : b) v = (v << 8) | x;
  return v;
}

std::uint64_t Reader::u64() {
  auto b = take(8);
  std::uint64_t v = 0;
  for (auto x : b) v = (v << 8) | x;
  return v;
}

bool Reader::boolean() {
  auto v = u8();
  if (v > 1) throw DecodeError("boolean out of range");
  return v == 1;
}

Bytes Reader::raw(std::size_t n) {
  auto v = take(n);
  return Bytes(v.begin(), v.end());
}

Bytes Reader::bytes() { return raw(u32()); }

std::string Reader::str() {
  auto v = take(u32());
  return std::string(v.begin(), v.end());
}

Digest Reader::digest() {
  Digest d;
  auto v = take(d.bytes.size());
  std::copy(v.begin(), v.end(), d.bytes.begin());
  return d;
}

SigPublicKey Reader::pubkey() {
  SigPublicKey k;
  auto v = take(k.bytes.size());
  std::copy(v.begin(), v.end(), k.bytes.begin());
  return k;
}

Signature Reader::signature() {
  Signature s;
  auto v = take(s.bytes.size());
  std::copy(v.begin(), v.end(), s.bytes.begin());
  return s;
}

std::uint32_t Reader::count(std::size_t min_item_size) {
  auto n = u32();
  if (min_item_size > 0 && n > remaining() / min_item_size) throw DecodeError("list count too large");
  return n;
}

void Reader::expect_end() const {
  if (remaining() != 0) throw DecodeError("trailing bytes");
}

}  // namespace medledger
