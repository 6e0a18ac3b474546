#pragma once

// Framed request/response messages: 4-byte big-endian payload length, 1-byte
// kind, canonical payload. Responses set the high bit of the request kind.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

#include "medledger/bytes.hpp"

namespace medledger::net {

enum class MsgKind : std::uint8_t {
  SubmitTx = 0x01,
  GetBlock = 0x02,
  GetTip = 0x03,
  GetState = 0x04,
  PutBlob = 0x05,
  GetBlob = 0x06,
  BlockAnnounce = 0x07,
  SubmitTxResp = 0x81,
  GetBlockResp = 0x82,
  GetTipResp = 0x83,
  GetStateResp = 0x84,
  PutBlobResp = 0x85,
  GetBlobResp = 0x86,
  BlockAnnounceResp = 0x87,
  Error = 0xFF,
};

inline constexpr std::size_t kFrameHeaderSize = 5;
inline constexpr std::uint32_t kMaxPayload = 64u << 20;

constexpr std::uint8_t response_kind(MsgKind request) {
  return static_cast<std::uint8_t>(request) | 0x80;
}

/// Kind is kept as a raw byte so unknown kinds survive decoding and can be
/// answered with an error.
struct WireMessage {
  std::uint8_t kind = 0;
  Bytes payload;

  WireMessage() = default;
  WireMessage(MsgKind k, Bytes p) : kind(static_cast<std::uint8_t>(k)), payload(std::move(p)) {}
  WireMessage(std::uint8_t k, Bytes p) : kind(k), payload(std::move(p)) {}

  bool is(MsgKind k) const { return kind == static_cast<std::uint8_t>(k); }
  bool operator==(const WireMessage&) const = default;
};

struct FrameError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

Bytes encode_frame(const WireMessage& msg);
/// Exactly one frame; throws FrameError on length mismatch.
WireMessage decode_frame(ByteView frame);

/// Incremental decoder for stream transports.
class FrameReader {
 public:
  void feed(ByteView data);
  /// Throws FrameError when a header announces an oversized payload.
  std::optional<WireMessage> next();

 private:
  Bytes buffer_;
};

enum class WireErrc : std::uint8_t {
  UnknownKind = 1,
  Malformed = 2,
  Rejected = 3,
  NotFound = 4,
  Corrupt = 5,
  Internal = 6,
};

std::string_view to_string(WireErrc e);

WireMessage error_message(WireErrc code, const std::string& detail);

struct WireErrorInfo {
  WireErrc code;
  std::string detail;
};

std::optional<WireErrorInfo> parse_error(const WireMessage& msg);

}  // namespace medledger::net
