#include "medledger/wire.hpp"

#include "medledger/codec.hpp"

namespace medledger::net {

Bytes encode_frame(const WireMessage& msg) {
  if (msg.payload.size() > kMaxPayload) throw FrameError("payload too large");
  Writer w;
  w.u32(static_cast<std::uint32_t>(msg.payload.size())).u8(msg.kind).raw(msg.payload);
  return std::move(w).take();
}

WireMessage decode_frame(ByteView frame) {
  if (frame.size() < kFrameHeaderSize) throw FrameError("short frame");
  Reader r(frame);
  auto len = r.u32();
  auto kind = r.u8();
  if (len > kMaxPayload) throw FrameError("payload too large");
  if (r.remaining() != len) throw FrameError("length does not match payload");
  return WireMessage(kind, r.raw(len));
}

void FrameReader::feed(ByteView data) { buffer_.insert(buffer_.end(), data.begin(), data.end()); }

std::optional<WireMessage> FrameReader::next() {
  if (buffer_.size() < kFrameHeaderSize) return std::nullopt;
  Reader r(buffer_);
  auto len = r.u32();
  auto kind = r.u8();
  if (len > kMaxPayload) throw FrameError("payload too large");
  if (r.remaining() < len) return std::nullopt;
  WireMessage msg(kind, r.raw(len));
  buffer_.erase(buffer_.begin(), buffer_.begin() + kFrameHeaderSize + len);
  return msg;
}

std::string_view to_string(WireErrc e) {
  switch (e) {
    case WireErrc::UnknownKind: return "UnknownKind";
    case WireErrc::Malformed: return "Malformed";
    case WireErrc::Rejected: return "Rejected";
    case WireErrc::NotFound: return "NotFound";
    case WireErrc::Corrupt: return "Corrupt";
    case WireErrc::Internal: return "Internal";
  }
  return "Unknown";
}

WireMessage error_message(WireErrc code, const std::string& detail) {
  Writer w;
  w.u8(static_cast<std::uint8_t>(code)).str(detail);
  return WireMessage(MsgKind::Error, std::move(w).take());
}

std::optional<WireErrorInfo> parse_error(const WireMessage& msg) {
  if (!msg.is(MsgKind::Error)) return std::nullopt;
  try {
    Reader r(msg.payload);
    auto code = r.u8();
    auto detail = r.str();
    r.expect_end();
    if (code < 1 || code > 6) return WireErrorInfo{WireErrc::Internal, detail};
    return WireErrorInfo{static_cast<WireErrc>(code), detail};
  } catch (const DecodeError&) {
    return WireErrorInfo{WireErrc::Malformed, "undecodable error payload"};
  }
}

}  // namespace medledger::net
