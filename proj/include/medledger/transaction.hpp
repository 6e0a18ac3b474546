#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "medledger/bytes.hpp"
#include "medledger/codec.hpp"
#include "medledger/primitives.hpp"

namespace medledger::ledger {

/// One-byte kind tags, fixed on the wire.
enum class TxKind : std::uint8_t {
  RegisterActor = 0x01,
  RegisterDevice = 0x02,  // also carries stream registration
  Attribute = 0x03,       // IssueAttribute / RevokeAttribute
  StoreRecord = 0x04,
  GrantAccess = 0x05,
  RevokeAccess = 0x06,
  AccessRequest = 0x07,
  AccessLog = 0x08,
};

std::string_view to_string(TxKind k);
std::optional<TxKind> tx_kind_from_byte(std::uint8_t raw);

struct TransactionEnvelope {
  TxKind kind = TxKind::RegisterActor;
  Bytes body;
  std::string sender;
  std::uint64_t nonce = 0;
  Signature signature;

  /// Bytes covered by the signature: domain tag, kind, body, sender, nonce.
  Bytes signing_bytes() const;
  Digest tx_id() const;

  void encode(Writer& w) const;
  static TransactionEnvelope decode(Reader& r);
  Bytes serialize() const;

  bool operator==(const TransactionEnvelope&) const = default;
};

TransactionEnvelope make_transaction(TxKind kind, Bytes body, std::string sender,
                                     std::uint64_t nonce, const SigSecretKey& key);

}  // namespace medledger::ledger
