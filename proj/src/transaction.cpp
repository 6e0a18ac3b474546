#include "medledger/transaction.hpp"

namespace medledger::ledger {

std::string_view to_string(TxKind k) {
  switch (k) {
    case TxKind::RegisterActor: return "RegisterActor";
    case TxKind::RegisterDevice: return "RegisterDevice";
    case TxKind::Attribute: return "Attribute";
    case TxKind::StoreRecord: return "StoreRecord";
    case TxKind::GrantAccess: return "GrantAccess";
    case TxKind::RevokeAccess: return "RevokeAccess";
    case TxKind::AccessRequest: return "AccessRequest";
    case TxKind::AccessLog: return "AccessLog";
  }
  return "Unknown";
}

std::optional<TxKind> tx_kind_from_byte(std::uint8_t raw) {
  if (raw < 0x01 || raw > 0x08) return std::nullopt;
  return static_cast<TxKind>(raw);
}

Bytes TransactionEnvelope::signing_bytes() const {
  Writer w;
  w.str("medledger/v1/tx").u8(static_cast<std::uint8_t>(kind)).bytes(body).str(sender).u64(nonce);
  return std::move(w).take();
}

Digest TransactionEnvelope::tx_id() const { return sha256(signing_bytes()); }

void TransactionEnvelope::encode(Writer& w) const {
  w.u8(static_cast<std::uint8_t>(kind)).bytes(body).str(sender).u64(nonce).signature(signature);
}

TransactionEnvelope TransactionEnvelope::decode(Reader& r) {
  TransactionEnvelope tx;
  auto kind = tx_kind_from_byte(r.u8());
  if (!kind) throw DecodeError("unknown transaction kind");
  tx.kind = *kind;
  tx.body = r.bytes();
  tx.sender = r.str();
  tx.nonce = r.u64();
  tx.signature = r.signature();
  return tx;
}

Bytes TransactionEnvelope::serialize() const {
  Writer w;
  encode(w);
  return std::move(w).take();
}

TransactionEnvelope make_transaction(TxKind kind, Bytes body, std::string sender,
                                     std::uint64_t nonce, const SigSecretKey& key) {
  TransactionEnvelope tx;
  tx.kind = kind;
  tx.body = std::move(body);
  tx.sender = std::move(sender);
  tx.nonce = nonce;
  tx.signature = sign(key, tx.signing_bytes());
  return tx;
}

}  // namespace medledger::ledger
