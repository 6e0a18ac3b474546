#pragma once

// The built-in contract set: transaction bodies, their deterministic state
// transitions, the access decision, and read-only queries.

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "medledger/credential.hpp"
#include "medledger/state.hpp"
#include "medledger/transaction.hpp"

namespace medledger::contracts {

using ledger::Decision;
using ledger::DenyReason;
using ledger::LedgerState;
using ledger::Role;
using ledger::TransactionEnvelope;
using ledger::TxKind;

// --- bodies ------------------------------------------------------------------

struct RegisterActorBody {
  std::string actor_id;
  Role role = Role::Patient;
  SigPublicKey sig_pk;
  Bytes pre_pk;

  static constexpr TxKind kKind = TxKind::RegisterActor;
  void encode(Writer& w) const;
  static RegisterActorBody decode(Reader& r);
};

struct RegisterDeviceBody {
  std::string device_id;
  SigPublicKey device_pk;

  static constexpr TxKind kKind = TxKind::RegisterDevice;
  void encode(Writer& w) const;
};

struct RegisterStreamBody {
  std::string stream_id;
  Bytes stream_pk;

  static constexpr TxKind kKind = TxKind::RegisterDevice;
  void encode(Writer& w) const;
};

using RegistryBody = std::variant<RegisterDeviceBody, RegisterStreamBody>;
RegistryBody decode_registry(Reader& r);

struct IssueAttributeBody {
  policy::Attribute credential;

  static constexpr TxKind kKind = TxKind::Attribute;
  void encode(Writer& w) const;
};

struct RevokeAttributeBody {
  std::string subject;
  std::string name;

  static constexpr TxKind kKind = TxKind::Attribute;
  void encode(Writer& w) const;
};

using AttributeBody = std::variant<IssueAttributeBody, RevokeAttributeBody>;
AttributeBody decode_attribute_body(Reader& r);

struct StoreRecordBody {
  Digest record_id;  // SHA-256 of the sealed blob
  std::string stream_id;
  std::string owner;
  std::string device_id;
  std::uint64_t size = 0;

  static constexpr TxKind kKind = TxKind::StoreRecord;
  void encode(Writer& w) const;
  static StoreRecordBody decode(Reader& r);
};

struct GrantAccessBody {
  std::string grant_id;
  std::string stream_id;
  std::string delegatee;
  std::string policy;
  Bytes rk1;
  Bytes wrapped_r;
  Digest from_fp;
  Digest to_fp;
  std::string proxy_id;
  std::uint64_t expiry = 0;

  static constexpr TxKind kKind = TxKind::GrantAccess;
  void encode(Writer& w) const;
  static GrantAccessBody decode(Reader& r);
};

struct RevokeAccessBody {
  std::string grant_id;

  static constexpr TxKind kKind = TxKind::RevokeAccess;
  void encode(Writer& w) const;
  static RevokeAccessBody decode(Reader& r);
};

struct AccessRequestBody {
  std::string request_id;
  std::string grant_id;
  Digest record_id;

  static constexpr TxKind kKind = TxKind::AccessRequest;
  void encode(Writer& w) const;
  static AccessRequestBody decode(Reader& r);
};

struct AccessLogBody {
  std::string request_id;
  Decision decision;
  std::optional<Digest> result_blob_hash;

  static constexpr TxKind kKind = TxKind::AccessLog;
  void encode(Writer& w) const;
  static AccessLogBody decode(Reader& r);
};

/// Runs rekeygen from the stream key to the delegatee and fills in the key
/// material and fingerprints.
GrantAccessBody prepare_grant(const pre::GroupParams& params, const pre::Scalar& stream_sk,
                              const pre::Element& delegatee_pk, std::string grant_id, std::string stream_id,
                              std::string delegatee, std::string policy, std::string proxy_id,
                              std::uint64_t expiry, RandomSource& rng);

template <typename Body>
Bytes encode_body(const Body& body) {
  Writer w;
  body.encode(w);
  return std::move(w).take();
}

template <typename Body>
TransactionEnvelope make_tx(const Body& body, std::string sender, std::uint64_t nonce,
                            const SigSecretKey& key) {
  return ledger::make_transaction(Body::kKind, encode_body(body), std::move(sender), nonce, key);
}

// --- application ---------------------------------------------------------------

enum class TxError : std::uint8_t {
  Malformed,
  UnknownSender,
  BadSignature,
  BadNonce,
  UnknownActor,
  WrongSigner,
  UnknownStream,
  UnknownDevice,
  UnknownRecord,
  UnknownGrant,
  UnknownRequest,
  UnknownAttribute,
  DuplicateId,
  AlreadyRevoked,
  InvalidKey,
  InvalidRole,
  InvalidPolicy,
  InvalidAttribute,
  BadCredential,
  LogMismatch,
};

std::string_view to_string(TxError e);

struct Rejection {
  TxError error;
  std::string detail;

  std::string str() const;
};

/// nullopt when the transaction applied (or would apply, with commit=false).
using TxOutcome = std::optional<Rejection>;

/// Contract-level validation and transition. Signature and nonce are the
/// caller's responsibility. With commit=false the state is left untouched;
/// with commit=true it is mutated only if the transaction is accepted.
TxOutcome apply_transaction(LedgerState& state, const TransactionEnvelope& tx,
                            std::uint64_t height, bool commit = true);

struct AccessQuery {
  std::string grant_id;
  Digest record_id;
  std::string requester;
};

/// Requires the grant and record to exist (throws std::out_of_range otherwise).
Decision authorize(const LedgerState& state, const AccessQuery& query, std::uint64_t height);

// --- queries -------------------------------------------------------------------

/// Grants where `actor` is the stream owner, the delegatee or the proxy.
std::vector<ledger::Grant> query_grants(const LedgerState& state, const std::string& actor);

struct AuditFilter {
  enum class DecisionFilter { Any, Granted, Denied };
  DecisionFilter decision = DecisionFilter::Any;
  std::optional<std::string> grant_id;
  std::optional<std::string> requester;
  std::optional<std::string> request_id;
};

std::vector<ledger::AccessEvent> query_audit(const LedgerState& state, const AuditFilter& filter);
std::vector<ledger::RecordMeta> query_records(const LedgerState& state, const std::string& stream);

}  // namespace medledger::contracts
