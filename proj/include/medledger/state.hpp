#pragma once

// Materialized ledger state. Everything here is derivable from the genesis
// configuration plus the ordered block list, and hashes canonically.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "medledger/bytes.hpp"
#include "medledger/codec.hpp"
#include "medledger/pre.hpp"
#include "medledger/primitives.hpp"

namespace medledger::ledger {

enum class Role : std::uint8_t {
  Patient = 1,
  Doctor = 2,
  Researcher = 3,
  Proxy = 4,
  Registrar = 5,
  Admin = 6,
};

std::string_view to_string(Role r);
std::optional<Role> role_from_string(std::string_view s);

enum class DenyReason : std::uint8_t {
  Revoked = 1,
  Expired = 2,
  NotDelegatee = 3,
  WrongStream = 4,
  PolicyUnsatisfied = 5,
  MissingBlob = 6,
  MalformedRecord = 7,
};

std::string_view to_string(DenyReason r);

/// GRANTED, or DENIED with a reason.
struct Decision {
  std::optional<DenyReason> denied;

  static Decision granted() { return {}; }
  static Decision deny(DenyReason r) { return Decision{r}; }
  bool is_granted() const { return !denied.has_value(); }
  /// "GRANTED" or "DENIED(<Reason>)".
  std::string str() const;

  void encode(Writer& w) const;
  static Decision decode(Reader& r);
  bool operator==(const Decision&) const = default;
};

struct Actor {
  Role role = Role::Patient;
  SigPublicKey sig_pk;
  Bytes pre_pk;  // empty when the actor cannot receive delegations
  std::uint64_t nonce = 0;
  std::uint64_t registered_at = 0;

  bool operator==(const Actor&) const = default;
};

struct Device {
  std::string owner;
  SigPublicKey sig_pk;
  std::uint64_t nonce = 0;
  std::uint64_t registered_at = 0;

  bool operator==(const Device&) const = default;
};

struct Stream {
  std::string owner;
  Bytes stream_pk;
  std::uint64_t created_at = 0;

  bool operator==(const Stream&) const = default;
};

struct RecordMeta {
  Digest record_id;
  std::string stream_id;
  std::string owner;
  std::string device_id;  // empty when the owner stored it directly
  Digest blob_hash;
  std::uint64_t size = 0;
  std::uint64_t created_at = 0;

  bool operator==(const RecordMeta&) const = default;
};

enum class GrantStatus : std::uint8_t { Active = 1, Revoked = 2 };

struct Grant {
  std::string grant_id;
  std::string stream_id;
  std::string delegatee;
  std::string policy;  // canonical printed form
  Bytes rk1;
  Bytes wrapped_r;
  Digest from_fp;
  Digest to_fp;
  std::string proxy_id;
  std::uint64_t expiry = 0;  // 0 = never
  GrantStatus status = GrantStatus::Active;
  std::uint64_t issued_at = 0;
  std::uint64_t revoked_at = 0;

  bool operator==(const Grant&) const = default;
};

struct AccessRequestEntry {
  std::string request_id;
  std::string grant_id;
  Digest record_id;
  std::string requester;
  std::uint64_t height = 0;
  Decision decision;
  bool logged = false;

  bool operator==(const AccessRequestEntry&) const = default;
};

struct AttributeEntry {
  std::string name;
  std::uint64_t credential_height = 0;  // issued_at inside the signed credential
  std::uint64_t applied_at = 0;         // inclusion height
  std::uint64_t revoked_at = 0;         // 0 = still held
  Signature registrar_sig;

  bool operator==(const AttributeEntry&) const = default;
};

struct AccessEvent {
  std::string request_id;
  std::string grant_id;
  Digest record_id;
  std::string requester;
  Decision decision;
  std::optional<Digest> result_blob_hash;
  std::uint64_t height = 0;

  bool operator==(const AccessEvent&) const = default;
};

struct Validator {
  std::string id;
  SigPublicKey sig_pk;
  bool operator==(const Validator&) const = default;
};

struct Genesis {
  std::string chain_id;
  pre::GroupId group = pre::GroupId::Prod;
  std::vector<Validator> validators;
  std::string admin_id;
  SigPublicKey admin_pk;
  std::string registrar_id;
  SigPublicKey registrar_pk;
  std::uint64_t timestamp = 0;

  void encode(Writer& w) const;
  static Genesis decode(Reader& r);
  Bytes serialize() const;
  bool operator==(const Genesis&) const = default;
};

struct LedgerState {
  pre::GroupId group = pre::GroupId::Prod;
  SigPublicKey admin_pk;
  SigPublicKey registrar_pk;
  std::map<std::string, Actor> actors;
  std::map<std::string, Device> devices;
  std::map<std::string, Stream> streams;
  std::map<Digest, RecordMeta> records;
  std::map<std::string, Grant> grants;
  std::map<std::string, AccessRequestEntry> requests;
  std::map<std::string, std::vector<AttributeEntry>> attributes;
  std::vector<AccessEvent> audit_log;

  const pre::GroupParams& params() const { return pre::GroupParams::get(group); }

  void encode(Writer& w) const;
  static LedgerState decode(Reader& r);
  Bytes serialize() const;
  bool operator==(const LedgerState&) const = default;
};

LedgerState genesis_state(const Genesis& genesis);

/// SHA-256 of the canonical state encoding (maps in key order).
Digest state_hash(const LedgerState& state);

}  // namespace medledger::ledger
