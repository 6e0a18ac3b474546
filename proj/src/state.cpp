#include "medledger/state.hpp"

namespace medledger::ledger {

namespace {

template <typename E>
E checked_enum(std::uint8_t raw, std::uint8_t lo, std::uint8_t hi, const char* what) {
  if (raw < lo || raw > hi) throw DecodeError(std::string("invalid ") + what);
  return static_cast<E>(raw);
}

void encode(Writer& w, const Actor& a) {
  w.u8(static_cast<std::uint8_t>(a.role)).pubkey(a.sig_pk).bytes(a.pre_pk).u64(a.nonce).u64(
      a.registered_at);
}

Actor decode_actor(Reader& r) {
  Actor a;
  a.role = checked_enum<Role>(r.u8(), 1, 6, "role");
  a.sig_pk = r.pubkey();
  a.pre_pk = r.bytes();
  a.nonce = r.u64();
  a.registered_at = r.u64();
  return a;
}

void encode(Writer& w, const Device& d) {
  w.str(d.owner).pubkey(d.sig_pk).u64(d.nonce).u64(d.registered_at);
}

Device decode_device(Reader& r) {
  Device d;
  d.owner = r.str();
  d.sig_pk = r.pubkey();
  d.nonce = r.u64();
  d.registered_at = r.u64();
  return d;
}

void encode(Writer& w, const Stream& s) { w.str(s.owner).bytes(s.stream_pk).u64(s.created_at); }

Stream decode_stream(Reader& r) {
  Stream s;
  s.owner = r.str();
  s.stream_pk = r.bytes();
  s.created_at = r.u64();
  return s;
}

void encode(Writer& w, const RecordMeta& m) {
  w.digest(m.record_id).str(m.stream_id).str(m.owner).str(m.device_id).digest(m.blob_hash).u64(
      m.size).u64(m.created_at);
}

RecordMeta decode_record(Reader& r) {
  RecordMeta m;
  m.record_id = r.digest();
  m.stream_id = r.str();
  m.owner = r.str();
  m.device_id = r.str();
  m.blob_hash = r.digest();
  m.size = r.u64();
  m.created_at = r.u64();
  return m;
}

void encode(Writer& w, const Grant& g) {
  w.str(g.grant_id).str(g.stream_id).str(g.delegatee).str(g.policy).bytes(g.rk1).bytes(
      g.wrapped_r);
  w.digest(g.from_fp).digest(g.to_fp).str(g.proxy_id).u64(g.expiry);
  w.u8(static_cast<std::uint8_t>(g.status)).u64(g.issued_at).u64(g.revoked_at);
}

Grant decode_grant(Reader& r) {
  Grant g;
  g.grant_id = r.str();
  g.stream_id = r.str();
  g.delegatee = r.str();
  g.policy = r.str();
  g.rk1 = r.bytes();
  g.wrapped_r = r.bytes();
  g.from_fp = r.digest();
  g.to_fp = r.digest();
  g.proxy_id = r.str();
  g.expiry = r.u64();
  g.status = checked_enum<GrantStatus>(r.u8(), 1, 2, "grant status");
  g.issued_at = r.u64();
  g.revoked_at = r.u64();
  return g;
}

void encode(Writer& w, const AccessRequestEntry& e) {
  w.str(e.request_id).str(e.grant_id).digest(e.record_id).str(e.requester).u64(e.height);
  e.decision.encode(w);
  w.boolean(e.logged);
}

AccessRequestEntry decode_request(Reader& r) {
  AccessRequestEntry e;
  e.request_id = r.str();
  e.grant_id = r.str();
  e.record_id = r.digest();
  e.requester = r.str();
  e.height = r.u64();
  e.decision = Decision::decode(r);
  e.logged = r.boolean();
  return e;
}

void encode(Writer& w, const AttributeEntry& a) {
  w.str(a.name).u64(a.credential_height).u64(a.applied_at).u64(a.revoked_at).signature(
      a.registrar_sig);
}

AttributeEntry decode_attribute(Reader& r) {
  AttributeEntry a;
  a.name = r.str();
  a.credential_height = r.u64();
  a.applied_at = r.u64();
  a.revoked_at = r.u64();
  a.registrar_sig = r.signature();
  return a;
}

void encode(Writer& w, const AccessEvent& e) {
  w.str(e.request_id).str(e.grant_id).digest(e.record_id).str(e.requester);
  e.decision.encode(w);
  w.boolean(e.result_blob_hash.has_value());
  if (e.result_blob_hash) w.digest(*e.result_blob_hash);
  w.u64(e.height);
}

AccessEvent decode_event(Reader& r) {
  AccessEvent e;
  e.request_id = r.str();
  e.grant_id = r.str();
  e.record_id = r.digest();
  e.requester = r.str();
  e.decision = Decision::decode(r);
  if (r.boolean()) e.result_blob_hash = r.digest();
  e.height = r.u64();
  return e;
}

template <typename K, typename V, typename EncodeKey>
void encode_map(Writer& w, const std::map<K, V>& m, EncodeKey encode_key) {
  w.count(m.size());
  for (const auto& [k, v] : m) {
    encode_key(w, k);
    encode(w, v);
  }
}

// Keys must arrive strictly increasing so each map has exactly one encoding.
template <typename K, typename V, typename DecodeKey, typename DecodeValue>
std::map<K, V> decode_map(Reader& r, DecodeKey decode_key, DecodeValue decode_value) {
  std::map<K, V> m;
  auto n = r.count();
  for (std::uint32_t i = 0; i < n; ++i) {
    K key = decode_key(r);
    if (!m.empty() && !(std::prev(m.end())->first < key)) throw DecodeError("map keys out of order");
    m.emplace_hint(m.end(), std::move(key), decode_value(r));
  }
  return m;
}

auto write_str = [](Writer& w, const std::string& s) { w.str(s); };
auto read_str = [](Reader& r) { return r.str(); };

}  // namespace

std::string_view to_string(Role r) {
  switch (r) {
    case Role::Patient: return "PATIENT";
    case Role::Doctor: return "DOCTOR";
    case Role::Researcher: return "RESEARCHER";
    case Role::Proxy: return "PROXY";
    case Role::Registrar: return "REGISTRAR";
    case Role::Admin: return "ADMIN";
  }
  return "UNKNOWN";
}

std::optional<Role> role_from_string(std::string_view s) {
  for (auto r : {Role::Patient, Role::Doctor, Role::Researcher, Role::Proxy, Role::Registrar,
                 Role::Admin}) {
    if (to_string(r) == s) return r;
  }
  return std::nullopt;
}

std::string_view to_string(DenyReason r) {
  switch (r) {
    case DenyReason::Revoked: return "Revoked";
    case DenyReason::Expired: return "Expired";
    case DenyReason::NotDelegatee: return "NotDelegatee";
    case DenyReason::WrongStream: return "WrongStream";
    case DenyReason::PolicyUnsatisfied: return "PolicyUnsatisfied";
    case DenyReason::MissingBlob: return "MissingBlob";
    case DenyReason::MalformedRecord: return "MalformedRecord";
  }
  return "Unknown";
}

std::string Decision::str() const {
  if (!denied) return "GRANTED";
  return "DENIED(" + std::string(to_string(*denied)) + ")";
}

void Decision::encode(Writer& w) const { w.u8(denied ? static_cast<std::uint8_t>(*denied) : 0); }

Decision Decision::decode(Reader& r) {
  auto raw = r.u8();
  if (raw == 0) return granted();
  return deny(checked_enum<DenyReason>(raw, 1, 7, "deny reason"));
}

void Genesis::encode(Writer& w) const {
  w.str("medledger/v1/genesis").str(chain_id).u8(static_cast<std::uint8_t>(group));
  w.count(validators.size());
  for (const auto& v : validators) w.str(v.id).pubkey(v.sig_pk);
  w.str(admin_id).pubkey(admin_pk).str(registrar_id).pubkey(registrar_pk).u64(timestamp);
}

Genesis Genesis::decode(Reader& r) {
  if (r.str() != "medledger/v1/genesis") throw DecodeError("not a genesis file");
  Genesis g;
  g.chain_id = r.str();
  g.group = checked_enum<pre::GroupId>(r.u8(), 1, 2, "group id");
  auto n = r.count(36);
  for (std::uint32_t i = 0; i < n; ++i) {
    Validator v;
    v.id = r.str();
    v.sig_pk = r.pubkey();
    g.validators.push_back(std::move(v));
  }
  g.admin_id = r.str();
  g.admin_pk = r.pubkey();
  g.registrar_id = r.str();
  g.registrar_pk = r.pubkey();
  g.timestamp = r.u64();
  return g;
}

Bytes Genesis::serialize() const {
  Writer w;
  encode(w);
  return std::move(w).take();
}

void LedgerState::encode(Writer& w) const {
  w.u8(static_cast<std::uint8_t>(group)).pubkey(admin_pk).pubkey(registrar_pk);
  encode_map(w, actors, write_str);
  encode_map(w, devices, write_str);
  encode_map(w, streams, write_str);
  encode_map(w, records, [](Writer& w2, const Digest& d) { w2.digest(d); });
  encode_map(w, grants, write_str);
  encode_map(w, requests, write_str);
  w.count(attributes.size());
  for (const auto& [actor, entries] : attributes) {
    w.str(actor).count(entries.size());
    for (const auto& e : entries) ledger::encode(w, e);
  }
  w.count(audit_log.size());
  for (const auto& e : audit_log) ledger::encode(w, e);
}

LedgerState LedgerState::decode(Reader& r) {
  LedgerState s;
  s.group = checked_enum<pre::GroupId>(r.u8(), 1, 2, "group id");
  s.admin_pk = r.pubkey();
  s.registrar_pk = r.pubkey();
  s.actors = decode_map<std::string, Actor>(r, read_str, decode_actor);
  s.devices = decode_map<std::string, Device>(r, read_str, decode_device);
  s.streams = decode_map<std::string, Stream>(r, read_str, decode_stream);
  s.records = decode_map<Digest, RecordMeta>(r, [](Reader& r2) { return r2.digest(); },
                                             decode_record);
  s.grants = decode_map<std::string, Grant>(r, read_str, decode_grant);
  s.requests = decode_map<std::string, AccessRequestEntry>(r, read_str, decode_request);
  s.attributes = decode_map<std::string, std::vector<AttributeEntry>>(r, read_str, [](Reader& r2) {
    std::vector<AttributeEntry> entries;
    auto n = r2.count();
    for (std::uint32_t i = 0; i < n; ++i) entries.push_back(decode_attribute(r2));
    return entries;
  });
  auto events = r.count();
  for (std::uint32_t i = 0; i < events; ++i) s.audit_log.push_back(decode_event(r));
  return s;
}

Bytes LedgerState::serialize() const {
  Writer w;
  encode(w);
  return std::move(w).take();
}

LedgerState genesis_state(const Genesis& genesis) {
  LedgerState s;
  s.group = genesis.group;
  s.admin_pk = genesis.admin_pk;
  s.registrar_pk = genesis.registrar_pk;
  s.actors[genesis.admin_id] = Actor{Role::Admin, genesis.admin_pk, {}, 0, 0};
  s.actors[genesis.registrar_id] = Actor{Role::Registrar, genesis.registrar_pk, {}, 0, 0};
  return s;
}

Digest state_hash(const LedgerState& state) { return sha256(state.serialize()); }

}  // namespace medledger::ledger
