#include "medledger/contracts.hpp"

#include <algorithm>

namespace medledger::contracts {

namespace {

using ledger::AccessEvent;
using ledger::AccessRequestEntry;
using ledger::Actor;
using ledger::AttributeEntry;
using ledger::Grant;
using ledger::GrantStatus;
using ledger::RecordMeta;

constexpr std::uint8_t kOpDevice = 1;
constexpr std::uint8_t kOpStream = 2;
constexpr std::uint8_t kOpIssue = 1;
constexpr std::uint8_t kOpRevoke = 2;

Rejection reject(TxError e, std::string detail = {}) { return Rejection{e, std::move(detail)}; }

const Actor* find_actor(const LedgerState& s, const std::string& id) {
  auto it = s.actors.find(id);
  return it == s.actors.end() ? nullptr : &it->second;
}

bool id_taken(const LedgerState& s, const std::string& id) {
  return s.actors.contains(id) || s.devices.contains(id);
}

bool valid_id(const std::string& id) { return !id.empty() && id.size() <= 128; }

bool sender_has_role(const LedgerState& s, const std::string& sender, Role role) {
  auto* a = find_actor(s, sender);
  return a != nullptr && a->role == role;
}

template <typename Body>
Body decode_exact_body(const Bytes& raw) {
  Reader r(raw);
  Body b = Body::decode(r);
  r.expect_end();
  return b;
}

TxOutcome apply_register_actor(LedgerState& s, const TransactionEnvelope& tx, std::uint64_t height,
                               bool commit) {
  auto body = decode_exact_body<RegisterActorBody>(tx.body);
  if (!sender_has_role(s, tx.sender, Role::Admin)) return reject(TxError::WrongSigner, "admin only");
  if (!valid_id(body.actor_id)) return reject(TxError::Malformed, "bad actor id");
  if (id_taken(s, body.actor_id)) return reject(TxError::DuplicateId, body.actor_id);
  if (!body.pre_pk.empty()) {
    try {
      s.params().decode_element(body.pre_pk);
    } catch (const pre::Error&) {
      return reject(TxError::InvalidKey, "pre public key");
    }
  }
  if (commit) {
    s.actors[body.actor_id] = Actor{body.role, body.sig_pk, body.pre_pk, 0, height};
  }
  return std::nullopt;
}

TxOutcome apply_registry(LedgerState& s, const TransactionEnvelope& tx, std::uint64_t height,
                         bool commit) {
  Reader r(tx.body);
  auto body = decode_registry(r);
  r.expect_end();
  if (!sender_has_role(s, tx.sender, Role::Patient))
    return reject(TxError::WrongSigner, "only patients register devices and streams");

  if (auto* dev = std::get_if<RegisterDeviceBody>(&body)) {
    if (!valid_id(dev->device_id)) return reject(TxError::Malformed, "bad device id");
    if (id_taken(s, dev->device_id)) return reject(TxError::DuplicateId, dev->device_id);
    if (commit) s.devices[dev->device_id] = ledger::Device{tx.sender, dev->device_pk, 0, height};
    return std::nullopt;
  }
  const auto& stream = std::get<RegisterStreamBody>(body);
  if (!valid_id(stream.stream_id)) return reject(TxError::Malformed, "bad stream id");
  if (s.streams.contains(stream.stream_id)) return reject(TxError::DuplicateId, stream.stream_id);
  try {
    s.params().decode_element(stream.stream_pk);
  } catch (const pre::Error&) {
    return reject(TxError::InvalidKey, "stream public key");
  }
  if (commit) s.streams[stream.stream_id] = ledger::Stream{tx.sender, stream.stream_pk, height};
  return std::nullopt;
}

const AttributeEntry* active_attribute(const LedgerState& s, const std::string& subject,
                                       const std::string& name) {
  auto it = s.attributes.find(subject);
  if (it == s.attributes.end()) return nullptr;
  for (const auto& e : it->second) {
    if (e.name == name && e.revoked_at == 0) return &e;
  }
  return nullptr;
}

TxOutcome apply_attribute(LedgerState& s, const TransactionEnvelope& tx, std::uint64_t height,
                          bool commit) {
  Reader r(tx.body);
  auto body = decode_attribute_body(r);
  r.expect_end();
  if (!sender_has_role(s, tx.sender, Role::Registrar))
    return reject(TxError::WrongSigner, "registrar only");

  if (auto* issue = std::get_if<IssueAttributeBody>(&body)) {
    const auto& cred = issue->credential;
    if (!policy::valid_attribute_name(cred.name)) return reject(TxError::InvalidAttribute, cred.name);
    if (!policy::verify_credential(s.registrar_pk, cred))
      return reject(TxError::BadCredential, "signature does not verify under genesis registrar");
    if (cred.issued_at > height) return reject(TxError::BadCredential, "issued in the future");
    if (!s.actors.contains(cred.subject)) return reject(TxError::UnknownActor, cred.subject);
    if (active_attribute(s, cred.subject, cred.name))
      return reject(TxError::DuplicateId, cred.subject + " already holds " + cred.name);
    if (commit) {
      s.attributes[cred.subject].push_back(
          AttributeEntry{cred.name, cred.issued_at, height, 0, cred.registrar_sig});
    }
    return std::nullopt;
  }
  const auto& revoke = std::get<RevokeAttributeBody>(body);
  if (!s.actors.contains(revoke.subject)) return reject(TxError::UnknownActor, revoke.subject);
  if (!active_attribute(s, revoke.subject, revoke.name))
    return reject(TxError::UnknownAttribute, revoke.name);
  if (commit) {
    for (auto& e : s.attributes[revoke.subject]) {
      if (e.name == revoke.name && e.revoked_at == 0) e.revoked_at = height;
    }
  }
  return std::nullopt;
}

TxOutcome apply_store_record(LedgerState& s, const TransactionEnvelope& tx, std::uint64_t height,
                             bool commit) {
  auto body = decode_exact_body<StoreRecordBody>(tx.body);
  if (!s.actors.contains(body.owner)) return reject(TxError::UnknownActor, body.owner);
  if (body.device_id.empty()) {
    if (tx.sender != body.owner) return reject(TxError::WrongSigner, "owner must sign");
  } else {
    auto dev = s.devices.find(body.device_id);
    if (dev == s.devices.end()) return reject(TxError::WrongSigner, "unregistered device");
    if (tx.sender != body.device_id && tx.sender != body.owner)
      return reject(TxError::WrongSigner, "device or owner must sign");
    if (dev->second.owner != body.owner)
      return reject(TxError::WrongSigner, "device bound to another patient");
  }
  auto stream = s.streams.find(body.stream_id);
  if (stream == s.streams.end()) return reject(TxError::UnknownStream, body.stream_id);
  if (stream->second.owner != body.owner)
    return reject(TxError::WrongSigner, "stream not owned by " + body.owner);
  if (s.records.contains(body.record_id)) return reject(TxError::DuplicateId, body.record_id.hex());
  if (commit) {
    s.records[body.record_id] = RecordMeta{body.record_id, body.stream_id, body.owner,
                                           body.device_id, body.record_id, body.size, height};
  }
  return std::nullopt;
}

TxOutcome apply_grant(LedgerState& s, const TransactionEnvelope& tx, std::uint64_t height,
                      bool commit) {
  auto body = decode_exact_body<GrantAccessBody>(tx.body);
  auto stream = s.streams.find(body.stream_id);
  if (stream == s.streams.end()) return reject(TxError::UnknownStream, body.stream_id);
  if (stream->second.owner != tx.sender) return reject(TxError::WrongSigner, "not stream owner");
  if (!valid_id(body.grant_id)) return reject(TxError::Malformed, "bad grant id");
  if (s.grants.contains(body.grant_id)) return reject(TxError::DuplicateId, body.grant_id);
  auto* delegatee = find_actor(s, body.delegatee);
  if (!delegatee) return reject(TxError::UnknownActor, body.delegatee);
  if (delegatee->pre_pk.empty()) return reject(TxError::InvalidKey, "delegatee has no PRE key");
  auto* proxy = find_actor(s, body.proxy_id);
  if (!proxy) return reject(TxError::UnknownActor, body.proxy_id);
  if (proxy->role != Role::Proxy) return reject(TxError::InvalidRole, body.proxy_id + " is not a proxy");

  std::string canonical_policy;
  try {
    canonical_policy = policy::print_policy(policy::parse_policy(body.policy));
  } catch (const policy::PolicyError& e) {
    return reject(TxError::InvalidPolicy, e.what());
  }

  const auto& params = s.params();
  try {
    params.decode_scalar(body.rk1);
    pre::parse_wrapped(params, body.wrapped_r);
  } catch (const pre::Error&) {
    return reject(TxError::InvalidKey, "re-encryption key");
  }
  auto stream_pk = params.decode_element(stream->second.stream_pk);
  auto delegatee_pk = params.decode_element(delegatee->pre_pk);
  if (body.from_fp != params.fingerprint(stream_pk) || body.to_fp != params.fingerprint(delegatee_pk))
    return reject(TxError::InvalidKey, "key fingerprints do not match registered keys");

  if (commit) {
    Grant g;
    g.grant_id = body.grant_id;
    g.stream_id = body.stream_id;
    g.delegatee = body.delegatee;
    g.policy = std::move(canonical_policy);
    g.rk1 = body.rk1;
    g.wrapped_r = body.wrapped_r;
    g.from_fp = body.from_fp;
    g.to_fp = body.to_fp;
    g.proxy_id = body.proxy_id;
    g.expiry = body.expiry;
    g.status = GrantStatus::Active;
    g.issued_at = height;
    s.grants[g.grant_id] = std::move(g);
  }
  return std::nullopt;
}

TxOutcome apply_revoke(LedgerState& s, const TransactionEnvelope& tx, std::uint64_t height,
                       bool commit) {
  auto body = decode_exact_body<RevokeAccessBody>(tx.body);
  auto it = s.grants.find(body.grant_id);
  if (it == s.grants.end()) return reject(TxError::UnknownGrant, body.grant_id);
  const auto& stream = s.streams.at(it->second.stream_id);
  if (stream.owner != tx.sender) return reject(TxError::WrongSigner, "not stream owner");
  if (it->second.status == GrantStatus::Revoked) return reject(TxError::AlreadyRevoked, body.grant_id);
  if (commit) {
    it->second.status = GrantStatus::Revoked;
    it->second.revoked_at = height;
  }
  return std::nullopt;
}

TxOutcome apply_request(LedgerState& s, const TransactionEnvelope& tx, std::uint64_t height,
                        bool commit) {
  auto body = decode_exact_body<AccessRequestBody>(tx.body);
  if (!s.actors.contains(tx.sender)) return reject(TxError::UnknownActor, tx.sender);
  if (!valid_id(body.request_id)) return reject(TxError::Malformed, "bad request id");
  if (s.requests.contains(body.request_id)) return reject(TxError::DuplicateId, body.request_id);
  if (!s.grants.contains(body.grant_id)) return reject(TxError::UnknownGrant, body.grant_id);
  if (!s.records.contains(body.record_id)) return reject(TxError::UnknownRecord, body.record_id.hex());
  auto decision = authorize(s, AccessQuery{body.grant_id, body.record_id, tx.sender}, height);
  if (commit) {
    s.requests[body.request_id] = AccessRequestEntry{body.request_id, body.grant_id, body.record_id,
                                                     tx.sender,       height,        decision,
                                                     false};
  }
  return std::nullopt;
}

bool served_failure(DenyReason r) {
  return r == DenyReason::MissingBlob || r == DenyReason::MalformedRecord;
}

TxOutcome apply_log(LedgerState& s, const TransactionEnvelope& tx, std::uint64_t height,
                    bool commit) {
  auto body = decode_exact_body<AccessLogBody>(tx.body);
  auto it = s.requests.find(body.request_id);
  if (it == s.requests.end()) return reject(TxError::UnknownRequest, body.request_id);
  auto& request = it->second;
  if (request.logged) return reject(TxError::DuplicateId, body.request_id);
  const auto& grant = s.grants.at(request.grant_id);
  if (tx.sender != grant.proxy_id) return reject(TxError::WrongSigner, "proxy not named in grant");

  auto now = authorize(s, AccessQuery{request.grant_id, request.record_id, request.requester}, height);
  if (body.decision.is_granted()) {
    if (!body.result_blob_hash) return reject(TxError::LogMismatch, "granted log without result");
    if (!request.decision.is_granted() || !now.is_granted())
      return reject(TxError::LogMismatch, "request is not authorized");
  } else {
    if (body.result_blob_hash) return reject(TxError::LogMismatch, "denied log with result");
    auto reason = *body.decision.denied;
    bool matches = (request.decision.denied == reason) || (now.denied == reason) ||
                   (request.decision.is_granted() && served_failure(reason));
    if (!matches) return reject(TxError::LogMismatch, "denial reason does not match contract");
  }
  if (commit) {
    request.logged = true;
    s.audit_log.push_back(AccessEvent{request.request_id, request.grant_id, request.record_id,
                                      request.requester, body.decision, body.result_blob_hash,
                                      height});
  }
  return std::nullopt;
}

}  // namespace

// --- body encodings ----------------------------------------------------------------

void RegisterActorBody::encode(Writer& w) const {
  w.str(actor_id).u8(static_cast<std::uint8_t>(role)).pubkey(sig_pk).bytes(pre_pk);
}

RegisterActorBody RegisterActorBody::decode(Reader& r) {
  RegisterActorBody b;
  b.actor_id = r.str();
  auto role = r.u8();
  if (role < 1 || role > 6) throw DecodeError("invalid role");
  b.role = static_cast<Role>(role);
  b.sig_pk = r.pubkey();
  b.pre_pk = r.bytes();
  return b;
}

void RegisterDeviceBody::encode(Writer& w) const { w.u8(kOpDevice).str(device_id).pubkey(device_pk); }

void RegisterStreamBody::encode(Writer& w) const { w.u8(kOpStream).str(stream_id).bytes(stream_pk); }

RegistryBody decode_registry(Reader& r) {
  switch (r.u8()) {
    case kOpDevice: {
      RegisterDeviceBody b;
      b.device_id = r.str();
      b.device_pk = r.pubkey();
      return b;
    }
    case kOpStream: {
      RegisterStreamBody b;
      b.stream_id = r.str();
      b.stream_pk = r.bytes();
      return b;
    }
    default:
      throw DecodeError("unknown registry op");
  }
}

void IssueAttributeBody::encode(Writer& w) const {
  w.u8(kOpIssue).str(credential.subject).str(credential.name).u64(credential.issued_at).signature(
      credential.registrar_sig);
}

void RevokeAttributeBody::encode(Writer& w) const { w.u8(kOpRevoke).str(subject).str(name); }

AttributeBody decode_attribute_body(Reader& r) {
  switch (r.u8()) {
    case kOpIssue: {
      IssueAttributeBody b;
      b.credential.subject = r.str();
      b.credential.name = r.str();
      b.credential.issued_at = r.u64();
      b.credential.registrar_sig = r.signature();
      return b;
    }
    case kOpRevoke: {
      RevokeAttributeBody b;
      b.subject = r.str();
      b.name = r.str();
      return b;
    }
    default:
      throw DecodeError("unknown attribute op");
  }
}

void StoreRecordBody::encode(Writer& w) const {
  w.digest(record_id).str(stream_id).str(owner).str(device_id).u64(size);
}

StoreRecordBody StoreRecordBody::decode(Reader& r) {
  StoreRecordBody b;
  b.record_id = r.digest();
  b.stream_id = r.str();
  b.owner = r.str();
  b.device_id = r.str();
  b.size = r.u64();
  return b;
}

void GrantAccessBody::encode(Writer& w) const {
  w.str(grant_id).str(stream_id).str(delegatee).str(policy).bytes(rk1).bytes(wrapped_r);
  w.digest(from_fp).digest(to_fp).str(proxy_id).u64(expiry);
}

GrantAccessBody GrantAccessBody::decode(Reader& r) {
  GrantAccessBody b;
  b.grant_id = r.str();
  b.stream_id = r.str();
  b.delegatee = r.str();
  b.policy = r.str();
  b.rk1 = r.bytes();
  b.wrapped_r = r.bytes();
  b.from_fp = r.digest();
  b.to_fp = r.digest();
  b.proxy_id = r.str();
  b.expiry = r.u64();
  return b;
}

void RevokeAccessBody::encode(Writer& w) const { w.str(grant_id); }

RevokeAccessBody RevokeAccessBody::decode(Reader& r) { return RevokeAccessBody{r.str()}; }

void AccessRequestBody::encode(Writer& w) const { w.str(request_id).str(grant_id).digest(record_id); }

AccessRequestBody AccessRequestBody::decode(Reader& r) {
  AccessRequestBody b;
  b.request_id = r.str();
  b.grant_id = r.str();
  b.record_id = r.digest();
  return b;
}

void AccessLogBody::encode(Writer& w) const {
  w.str(request_id);
  decision.encode(w);
  w.boolean(result_blob_hash.has_value());
  if (result_blob_hash) w.digest(*result_blob_hash);
}

AccessLogBody AccessLogBody::decode(Reader& r) {
  AccessLogBody b;
  b.request_id = r.str();
  b.decision = Decision::decode(r);
  if (r.boolean()) b.result_blob_hash = r.digest();
  return b;
}

// --- errors --------------------------------------------------------------------------

std::string_view to_string(TxError e) {
  switch (e) {
    case TxError::Malformed: return "Malformed";
    case TxError::UnknownSender: return "UnknownSender";
    case TxError::BadSignature: return "BadSignature";
    case TxError::BadNonce: return "BadNonce";
    case TxError::UnknownActor: return "UnknownActor";
    case TxError::WrongSigner: return "WrongSigner";
    case TxError::UnknownStream: return "UnknownStream";
    case TxError::UnknownDevice: return "UnknownDevice";
    case TxError::UnknownRecord: return "UnknownRecord";
    case TxError::UnknownGrant: return "UnknownGrant";
    case TxError::UnknownRequest: return "UnknownRequest";
    case TxError::UnknownAttribute: return "UnknownAttribute";
    case TxError::DuplicateId: return "DuplicateId";
    case TxError::AlreadyRevoked: return "AlreadyRevoked";
    case TxError::InvalidKey: return "InvalidKey";
    case TxError::InvalidRole: return "InvalidRole";
    case TxError::InvalidPolicy: return "InvalidPolicy";
    case TxError::InvalidAttribute: return "InvalidAttribute";
    case TxError::BadCredential: return "BadCredential";
    case TxError::LogMismatch: return "LogMismatch";
  }
  return "Unknown";
}

GrantAccessBody prepare_grant(const pre::GroupParams& params, const pre::Scalar& stream_sk,
                              const pre::Element& delegatee_pk, std::string grant_id, std::string stream_id,
                              std::string delegatee, std::string policy, std::string proxy_id,
                              std::uint64_t expiry, RandomSource& rng) {
  auto rk = pre::rekeygen(params, stream_sk, delegatee_pk, rng);
  GrantAccessBody b;
  b.grant_id = std::move(grant_id);
  b.stream_id = std::move(stream_id);
  b.delegatee = std::move(delegatee);
  b.policy = std::move(policy);
  b.rk1 = params.encode(rk.rk1);
  b.wrapped_r = pre::serialize(params, rk.wrapped_r);
  b.from_fp = rk.from_fp;
  b.to_fp = rk.to_fp;
  b.proxy_id = std::move(proxy_id);
  b.expiry = expiry;
  return b;
}

std::string Rejection::str() const {
  std::string out(to_string(error));
  if (!detail.empty()) out += ": " + detail;
  return out;
}

// --- entry points ----------------------------------------------------------------------

TxOutcome apply_transaction(LedgerState& state, const TransactionEnvelope& tx,
                            std::uint64_t height, bool commit) {
  try {
    switch (tx.kind) {
      case TxKind::RegisterActor: return apply_register_actor(state, tx, height, commit);
      case TxKind::RegisterDevice: return apply_registry(state, tx, height, commit);
      case TxKind::Attribute: return apply_attribute(state, tx, height, commit);
      case TxKind::StoreRecord: return apply_store_record(state, tx, height, commit);
      case TxKind::GrantAccess: return apply_grant(state, tx, height, commit);
      case TxKind::RevokeAccess: return apply_revoke(state, tx, height, commit);
      case TxKind::AccessRequest: return apply_request(state, tx, height, commit);
      case TxKind::AccessLog: return apply_log(state, tx, height, commit);
    }
  } catch (const DecodeError& e) {
    return reject(TxError::Malformed, e.what());
  }
  return reject(TxError::Malformed, "unknown kind");
}

Decision authorize(const LedgerState& state, const AccessQuery& query, std::uint64_t height) {
  const auto& grant = state.grants.at(query.grant_id);
  const auto& record = state.records.at(query.record_id);
  if (grant.status == GrantStatus::Revoked) return Decision::deny(DenyReason::Revoked);
  if (grant.expiry != 0 && height > grant.expiry) return Decision::deny(DenyReason::Expired);
  if (query.requester != grant.delegatee) return Decision::deny(DenyReason::NotDelegatee);
  if (record.stream_id != grant.stream_id) return Decision::deny(DenyReason::WrongStream);
  auto formula = policy::parse_policy(grant.policy);
  auto attrs = policy::collect_attributes(state, query.requester, height);
  if (!policy::eval_policy(formula, attrs)) return Decision::deny(DenyReason::PolicyUnsatisfied);
  return Decision::granted();
}

std::vector<ledger::Grant> query_grants(const LedgerState& state, const std::string& actor) {
  std::vector<Grant> out;
  for (const auto& [id, g] : state.grants) {
    auto stream = state.streams.find(g.stream_id);
    bool owner = stream != state.streams.end() && stream->second.owner == actor;
    if (owner || g.delegatee == actor || g.proxy_id == actor) out.push_back(g);
  }
  return out;
}

std::vector<ledger::AccessEvent> query_audit(const LedgerState& state, const AuditFilter& filter) {
  std::vector<AccessEvent> out;
  for (const auto& e : state.audit_log) {
    if (filter.decision == AuditFilter::DecisionFilter::Granted && !e.decision.is_granted()) continue;
    if (filter.decision == AuditFilter::DecisionFilter::Denied && e.decision.is_granted()) continue;
    if (filter.grant_id && e.grant_id != *filter.grant_id) continue;
    if (filter.requester && e.requester != *filter.requester) continue;
    if (filter.request_id && e.request_id != *filter.request_id) continue;
    out.push_back(e);
  }
  // Appended in block order already; keep it explicit for callers.
  std::stable_sort(out.begin(), out.end(),
                   [](const AccessEvent& a, const AccessEvent& b) { return a.height < b.height; });
  return out;
}

std::vector<ledger::RecordMeta> query_records(const LedgerState& state, const std::string& stream) {
  std::vector<RecordMeta> out;
  for (const auto& [id, m] : state.records) {
    if (m.stream_id == stream) out.push_back(m);
  }
  std::stable_sort(out.begin(), out.end(), [](const RecordMeta& a, const RecordMeta& b) {
    return a.created_at < b.created_at;
  });
  return out;
}

}  // namespace medledger::contracts
