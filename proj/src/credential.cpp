#include "medledger/credential.hpp"

#include "medledger/codec.hpp"
#include "medledger/state.hpp"

namespace medledger::policy {

Bytes credential_message(std::string_view subject, std::string_view name, std::uint64_t issued_at) {
  Writer w;
  w.str("medledger/v1/attribute").str(subject).str(name).u64(issued_at);
  return std::move(w).take();
}

Attribute issue_credential(const SigSecretKey& registrar_sk, std::string subject, std::string name,
                           std::uint64_t height) {
  if (!valid_attribute_name(name)) throw InvalidAttribute("invalid attribute name: '" + name + "'");
  Attribute a;
  a.registrar_sig = sign(registrar_sk, credential_message(subject, name, height));
  a.name = std::move(name);
  a.subject = std::move(subject);
  a.issued_at = height;
  return a;
}

bool verify_credential(const SigPublicKey& registrar_pk, const Attribute& attr) {
  if (!valid_attribute_name(attr.name)) return false;
  return verify(registrar_pk, credential_message(attr.subject, attr.name, attr.issued_at),
                attr.registrar_sig);
}

AttributeSet collect_attributes(const ledger::LedgerState& state, const std::string& actor_id,
                                std::uint64_t height) {
  if (!state.actors.contains(actor_id)) throw UnknownActor("unknown actor: " + actor_id);
  AttributeSet out;
  auto it = state.attributes.find(actor_id);
  if (it == state.attributes.end()) return out;
  for (const auto& entry : it->second) {
    if (entry.applied_at > height) continue;
    if (entry.revoked_at != 0 && entry.revoked_at <= height) continue;
    out.insert(entry.name);
  }
  return out;
}

}  // namespace medledger::policy
