#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include "medledger/policy.hpp"
#include "medledger/primitives.hpp"

namespace medledger::ledger {
struct LedgerState;
}

namespace medledger::policy {

/// Registrar-signed statement that `subject` holds attribute `name`.
struct Attribute {
  std::string name;
  std::string subject;
  std::uint64_t issued_at = 0;
  Signature registrar_sig;

  bool operator==(const Attribute&) const = default;
};

struct InvalidAttribute : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Exact bytes covered by the registrar signature.
Bytes credential_message(std::string_view subject, std::string_view name, std::uint64_t issued_at);

Attribute issue_credential(const SigSecretKey& registrar_sk, std::string subject, std::string name,
                           std::uint64_t height);
bool verify_credential(const SigPublicKey& registrar_pk, const Attribute& attr);

struct UnknownActor : std::out_of_range {
  using std::out_of_range::out_of_range;
};

/// Attributes applied on-chain at or below `height` and not revoked by then.
AttributeSet collect_attributes(const ledger::LedgerState& state, const std::string& actor_id,
                                std::uint64_t height);

}  // namespace medledger::policy
