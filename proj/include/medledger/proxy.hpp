#pragma once

// The re-encryption agent. It polls the chain for access requests naming it,
// re-encrypts the sealed record's encapsulation with the grant's rk1, stores
// the result and posts a signed AccessLog. It never holds a secret key or a
// data-encryption key: the AEAD body is copied through untouched.

#include <atomic>
#include <chrono>
#include <functional>
#include <string>
#include <vector>

#include "medledger/blob_store.hpp"
#include "medledger/client.hpp"
#include "medledger/contracts.hpp"

namespace medledger::proxy {

using ledger::AccessRequestEntry;
using ledger::LedgerState;

/// Unlogged requests for `proxy_id` that are authorized both as recorded and
/// at `height`.
std::vector<AccessRequestEntry> scan(const LedgerState& state, const std::string& proxy_id,
                                     std::uint64_t height);

/// Unlogged requests for `proxy_id` that are denied, paired with the reason
/// to log (the current denial when there is one).
std::vector<std::pair<AccessRequestEntry, ledger::DenyReason>> scan_denied(
    const LedgerState& state, const std::string& proxy_id, std::uint64_t height);

/// What serving one request produced: the log body plus the stored result,
/// if any.
struct Served {
  contracts::AccessLogBody log;
  std::optional<blob::BlobRef> result;
};

/// Re-encrypts and stores the result. Blob failures become DENIED(MissingBlob)
/// or DENIED(MalformedRecord).
Served serve(const LedgerState& state, const AccessRequestEntry& request, blob::BlobStore& blobs);

struct RoundReport {
  std::size_t granted = 0;
  std::size_t denied = 0;
  std::size_t skipped = 0;  // submissions the node refused (already logged, nonce race)
  std::vector<Digest> tx_ids;
};

struct ProxyOptions {
  std::size_t max_per_round = 0;  // 0 = unlimited
  bool wait_for_inclusion = true;
  bool keep_transcript = false;   // record every byte string handled, for tests
};

class ProxyService {
 public:
  ProxyService(std::string proxy_id, SigSecretKey key, net::NodeClient& node, blob::BlobStore& blobs,
               ProxyOptions options = {});

  const std::string& id() const { return id_; }

  /// One poll: scan, serve, submit. Safe to repeat after a crash at any
  /// point because the contract refuses a second log for a request.
  RoundReport run_once();
  /// Polls every `interval` until `stop` is set.
  void run_loop(std::chrono::milliseconds interval, const std::atomic<bool>& stop,
                const std::function<void(const RoundReport&)>& on_round = {});

  /// Every byte string the service touched (sealed inputs, results, grant
  /// material), when keep_transcript is on.
  const std::vector<Bytes>& transcript() const { return transcript_; }

 private:
  std::string id_;
  SigSecretKey key_;
  net::NodeClient& node_;
  blob::BlobStore& blobs_;
  ProxyOptions options_;
  std::vector<Bytes> transcript_;
};

}  // namespace medledger::proxy
