#pragma once

// Client side of the wire protocol. Every transport implements call(); the
// typed helpers and inclusion waiting are shared.

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>

#include "medledger/blob_store.hpp"
#include "medledger/chain.hpp"
#include "medledger/node.hpp"
#include "medledger/wire.hpp"

namespace medledger::net {

/// The node answered with an Error message (or an unexpected kind). For
/// rejected transactions `reason` is the contract error name, e.g. "DuplicateId".
class RequestFailed : public std::runtime_error {
 public:
  RequestFailed(WireErrc code, std::string detail);

  WireErrc code() const { return code_; }
  const std::string& detail() const { return detail_; }
  std::string reason() const;

 private:
  WireErrc code_;
  std::string detail_;
};

struct NotIncluded : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class NodeClient {
 public:
  virtual ~NodeClient() = default;

  /// One request/response round trip.
  virtual WireMessage call(const WireMessage& request) = 0;
  /// Gives the network a chance to make progress before the next poll.
  virtual void settle() = 0;

  Digest submit(const ledger::TransactionEnvelope& tx);
  TipInfo tip();
  ledger::Block block(std::uint64_t height);
  ledger::LedgerState state();
  blob::BlobRef put_blob(ByteView data);
  Bytes get_blob(const Digest& hash);

  /// Polls until `tx_id` is in a block and returns that height. Throws
  /// NotIncluded after `max_polls` settles.
  std::uint64_t wait_for(const Digest& tx_id, int max_polls = 400);
  /// submit + wait_for.
  std::uint64_t commit(const ledger::TransactionEnvelope& tx, int max_polls = 400);

  /// Next free nonce for `sender` according to committed state.
  std::uint64_t next_nonce(const std::string& sender);

 private:
  WireMessage expect(const WireMessage& request, MsgKind kind);

  std::uint64_t scanned_ = 0;
  std::map<Digest, std::uint64_t> included_;
};

/// Talks to a node in the same process; messages still go through the frame
/// codec. With `auto_seal`, settle() asks the node to propose right away,
/// which gives single-process deployments immediate finality.
class DirectClient final : public NodeClient {
 public:
  DirectClient(Node& node, bool auto_seal, std::function<std::uint64_t()> clock = {});

  WireMessage call(const WireMessage& request) override;
  void settle() override;

 private:
  Node& node_;
  bool auto_seal_;
  std::function<std::uint64_t()> clock_;
};

/// BlobStore view over a node's PutBlob/GetBlob. Reads are re-hashed here as
/// well, so a lying node is caught.
class RemoteBlobStore final : public blob::BlobStore {
 public:
  explicit RemoteBlobStore(NodeClient& client) : client_(client) {}

  blob::BlobRef put(ByteView data) override;
  Bytes get(const Digest& hash) const override;
  bool has(const Digest& hash) const override;

 private:
  NodeClient& client_;
};

}  // namespace medledger::net

namespace medledger::net {

struct SyncResult {
  std::uint64_t applied = 0;
  std::uint64_t height = 0;  // local height afterwards
  std::optional<std::pair<std::uint64_t, ledger::BlockRejection>> failure;
};

/// Pulls blocks tip+1 .. peer tip in order, validating each. Stops at the
/// first block that does not validate, leaving the valid prefix applied.
SyncResult sync(Node& node, NodeClient& peer);

}  // namespace medledger::net
