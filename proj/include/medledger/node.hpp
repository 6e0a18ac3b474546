#pragma once

// A ledger node: chain, transaction pool and blob store behind the wire
// protocol. Transports (simulated or TCP) and gossip live outside; they hook
// in through the fresh-tx and block callbacks.

#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "medledger/blob_store.hpp"
#include "medledger/chain.hpp"
#include "medledger/wire.hpp"

namespace medledger::net {

struct ValidatorIdentity {
  std::string id;
  SigSecretKey key;
};

struct SubmitResult {
  Digest tx_id;
  bool fresh = false;  // newly pooled, as opposed to already known
  contracts::TxOutcome rejection;
};

struct TipInfo {
  std::uint64_t height = 0;
  Digest hash;
  Digest state_hash;

  void encode(Writer& w) const;
  static TipInfo decode(Reader& r);
};

class Node {
 public:
  static constexpr std::size_t kMaxPool = 100'000;

  /// `identities` are the validator keys this node may propose with
  /// (usually one; a single-process deployment holds all). With
  /// `chain_dir`, accepted blocks are persisted there and any chain already
  /// present is replayed on start.
  Node(std::string id, ledger::Genesis genesis, std::shared_ptr<blob::BlobStore> blobs,
       std::vector<ValidatorIdentity> identities = {},
       std::optional<std::filesystem::path> chain_dir = std::nullopt);

  const std::string& id() const { return id_; }
  const ledger::Genesis& genesis() const { return genesis_; }
  blob::BlobStore& blobs() { return *blobs_; }

  /// Never throws; malformed input yields an Error message.
  WireMessage handle(const WireMessage& request);

  SubmitResult submit(const ledger::TransactionEnvelope& tx);
  /// Validates and appends the block at tip+1. A block already in the chain
  /// is accepted silently; anything else out of order is BadLink.
  std::optional<ledger::BlockRejection> accept_block(const ledger::Block& block);
  /// Builds, applies and returns a block when this node is the scheduled
  /// proposer and at least one pooled transaction applies.
  std::optional<ledger::Block> propose(std::uint64_t timestamp);

  bool is_next_proposer() const;
  std::uint64_t height() const;
  TipInfo tip() const;
  Digest state_hash() const;
  ledger::LedgerState state() const;
  std::optional<ledger::Block> block(std::uint64_t height) const;
  std::vector<ledger::Block> blocks() const;
  std::vector<ledger::TransactionEnvelope> pool() const;
  std::size_t pool_size() const;
  bool knows_tx(const Digest& tx_id) const;

  void on_fresh_tx(std::function<void(const ledger::TransactionEnvelope&)> cb);
  void on_block(std::function<void(const ledger::Block&)> cb);

 private:
  WireMessage dispatch(const WireMessage& request);
  void after_block_locked(const ledger::Block& block);
  void remove_from_pool_locked(const std::set<Digest>& ids);

  std::string id_;
  ledger::Genesis genesis_;
  std::shared_ptr<blob::BlobStore> blobs_;
  const ValidatorIdentity* scheduled_locked() const;

  std::vector<ValidatorIdentity> identities_;
  std::optional<ledger::ChainStore> store_;

  mutable std::mutex mu_;
  ledger::Chain chain_;
  std::vector<ledger::TransactionEnvelope> pool_;
  std::set<Digest> pool_ids_;
  std::set<Digest> committed_ids_;

  std::function<void(const ledger::TransactionEnvelope&)> fresh_cb_;
  std::function<void(const ledger::Block&)> block_cb_;
};

}  // namespace medledger::net
