#pragma once

// Hash-linked, validator-signed blocks; round-robin proposal; validation and
// deterministic replay.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "medledger/contracts.hpp"
#include "medledger/state.hpp"
#include "medledger/transaction.hpp"

namespace medledger::ledger {

inline constexpr std::size_t kMaxBlockTxs = 1024;

struct BlockHeader {
  std::uint64_t height = 0;
  Digest prev_hash;
  std::uint64_t timestamp = 0;
  std::string proposer_id;
  Digest tx_root;
  Digest state_root;

  void encode(Writer& w) const;
  static BlockHeader decode(Reader& r);
  Digest hash() const;
  bool operator==(const BlockHeader&) const = default;
};

struct Block {
  BlockHeader header;
  std::vector<TransactionEnvelope> txs;
  Signature proposer_sig;

  Digest hash() const { return header.hash(); }
  void encode(Writer& w) const;
  static Block decode(Reader& r);
  Bytes serialize() const;
  static Block parse(ByteView raw);
  bool operator==(const Block&) const = default;
};

Digest compute_tx_root(const std::vector<TransactionEnvelope>& txs);
Bytes block_signing_bytes(const BlockHeader& header);

/// Deterministic height-0 block derived from the genesis configuration. It
/// carries no signature.
Block genesis_block(const Genesis& genesis);

const Validator& select_proposer(const std::vector<Validator>& validators, std::uint64_t height);

/// Envelope checks (registered sender, signature, next nonce) followed by the
/// contract transition. With commit=true the sender nonce advances as well.
contracts::TxOutcome apply_tx(LedgerState& state, const TransactionEnvelope& tx,
                              std::uint64_t height, bool commit = true);

/// Admission check for a pool: like apply_tx with commit=false but accepts
/// any nonce above the sender's current one.
contracts::TxOutcome admit_tx(const LedgerState& state, const TransactionEnvelope& tx,
                              std::uint64_t height);

std::optional<std::uint64_t> sender_nonce(const LedgerState& state, const std::string& sender);

enum class BlockError {
  Malformed,
  BadLink,
  WrongProposer,
  BadSignature,
  BadTimestamp,
  TooManyTxs,
  BadTxRoot,
  BadTx,
  BadStateRoot,
};

std::string_view to_string(BlockError e);

struct BlockRejection {
  BlockError error;
  std::size_t tx_index = 0;
  std::string cause;

  std::string str() const;
};

struct WrongProposer : std::logic_error {
  using std::logic_error::logic_error;
};

struct BuildResult {
  Block block;
  LedgerState state;
  std::vector<std::pair<Digest, contracts::Rejection>> excluded;
  std::vector<Digest> deferred;  // nonce gaps; may apply later
};

/// Builds and signs the block at parent.height + 1. Invalid transactions are
/// left out; throws WrongProposer when `proposer` is not scheduled.
BuildResult build_block(const LedgerState& parent_state, const BlockHeader& parent,
                        const std::vector<TransactionEnvelope>& pending, std::uint64_t timestamp,
                        const std::vector<Validator>& validators, const std::string& proposer,
                        const SigSecretKey& proposer_key);

struct ValidationResult {
  std::optional<BlockRejection> rejection;
  LedgerState state;  // post-state when accepted

  bool accepted() const { return !rejection; }
};

ValidationResult validate_block(const LedgerState& parent_state, const BlockHeader& parent,
                                const Block& block, const std::vector<Validator>& validators);

struct BadChain : std::runtime_error {
  BadChain(std::uint64_t height, BlockRejection reason);
  std::uint64_t height;
  BlockRejection reason;
};

/// In-memory chain: the genesis block plus every accepted block, with the
/// materialized state at the tip.
class Chain {
 public:
  explicit Chain(Genesis genesis);

  const Genesis& genesis() const { return genesis_; }
  const LedgerState& state() const { return state_; }
  const std::vector<Validator>& validators() const { return genesis_.validators; }
  const BlockHeader& tip() const { return blocks_.back().header; }
  std::uint64_t height() const { return tip().height; }
  const Block& block(std::uint64_t height) const { return blocks_.at(height); }
  const std::vector<Block>& blocks() const { return blocks_; }

  /// Validates against the tip and applies on success.
  std::optional<BlockRejection> append(const Block& block);

  BuildResult build_next(const std::vector<TransactionEnvelope>& pending, std::uint64_t timestamp,
                         const std::string& proposer, const SigSecretKey& key) const;

  /// `blocks` start at height 1 (a leading genesis block is also accepted if
  /// it matches). Throws BadChain at the first invalid block.
  static Chain replay(const Genesis& genesis, const std::vector<Block>& blocks);
  /// Same, from raw block encodings; undecodable input is Malformed.
  static Chain replay_bytes(const Genesis& genesis, const std::vector<Bytes>& blocks);

 private:
  Genesis genesis_;
  std::vector<Block> blocks_;
  LedgerState state_;
};

/// One file per block named by its 8-digit zero-padded height, plus HEAD.
class ChainStore {
 public:
  explicit ChainStore(std::filesystem::path dir);

  void write_block(const Block& block);
  /// Raw bytes for heights 0..HEAD; missing files end the list early.
  std::vector<Bytes> read_all() const;
  std::optional<std::uint64_t> head() const;
  std::filesystem::path block_path(std::uint64_t height) const;

 private:
  std::filesystem::path dir_;
};

void write_genesis(const std::filesystem::path& file, const Genesis& genesis);
Genesis read_genesis(const std::filesystem::path& file);

}  // namespace medledger::ledger
