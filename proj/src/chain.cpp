#include "medledger/chain.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <list>

namespace medledger::ledger {

namespace fs = std::filesystem;
using contracts::Rejection;
using contracts::TxError;
using contracts::TxOutcome;

namespace {

struct SenderKey {
  SigPublicKey key;
  std::uint64_t nonce;
};

std::optional<SenderKey> lookup_sender(const LedgerState& s, const std::string& sender) {
  if (auto a = s.actors.find(sender); a != s.actors.end()) return SenderKey{a->second.sig_pk, a->second.nonce};
  if (auto d = s.devices.find(sender); d != s.devices.end())
    return SenderKey{d->second.sig_pk, d->second.nonce};
  return std::nullopt;
}

void bump_nonce(LedgerState& s, const std::string& sender, std::uint64_t nonce) {
  if (auto a = s.actors.find(sender); a != s.actors.end()) {
    a->second.nonce = nonce;
  } else if (auto d = s.devices.find(sender); d != s.devices.end()) {
    d->second.nonce = nonce;
  }
}

Bytes read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file_atomic(const fs::path& p, ByteView data) {
  auto tmp = p;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
    if (!out) throw std::runtime_error("short write " + tmp.string());
  }
  fs::rename(tmp, p);
}

}  // namespace

void BlockHeader::encode(Writer& w) const {
  w.u64(height).digest(prev_hash).u64(timestamp).str(proposer_id).digest(tx_root).digest(state_root);
}

BlockHeader BlockHeader::decode(Reader& r) {
  BlockHeader h;
  h.height = r.u64();
  h.prev_hash = r.digest();
  h.timestamp = r.u64();
  h.proposer_id = r.str();
  h.tx_root = r.digest();
  h.state_root = r.digest();
  return h;
}

Digest BlockHeader::hash() const {
  Writer w;
  encode(w);
  return sha256(w.data());
}

void Block::encode(Writer& w) const {
  header.encode(w);
  w.count(txs.size());
  for (const auto& tx : txs) tx.encode(w);
  w.signature(proposer_sig);
}

Block Block::decode(Reader& r) {
  Block b;
  b.header = BlockHeader::decode(r);
  auto n = r.count(1 + 4 + 4 + 8 + 64);
  if (n > kMaxBlockTxs) throw DecodeError("too many transactions");
  b.txs.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) b.txs.push_back(TransactionEnvelope::decode(r));
  b.proposer_sig = r.signature();
  return b;
}

Bytes Block::serialize() const {
  Writer w;
  encode(w);
  return std::move(w).take();
}

Block Block::parse(ByteView raw) { return decode_exact<Block>(raw); }

Digest compute_tx_root(const std::vector<TransactionEnvelope>& txs) {
  Writer w;
  w.str("medledger/v1/txs").count(txs.size());
  for (const auto& tx : txs) tx.encode(w);
  return sha256(w.data());
}

Bytes block_signing_bytes(const BlockHeader& header) {
  Writer w;
  w.str("medledger/v1/block").digest(header.hash());
  return std::move(w).take();
}

Block genesis_block(const Genesis& genesis) {
  Block b;
  b.header.height = 0;
  b.header.prev_hash = Digest::zero();
  b.header.timestamp = genesis.timestamp;
  b.header.proposer_id = genesis.validators.empty() ? std::string() : genesis.validators.front().id;
  b.header.tx_root = compute_tx_root({});
  b.header.state_root = state_hash(genesis_state(genesis));
  return b;
}

const Validator& select_proposer(const std::vector<Validator>& validators, std::uint64_t height) {
  if (validators.empty()) throw std::logic_error("empty validator set");
  return validators[height % validators.size()];
}

std::optional<std::uint64_t> sender_nonce(const LedgerState& state, const std::string& sender) {
  auto s = lookup_sender(state, sender);
  if (!s) return std::nullopt;
  return s->nonce;
}

namespace {

// Records may only be signed by a registered device or the owner, so an
// unknown signer there is reported as the wrong signer.
Rejection unknown_sender(const TransactionEnvelope& tx) {
  if (tx.kind == TxKind::StoreRecord) return Rejection{TxError::WrongSigner, "unregistered signer " + tx.sender};
  return Rejection{TxError::UnknownSender, tx.sender};
}

}  // namespace

TxOutcome apply_tx(LedgerState& state, const TransactionEnvelope& tx, std::uint64_t height,
                   bool commit) {
  auto sender = lookup_sender(state, tx.sender);
  if (!sender) return unknown_sender(tx);
  if (!verify(sender->key, tx.signing_bytes(), tx.signature))
    return Rejection{TxError::BadSignature, tx.sender};
  if (tx.nonce != sender->nonce + 1)
    return Rejection{TxError::BadNonce, "expected " + std::to_string(sender->nonce + 1) + ", got " +
                                            std::to_string(tx.nonce)};
  if (auto rejected = contracts::apply_transaction(state, tx, height, commit)) return rejected;
  if (commit) bump_nonce(state, tx.sender, tx.nonce);
  return std::nullopt;
}

TxOutcome admit_tx(const LedgerState& state, const TransactionEnvelope& tx, std::uint64_t height) {
  auto sender = lookup_sender(state, tx.sender);
  if (!sender) return unknown_sender(tx);
  if (!verify(sender->key, tx.signing_bytes(), tx.signature))
    return Rejection{TxError::BadSignature, tx.sender};
  if (tx.nonce <= sender->nonce)
    return Rejection{TxError::BadNonce, "nonce " + std::to_string(tx.nonce) + " already used"};
  // apply_transaction with commit=false never mutates.
  return contracts::apply_transaction(const_cast<LedgerState&>(state), tx, height, false);
}

std::string_view to_string(BlockError e) {
  switch (e) {
    case BlockError::Malformed: return "Malformed";
    case BlockError::BadLink: return "BadLink";
    case BlockError::WrongProposer: return "WrongProposer";
    case BlockError::BadSignature: return "BadSignature";
    case BlockError::BadTimestamp: return "BadTimestamp";
    case BlockError::TooManyTxs: return "TooManyTxs";
    case BlockError::BadTxRoot: return "BadTxRoot";
    case BlockError::BadTx: return "BadTx";
    case BlockError::BadStateRoot: return "BadStateRoot";
  }
  return "Unknown";
}

std::string BlockRejection::str() const {
  std::string out(to_string(error));
  if (error == BlockError::BadTx) out += "(" + std::to_string(tx_index) + ", " + cause + ")";
  else if (!cause.empty()) out += ": " + cause;
  return out;
}

BuildResult build_block(const LedgerState& parent_state, const BlockHeader& parent,
                        const std::vector<TransactionEnvelope>& pending, std::uint64_t timestamp,
                        const std::vector<Validator>& validators, const std::string& proposer,
                        const SigSecretKey& proposer_key) {
  const std::uint64_t height = parent.height + 1;
  if (select_proposer(validators, height).id != proposer)
    throw WrongProposer(proposer + " is not the proposer for height " + std::to_string(height));

  BuildResult out;
  out.state = parent_state;
  std::list<const TransactionEnvelope*> remaining;
  for (const auto& tx : pending) remaining.push_back(&tx);

  // Repeated passes so a sender's transactions can arrive out of nonce order.
  bool progress = true;
  while (progress && out.block.txs.size() < kMaxBlockTxs) {
    progress = false;
    for (auto it = remaining.begin(); it != remaining.end() && out.block.txs.size() < kMaxBlockTxs;) {
      const auto& tx = **it;
      auto nonce = sender_nonce(out.state, tx.sender);
      if (nonce && tx.nonce > *nonce + 1) {
        ++it;
        continue;
      }
      if (auto rejected = apply_tx(out.state, tx, height, true)) {
        out.excluded.emplace_back(tx.tx_id(), *rejected);
      } else {
        out.block.txs.push_back(tx);
        progress = true;
      }
      it = remaining.erase(it);
    }
  }
  for (const auto* tx : remaining) out.deferred.push_back(tx->tx_id());

  auto& h = out.block.header;
  h.height = height;
  h.prev_hash = parent.hash();
  h.timestamp = std::max(timestamp, parent.timestamp);
  h.proposer_id = proposer;
  h.tx_root = compute_tx_root(out.block.txs);
  h.state_root = state_hash(out.state);
  out.block.proposer_sig = sign(proposer_key, block_signing_bytes(h));
  return out;
}

ValidationResult validate_block(const LedgerState& parent_state, const BlockHeader& parent,
                                const Block& block, const std::vector<Validator>& validators) {
  ValidationResult out;
  const auto& h = block.header;
  auto fail = [&out](BlockError e, std::string cause = {}, std::size_t index = 0) {
    out.rejection = BlockRejection{e, index, std::move(cause)};
    return std::move(out);
  };
  if (h.height != parent.height + 1 || h.prev_hash != parent.hash())
    return fail(BlockError::BadLink, "does not extend height " + std::to_string(parent.height));
  const auto& expected = select_proposer(validators, h.height);
  if (h.proposer_id != expected.id)
    return fail(BlockError::WrongProposer, "expected " + expected.id + ", got " + h.proposer_id);
  if (!verify(expected.sig_pk, block_signing_bytes(h), block.proposer_sig))
    return fail(BlockError::BadSignature);
  if (h.timestamp < parent.timestamp) return fail(BlockError::BadTimestamp);
  if (block.txs.size() > kMaxBlockTxs) return fail(BlockError::TooManyTxs);
  if (compute_tx_root(block.txs) != h.tx_root) return fail(BlockError::BadTxRoot);

  out.state = parent_state;
  for (std::size_t i = 0; i < block.txs.size(); ++i) {
    if (auto rejected = apply_tx(out.state, block.txs[i], h.height, true))
      return fail(BlockError::BadTx, rejected->str(), i);
  }
  if (state_hash(out.state) != h.state_root) return fail(BlockError::BadStateRoot);
  return out;
}

BadChain::BadChain(std::uint64_t h, BlockRejection r)
    : std::runtime_error("bad chain at height " + std::to_string(h) + ": " + r.str()),
      height(h),
      reason(std::move(r)) {}

Chain::Chain(Genesis genesis) : genesis_(std::move(genesis)) {
  if (genesis_.validators.empty()) throw std::invalid_argument("genesis needs at least one validator");
  for (std::size_t i = 0; i < genesis_.validators.size(); ++i) {
    for (std::size_t j = i + 1; j < genesis_.validators.size(); ++j) {
      if (genesis_.validators[i].id == genesis_.validators[j].id)
        throw std::invalid_argument("duplicate validator id " + genesis_.validators[i].id);
    }
  }
  blocks_.push_back(genesis_block(genesis_));
  state_ = genesis_state(genesis_);
}

std::optional<BlockRejection> Chain::append(const Block& block) {
  auto result = validate_block(state_, tip(), block, genesis_.validators);
  if (!result.accepted()) return result.rejection;
  state_ = std::move(result.state);
  blocks_.push_back(block);
  return std::nullopt;
}

BuildResult Chain::build_next(const std::vector<TransactionEnvelope>& pending,
                              std::uint64_t timestamp, const std::string& proposer,
                              const SigSecretKey& key) const {
  return build_block(state_, tip(), pending, timestamp, genesis_.validators, proposer, key);
}

Chain Chain::replay(const Genesis& genesis, const std::vector<Block>& blocks) {
  Chain chain(genesis);
  std::size_t start = 0;
  if (!blocks.empty() && blocks.front().header.height == 0) {
    if (!(blocks.front() == chain.blocks_.front()))
      throw BadChain(0, BlockRejection{BlockError::BadLink, 0, "genesis block mismatch"});
    start = 1;
  }
  for (std::size_t i = start; i < blocks.size(); ++i) {
    if (auto rejected = chain.append(blocks[i])) throw BadChain(chain.height() + 1, *rejected);
  }
  return chain;
}

Chain Chain::replay_bytes(const Genesis& genesis, const std::vector<Bytes>& raw) {
  std::vector<Block> blocks;
  blocks.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    try {
      blocks.push_back(Block::parse(raw[i]));
    } catch (const DecodeError& e) {
      // Heights are positional when the bytes cannot be trusted.
      auto chain = replay(genesis, blocks);
      throw BadChain(chain.height() + 1, BlockRejection{BlockError::Malformed, 0, e.what()});
    }
  }
  return replay(genesis, blocks);
}

ChainStore::ChainStore(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

fs::path ChainStore::block_path(std::uint64_t height) const {
  char name[16];
  std::snprintf(name, sizeof(name), "%08llu", static_cast<unsigned long long>(height));
  return dir_ / name;
}

void ChainStore::write_block(const Block& block) {
  write_file_atomic(block_path(block.header.height), block.serialize());
  auto head = std::to_string(block.header.height);
  write_file_atomic(dir_ / "HEAD", to_bytes(head + "\n"));
}

std::optional<std::uint64_t> ChainStore::head() const {
  auto p = dir_ / "HEAD";
  if (!fs::exists(p)) return std::nullopt;
  auto raw = medledger::to_string(read_file(p));
  try {
    return std::stoull(raw);
  } catch (const std::exception&) {
    throw std::runtime_error("corrupt HEAD file");
  }
}

std::vector<Bytes> ChainStore::read_all() const {
  std::vector<Bytes> out;
  auto tip = head();
  if (!tip) return out;
  for (std::uint64_t h = 0; h <= *tip; ++h) {
    auto p = block_path(h);
    if (!fs::exists(p)) break;
    out.push_back(read_file(p));
  }
  return out;
}

void write_genesis(const fs::path& file, const Genesis& genesis) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  write_file_atomic(file, genesis.serialize());
}

Genesis read_genesis(const fs::path& file) { return decode_exact<Genesis>(read_file(file)); }

}  // namespace medledger::ledger
