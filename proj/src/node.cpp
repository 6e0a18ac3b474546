#include "medledger/node.hpp"

#include <algorithm>
#include <map>

namespace medledger::net {

using ledger::Block;
using ledger::BlockError;
using ledger::BlockRejection;
using ledger::TransactionEnvelope;

void TipInfo::encode(Writer& w) const { w.u64(height).digest(hash).digest(state_hash); }

TipInfo TipInfo::decode(Reader& r) {
  TipInfo t;
  t.height = r.u64();
  t.hash = r.digest();
  t.state_hash = r.digest();
  return t;
}

namespace {

ledger::Chain load_chain(const ledger::Genesis& genesis, const std::optional<ledger::ChainStore>& store) {
  if (!store || !store->head()) return ledger::Chain(genesis);
  return ledger::Chain::replay_bytes(genesis, store->read_all());
}

}  // namespace

Node::Node(std::string id, ledger::Genesis genesis, std::shared_ptr<blob::BlobStore> blobs,
           std::vector<ValidatorIdentity> identities, std::optional<std::filesystem::path> chain_dir)
    : id_(std::move(id)),
      genesis_(std::move(genesis)),
      blobs_(std::move(blobs)),
      identities_(std::move(identities)),
      store_(chain_dir ? std::optional<ledger::ChainStore>(std::in_place, *chain_dir) : std::nullopt),
      chain_(load_chain(genesis_, store_)) {
  if (store_ && !store_->head()) store_->write_block(chain_.block(0));
  for (const auto& b : chain_.blocks())
    for (const auto& tx : b.txs) committed_ids_.insert(tx.tx_id());
}

void Node::on_fresh_tx(std::function<void(const TransactionEnvelope&)> cb) {
  std::lock_guard lock(mu_);
  fresh_cb_ = std::move(cb);
}

void Node::on_block(std::function<void(const Block&)> cb) {
  std::lock_guard lock(mu_);
  block_cb_ = std::move(cb);
}

SubmitResult Node::submit(const TransactionEnvelope& tx) {
  SubmitResult result;
  result.tx_id = tx.tx_id();
  std::function<void(const TransactionEnvelope&)> cb;
  {
    std::lock_guard lock(mu_);
    if (pool_ids_.contains(result.tx_id) || committed_ids_.contains(result.tx_id)) return result;
    if (pool_.size() >= kMaxPool) {
      result.rejection = contracts::Rejection{contracts::TxError::Malformed, "pool full"};
      return result;
    }
    result.rejection = ledger::admit_tx(chain_.state(), tx, chain_.height() + 1);
    if (result.rejection) return result;
    for (const auto& p : pool_) {
      if (p.sender == tx.sender && p.nonce == tx.nonce) {
        result.rejection = contracts::Rejection{contracts::TxError::BadNonce, "nonce already pending"};
        return result;
      }
    }
    pool_.push_back(tx);
    pool_ids_.insert(result.tx_id);
    result.fresh = true;
    cb = fresh_cb_;
  }
  if (cb) cb(tx);
  return result;
}

void Node::remove_from_pool_locked(const std::set<Digest>& ids) {
  if (ids.empty()) return;
  std::erase_if(pool_, [&](const TransactionEnvelope& tx) { return ids.contains(tx.tx_id()); });
  for (const auto& id : ids) pool_ids_.erase(id);
}

void Node::after_block_locked(const Block& block) {
  if (store_) store_->write_block(block);
  std::set<Digest> gone;
  for (const auto& tx : block.txs) {
    auto id = tx.tx_id();
    committed_ids_.insert(id);
    gone.insert(id);
  }
  // Anything whose nonce is now used can never apply.
  for (const auto& tx : pool_) {
    auto last = ledger::sender_nonce(chain_.state(), tx.sender);
    if (last && tx.nonce <= *last) gone.insert(tx.tx_id());
  }
  remove_from_pool_locked(gone);
}

std::optional<BlockRejection> Node::accept_block(const Block& block) {
  std::function<void(const Block&)> cb;
  {
    std::lock_guard lock(mu_);
    auto h = block.header.height;
    if (h <= chain_.height()) {
      if (chain_.block(h) == block) return std::nullopt;
      return BlockRejection{BlockError::BadLink, 0, "conflicts with block at height " + std::to_string(h)};
    }
    if (auto rejected = chain_.append(block)) return rejected;
    after_block_locked(block);
    cb = block_cb_;
  }
  if (cb) cb(block);
  return std::nullopt;
}

const ValidatorIdentity* Node::scheduled_locked() const {
  const auto& next = ledger::select_proposer(chain_.validators(), chain_.height() + 1).id;
  for (const auto& v : identities_)
    if (v.id == next) return &v;
  return nullptr;
}

bool Node::is_next_proposer() const {
  std::lock_guard lock(mu_);
  return scheduled_locked() != nullptr;
}

std::optional<Block> Node::propose(std::uint64_t timestamp) {
  std::function<void(const Block&)> cb;
  Block block;
  {
    std::lock_guard lock(mu_);
    if (pool_.empty()) return std::nullopt;
    const auto* me = scheduled_locked();
    if (!me) return std::nullopt;
    timestamp = std::max(timestamp, chain_.tip().timestamp);
    auto built = chain_.build_next(pool_, timestamp, me->id, me->key);
    std::set<Digest> dropped;
    for (const auto& [id, why] : built.excluded) dropped.insert(id);
    remove_from_pool_locked(dropped);
    if (built.block.txs.empty()) return std::nullopt;
    block = std::move(built.block);
    if (auto rejected = chain_.append(block))
      throw std::logic_error("own block rejected: " + rejected->str());
    after_block_locked(block);
    cb = block_cb_;
  }
  if (cb) cb(block);
  return block;
}

std::uint64_t Node::height() const {
  std::lock_guard lock(mu_);
  return chain_.height();
}

TipInfo Node::tip() const {
  std::lock_guard lock(mu_);
  return TipInfo{chain_.height(), chain_.tip().hash(), chain_.tip().state_root};
}

Digest Node::state_hash() const {
  std::lock_guard lock(mu_);
  return ledger::state_hash(chain_.state());
}

ledger::LedgerState Node::state() const {
  std::lock_guard lock(mu_);
  return chain_.state();
}

std::optional<Block> Node::block(std::uint64_t height) const {
  std::lock_guard lock(mu_);
  if (height > chain_.height()) return std::nullopt;
  return chain_.block(height);
}

std::vector<Block> Node::blocks() const {
  std::lock_guard lock(mu_);
  return chain_.blocks();
}

std::vector<TransactionEnvelope> Node::pool() const {
  std::lock_guard lock(mu_);
  return pool_;
}

std::size_t Node::pool_size() const {
  std::lock_guard lock(mu_);
  return pool_.size();
}

bool Node::knows_tx(const Digest& tx_id) const {
  std::lock_guard lock(mu_);
  return pool_ids_.contains(tx_id) || committed_ids_.contains(tx_id);
}

WireMessage Node::handle(const WireMessage& request) {
  try {
    return dispatch(request);
  } catch (const DecodeError& e) {
    return error_message(WireErrc::Malformed, e.what());
  } catch (const blob::BlobError& e) {
    return error_message(e.kind() == blob::BlobError::Kind::NotFound ? WireErrc::NotFound
                         : e.kind() == blob::BlobError::Kind::CorruptBlob ? WireErrc::Corrupt
                                                                          : WireErrc::Internal,
                         e.what());
  } catch (const std::exception& e) {
    return error_message(WireErrc::Internal, e.what());
  }
}

WireMessage Node::dispatch(const WireMessage& request) {
  Reader r(request.payload);
  auto reply = [&](MsgKind k, Bytes payload) {
    return WireMessage(response_kind(k), std::move(payload));
  };
  switch (request.kind) {
    case static_cast<std::uint8_t>(MsgKind::SubmitTx): {
      auto tx = TransactionEnvelope::decode(r);
      r.expect_end();
      auto result = submit(tx);
      if (result.rejection) return error_message(WireErrc::Rejected, result.rejection->str());
      Writer w;
      w.digest(result.tx_id);
      return reply(MsgKind::SubmitTx, std::move(w).take());
    }
    case static_cast<std::uint8_t>(MsgKind::GetBlock): {
      auto h = r.u64();
      r.expect_end();
      auto b = block(h);
      if (!b) return error_message(WireErrc::NotFound, "no block at height " + std::to_string(h));
      return reply(MsgKind::GetBlock, b->serialize());
    }
    case static_cast<std::uint8_t>(MsgKind::GetTip): {
      r.expect_end();
      Writer w;
      tip().encode(w);
      return reply(MsgKind::GetTip, std::move(w).take());
    }
    case static_cast<std::uint8_t>(MsgKind::GetState): {
      r.expect_end();
      Writer w;
      {
        std::lock_guard lock(mu_);
        w.u64(chain_.height()).bytes(chain_.state().serialize());
      }
      return reply(MsgKind::GetState, std::move(w).take());
    }
    case static_cast<std::uint8_t>(MsgKind::PutBlob): {
      auto ref = blobs_->put(request.payload);
      Writer w;
      w.digest(ref.hash).u64(ref.size);
      return reply(MsgKind::PutBlob, std::move(w).take());
    }
    case static_cast<std::uint8_t>(MsgKind::GetBlob): {
      auto hash = r.digest();
      r.expect_end();
      return reply(MsgKind::GetBlob, blobs_->get(hash));
    }
    case static_cast<std::uint8_t>(MsgKind::BlockAnnounce): {
      auto block = Block::parse(request.payload);
      std::uint64_t local = height();
      if (block.header.height <= local + 1) {
        if (auto rejected = accept_block(block))
          return error_message(WireErrc::Rejected, rejected->str());
      }
      Writer w;
      w.u64(height());
      return reply(MsgKind::BlockAnnounce, std::move(w).take());
    }
    default:
      return error_message(WireErrc::UnknownKind, "unknown message kind " + std::to_string(request.kind));
  }
}

}  // namespace medledger::net
