#include "medledger/client.hpp"

#include <chrono>

namespace medledger::net {

RequestFailed::RequestFailed(WireErrc code, std::string detail)
    : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code), detail_(std::move(detail)) {}

std::string RequestFailed::reason() const {
  auto colon = detail_.find(':');
  return colon == std::string::npos ? detail_ : detail_.substr(0, colon);
}

WireMessage NodeClient::expect(const WireMessage& request, MsgKind kind) {
  auto response = call(request);
  if (auto err = parse_error(response)) throw RequestFailed(err->code, err->detail);
  if (!response.is(kind))
    throw RequestFailed(WireErrc::Malformed, "unexpected response kind " + std::to_string(response.kind));
  return response;
}

Digest NodeClient::submit(const ledger::TransactionEnvelope& tx) {
  auto resp = expect(WireMessage(MsgKind::SubmitTx, tx.serialize()), MsgKind::SubmitTxResp);
  Reader r(resp.payload);
  auto id = r.digest();
  r.expect_end();
  return id;
}

TipInfo NodeClient::tip() {
  auto resp = expect(WireMessage(MsgKind::GetTip, {}), MsgKind::GetTipResp);
  return decode_exact<TipInfo>(resp.payload);
}

ledger::Block NodeClient::block(std::uint64_t height) {
  Writer w;
  w.u64(height);
  auto resp = expect(WireMessage(MsgKind::GetBlock, std::move(w).take()), MsgKind::GetBlockResp);
  return ledger::Block::parse(resp.payload);
}

ledger::LedgerState NodeClient::state() {
  auto resp = expect(WireMessage(MsgKind::GetState, {}), MsgKind::GetStateResp);
  Reader r(resp.payload);
  r.u64();
  auto raw = r.bytes();
  r.expect_end();
  return decode_exact<ledger::LedgerState>(raw);
}

blob::BlobRef NodeClient::put_blob(ByteView data) {
  auto resp = expect(WireMessage(MsgKind::PutBlob, Bytes(data.begin(), data.end())), MsgKind::PutBlobResp);
  Reader r(resp.payload);
  blob::BlobRef ref{r.digest(), r.u64()};
  r.expect_end();
  return ref;
}

Bytes NodeClient::get_blob(const Digest& hash) {
  Writer w;
  w.digest(hash);
  return expect(WireMessage(MsgKind::GetBlob, std::move(w).take()), MsgKind::GetBlobResp).payload;
}

std::uint64_t NodeClient::wait_for(const Digest& tx_id, int max_polls) {
  for (int poll = 0;; ++poll) {
    auto tip_height = tip().height;
    if (scanned_ > tip_height) {  // pointed at a different chain
      scanned_ = 0;
      included_.clear();
    }
    for (std::uint64_t h = scanned_ + 1; h <= tip_height; ++h) {
      for (const auto& tx : block(h).txs) included_.emplace(tx.tx_id(), h);
      scanned_ = h;
    }
    if (auto it = included_.find(tx_id); it != included_.end()) return it->second;
    if (poll >= max_polls) throw NotIncluded("transaction " + tx_id.hex() + " not included");
    settle();
  }
}

std::uint64_t NodeClient::commit(const ledger::TransactionEnvelope& tx, int max_polls) {
  return wait_for(submit(tx), max_polls);
}

std::uint64_t NodeClient::next_nonce(const std::string& sender) {
  auto s = state();
  if (auto last = ledger::sender_nonce(s, sender)) return *last + 1;
  return 1;
}

DirectClient::DirectClient(Node& node, bool auto_seal, std::function<std::uint64_t()> clock)
    : node_(node), auto_seal_(auto_seal), clock_(std::move(clock)) {
  if (!clock_) {
    clock_ = [] {
      return static_cast<std::uint64_t>(
          std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch())
              .count());
    };
  }
}

WireMessage DirectClient::call(const WireMessage& request) {
  auto response = node_.handle(decode_frame(encode_frame(request)));
  return decode_frame(encode_frame(response));
}

void DirectClient::settle() {
  if (auto_seal_) node_.propose(clock_());
}

blob::BlobRef RemoteBlobStore::put(ByteView data) {
  auto ref = client_.put_blob(data);
  if (ref.hash != sha256(data) || ref.size != data.size())
    throw blob::BlobError(blob::BlobError::Kind::CorruptBlob, "node returned a wrong blob reference");
  return ref;
}

Bytes RemoteBlobStore::get(const Digest& hash) const {
  Bytes data;
  try {
    data = client_.get_blob(hash);
  } catch (const RequestFailed& e) {
    if (e.code() == WireErrc::NotFound) throw blob::BlobError(blob::BlobError::Kind::NotFound, e.detail());
    if (e.code() == WireErrc::Corrupt) throw blob::BlobError(blob::BlobError::Kind::CorruptBlob, e.detail());
    throw blob::BlobError(blob::BlobError::Kind::Io, e.what());
  }
  if (sha256(data) != hash) throw blob::BlobError(blob::BlobError::Kind::CorruptBlob, "hash mismatch for " + hash.hex());
  return data;
}

bool RemoteBlobStore::has(const Digest& hash) const {
  try {
    get(hash);
    return true;
  } catch (const blob::BlobError& e) {
    if (e.kind() == blob::BlobError::Kind::NotFound) return false;
    throw;
  }
}

}  // namespace medledger::net

namespace medledger::net {

SyncResult sync(Node& node, NodeClient& peer) {
  SyncResult result;
  auto target = peer.tip().height;
  for (auto h = node.height() + 1; h <= target; ++h) {
    ledger::Block b;
    try {
      b = peer.block(h);
    } catch (const DecodeError& e) {
      result.failure.emplace(h, ledger::BlockRejection{ledger::BlockError::Malformed, 0, e.what()});
      break;
    }
    if (b.header.height != h) {
      result.failure.emplace(h, ledger::BlockRejection{ledger::BlockError::BadLink, 0, "peer returned wrong height"});
      break;
    }
    if (auto rejected = node.accept_block(b)) {
      result.failure.emplace(h, *rejected);
      break;
    }
    ++result.applied;
  }
  result.height = node.height();
  return result;
}

}  // namespace medledger::net
