#include <gtest/gtest.h>

#include <thread>

#include "harness.hpp"
#include "medledger/sim_network.hpp"
#include "medledger/tcp.hpp"

using namespace medledger;
using namespace medledger::net;
using ledger::Role;

namespace {

Bytes be32(std::uint32_t v) {
  return {static_cast<std::uint8_t>(v >> 24), static_cast<std::uint8_t>(v >> 16), static_cast<std::uint8_t>(v >> 8),
          static_cast<std::uint8_t>(v)};
}

Bytes be64(std::uint64_t v) {
  Bytes out;
  for (int s = 56; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(v >> s));
  return out;
}

bool is_error(const WireMessage& m) { return m.is(MsgKind::Error); }

std::optional<WireErrc> error_code(const WireMessage& m) {
  if (auto e = parse_error(m)) return e->code;
  return std::nullopt;
}

/// Registers `n` actors one transaction at a time, so each lands in its own block.
void grow(harness::Local& h, int n, const std::string& prefix = "a") {
  for (int i = 0; i < n; ++i) h.add_actor(prefix + std::to_string(i), Role::Researcher);
}

std::map<std::string, SigSecretKey> key_map(const ledger::Genesis& g, const std::vector<SigningKey>& keys) {
  std::map<std::string, SigSecretKey> out;
  for (std::size_t i = 0; i < keys.size(); ++i) out[g.validators[i].id] = keys[i].secret;
  return out;
}

NetConfig sim_config(std::size_t n, double drop, std::uint64_t seed) {
  NetConfig c;
  for (std::size_t i = 0; i < n; ++i) c.nodes.push_back({"v" + std::to_string(i), ""});
  c.drop_probability = drop;
  c.seed = seed;
  return c;
}

}  // namespace

// --- frames ---------------------------------------------------------------------------

TEST(Frame, LayoutIsLengthKindPayload) {
  WireMessage m(MsgKind::GetBlock, be64(7));
  Bytes expected = be32(8);
  expected.push_back(0x02);
  auto tail = be64(7);
  expected.insert(expected.end(), tail.begin(), tail.end());
  EXPECT_EQ(encode_frame(m), expected);
  EXPECT_EQ(decode_frame(expected), m);
  EXPECT_EQ(encode_frame(WireMessage(MsgKind::GetTip, {})), (Bytes{0, 0, 0, 0, 0x03}));
}

TEST(Frame, LengthMismatchIsRejected) {
  auto f = encode_frame(WireMessage(MsgKind::PutBlob, to_bytes("abc")));
  auto longer = f;
  longer.push_back(0);
  auto shorter = f;
  shorter.pop_back();
  EXPECT_THROW(decode_frame(longer), FrameError);
  EXPECT_THROW(decode_frame(shorter), FrameError);
  EXPECT_THROW(decode_frame(Bytes{0, 0, 0}), FrameError);
}

TEST(Frame, ReaderReassemblesArbitrarySplits) {
  SeededRandom rng(3);
  std::vector<WireMessage> sent;
  Bytes stream;
  for (int i = 0; i < 200; ++i) {
    WireMessage m(static_cast<std::uint8_t>(rng.bytes(1)[0]), rng.bytes(i % 50));
    sent.push_back(m);
    auto f = encode_frame(m);
    stream.insert(stream.end(), f.begin(), f.end());
  }
  FrameReader reader;
  std::vector<WireMessage> got;
  std::size_t pos = 0;
  while (pos < stream.size()) {
    auto chunk = std::min<std::size_t>(stream.size() - pos, 1 + rng.bytes(1)[0] % 17);
    reader.feed(ByteView(stream.data() + pos, chunk));
    pos += chunk;
    while (auto m = reader.next()) got.push_back(*m);
  }
  EXPECT_EQ(got, sent);
  EXPECT_FALSE(reader.next());
}

TEST(Frame, OversizedHeaderIsRefused) {
  FrameReader reader;
  auto header = be32(kMaxPayload + 1);
  header.push_back(0x01);
  reader.feed(header);
  EXPECT_THROW(reader.next(), FrameError);
}

TEST(Frame, RandomBytesDecodeOrThrowCleanly) {
  SeededRandom rng(9);
  for (int i = 0; i < 5000; ++i) {
    auto raw = rng.bytes(rng.bytes(1)[0] % 12);
    if (i % 3 == 0 && raw.size() >= 5) {  // make the length field honest sometimes
      auto len = be32(static_cast<std::uint32_t>(raw.size() - 5));
      std::copy(len.begin(), len.end(), raw.begin());
    }
    try {
      auto m = decode_frame(raw);
      EXPECT_EQ(encode_frame(m), raw);
    } catch (const FrameError&) {
    }
  }
}

// --- node request handling ----------------------------------------------------------

TEST(NodeHandle, FreshNodeTipIsGenesis) {
  harness::Local h;
  auto tip = h.client.tip();
  EXPECT_EQ(tip.height, 0u);
  EXPECT_EQ(tip.hash, ledger::genesis_block(h.genesis).hash());
  EXPECT_EQ(h.client.block(0), ledger::genesis_block(h.genesis));
}

TEST(NodeHandle, UnknownKindIsAnErrorAndTheNodeKeepsServing) {
  harness::Local h;
  auto resp = h.node.handle(WireMessage(std::uint8_t{0x42}, to_bytes("?")));
  EXPECT_EQ(error_code(resp), WireErrc::UnknownKind);
  EXPECT_EQ(h.client.tip().height, 0u);
}

TEST(NodeHandle, BadSignatureIsRefusedAndNotPooled) {
  harness::Local h;
  auto tx = h.tx(contracts::RegisterActorBody{"x", Role::Researcher, fixture::key_from_label("x").public_key, {}},
                 h.admin);
  tx.signature.bytes[5] ^= 1;
  Writer w;
  tx.encode(w);
  auto resp = h.node.handle(WireMessage(MsgKind::SubmitTx, std::move(w).take()));
  EXPECT_EQ(error_code(resp), WireErrc::Rejected);
  EXPECT_EQ(h.node.pool_size(), 0u);
  EXPECT_THROW(h.client.submit(tx), RequestFailed);
  EXPECT_EQ(h.node.pool_size(), 0u);
}

TEST(NodeHandle, UnregisteredSenderIsRefusedBeforePooling) {
  harness::Local h;
  auto ghost = fixture::key_from_label("ghost");
  auto tx = contracts::make_tx(contracts::RegisterDeviceBody{"d", ghost.public_key}, "ghost", 1, ghost.secret);
  try {
    h.client.submit(tx);
    ADD_FAILURE() << "accepted";
  } catch (const RequestFailed& e) {
    EXPECT_EQ(e.reason(), "UnknownSender");
  }
  EXPECT_EQ(h.node.pool_size(), 0u);
}

TEST(NodeHandle, BlobRoundTripAndMissingBlob) {
  harness::Local h;
  auto ref = h.client.put_blob(to_bytes("payload"));
  EXPECT_EQ(ref.hash, sha256(to_bytes("payload")));
  EXPECT_EQ(h.client.get_blob(ref.hash), to_bytes("payload"));
  try {
    h.client.get_blob(sha256(to_bytes("absent")));
    ADD_FAILURE();
  } catch (const RequestFailed& e) {
    EXPECT_EQ(e.code(), WireErrc::NotFound);
  }
  // A remote store re-hashes what it receives.
  h.blobs->corrupt(ref.hash, to_bytes("payloaX"));
  RemoteBlobStore remote(h.client);
  EXPECT_THROW(remote.get(ref.hash), std::exception);
}

TEST(NodeHandle, FuzzedMessagesNeverCrashOrMutate) {
  harness::Local h;
  grow(h, 2);
  auto before = h.node.tip();
  SeededRandom rng(21);
  const std::set<std::uint8_t> known = {0x01, 0x02, 0x03, 0x04, 0x05, 0x06, 0x07};
  for (int i = 0; i < 20000; ++i) {
    auto kb = rng.bytes(2);
    std::uint8_t kind = kb[1] < 200 ? static_cast<std::uint8_t>(1 + kb[0] % 7) : kb[0];
    auto payload = rng.bytes(rng.bytes(1)[0] % 64);
    if (kind == 0x05) continue;  // any bytes are a valid blob
    WireMessage req(kind, payload);
    WireMessage resp;
    ASSERT_NO_THROW(resp = h.node.handle(req)) << int(kind);
    if (!known.count(kind)) {
      EXPECT_EQ(error_code(resp), WireErrc::UnknownKind);
      continue;
    }
    EXPECT_TRUE(is_error(resp) || resp.kind == response_kind(static_cast<MsgKind>(kind)));
    if (kind == 0x03 && !payload.empty()) { EXPECT_EQ(error_code(resp), WireErrc::Malformed); }
    if (kind == 0x02 && payload.size() != 8) { EXPECT_EQ(error_code(resp), WireErrc::Malformed); }
    if (kind == 0x01 || kind == 0x07) { EXPECT_TRUE(is_error(resp)); }
  }
  auto after = h.node.tip();
  EXPECT_EQ(after.hash, before.hash);
  EXPECT_EQ(after.state_hash, before.state_hash);
  EXPECT_EQ(h.node.pool_size(), 0u);
}

// --- sync ----------------------------------------------------------------------------

namespace {

/// Serves a peer's blocks but rewrites the timestamp of one of them.
class TamperingPeer final : public NodeClient {
 public:
  TamperingPeer(NodeClient& inner, std::uint64_t bad_height) : inner_(inner), bad_(bad_height) {}
  WireMessage call(const WireMessage& req) override {
    auto resp = inner_.call(req);
    if (req.is(MsgKind::GetBlock) && req.payload == be64(bad_) && !is_error(resp)) {
      auto b = ledger::Block::parse(resp.payload);
      b.header.timestamp += 1;
      resp.payload = b.serialize();
    }
    return resp;
  }
  void settle() override {}

 private:
  NodeClient& inner_;
  std::uint64_t bad_;
};

}  // namespace

TEST(Sync, EqualTipsIsANoOp) {
  harness::Local a;
  Node b("b", a.genesis, std::make_shared<blob::MemoryBlobStore>());
  auto r = sync(b, a.client);
  EXPECT_EQ(r.applied, 0u);
  EXPECT_EQ(r.height, 0u);
  EXPECT_FALSE(r.failure);
}

TEST(Sync, CatchesUpTenBlocksToTheSameState) {
  harness::Local a;
  grow(a, 10);
  ASSERT_EQ(a.node.height(), 10u);
  Node b("b", a.genesis, std::make_shared<blob::MemoryBlobStore>());
  auto r = sync(b, a.client);
  EXPECT_EQ(r.applied, 10u);
  EXPECT_EQ(b.height(), 10u);
  EXPECT_FALSE(r.failure);
  // Oracle: an independent replay of the peer's blocks.
  auto blocks = a.node.blocks();
  auto replayed = ledger::Chain::replay(a.genesis, std::vector<ledger::Block>(blocks.begin() + 1, blocks.end()));
  EXPECT_EQ(b.state_hash(), ledger::state_hash(replayed.state()));
  EXPECT_EQ(b.state_hash(), a.node.state_hash());
  EXPECT_EQ(b.tip().hash, a.node.tip().hash);
  EXPECT_EQ(sync(b, a.client).applied, 0u);
}

TEST(Sync, TamperedBlockStopsAtTheLastValidHeight) {
  harness::Local a;
  grow(a, 8);
  for (std::uint64_t bad : {1u, 4u, 8u}) {
    Node b("b", a.genesis, std::make_shared<blob::MemoryBlobStore>());
    TamperingPeer peer(a.client, bad);
    auto r = sync(b, peer);
    ASSERT_TRUE(r.failure);
    EXPECT_EQ(r.failure->first, bad);
    EXPECT_EQ(r.failure->second.error, ledger::BlockError::BadSignature);
    EXPECT_EQ(b.height(), bad - 1);
    EXPECT_EQ(b.tip().hash, a.node.block(bad - 1)->hash());
    // An honest peer finishes the job.
    EXPECT_EQ(sync(b, a.client).height, 8u);
    EXPECT_EQ(b.state_hash(), a.node.state_hash());
  }
}

// --- configuration --------------------------------------------------------------------

TEST(NetConfig, ValidationAndJsonRoundTrip) {
  auto c = sim_config(3, 0.1, 5);
  c.nodes[0].address = "127.0.0.1:7001";
  EXPECT_NO_THROW(c.validate());
  auto back = parse_net_config(net_config_to_json(c));
  EXPECT_EQ(back.nodes.size(), 3u);
  EXPECT_EQ(back.nodes[0].address, "127.0.0.1:7001");
  EXPECT_EQ(back.drop_probability, 0.1);
  EXPECT_EQ(back.seed, 5u);
  auto bad = [](auto mutate) {
    auto c = sim_config(2, 0.0, 1);
    mutate(c);
    EXPECT_THROW(c.validate(), std::invalid_argument);
  };
  bad([](NetConfig& c) { c.drop_probability = 1.0; });
  bad([](NetConfig& c) { c.drop_probability = -0.1; });
  bad([](NetConfig& c) { c.latency_min_ms = 50, c.latency_max_ms = 10; });
  bad([](NetConfig& c) { c.nodes.clear(); });
  bad([](NetConfig& c) { c.nodes[1].id = c.nodes[0].id; });
  EXPECT_THROW(parse_net_config("[]"), std::invalid_argument);
}

// --- simulated network ------------------------------------------------------------------

namespace {

struct SimRun {
  Digest tip_hash;
  Digest state_hash;
  std::uint64_t height;
  SimStats stats;
};

/// Commits admin transactions through rotating nodes until `blocks` are built.
SimRun run_sim(std::uint64_t blocks, double drop, std::uint64_t seed) {
  std::vector<SigningKey> keys;
  auto genesis = fixture::make_genesis(pre::GroupId::Toy, 4, &keys);
  SimNetwork net(sim_config(4, drop, seed), genesis, key_map(genesis, keys));
  std::vector<std::unique_ptr<NodeClient>> clients;
  for (std::size_t i = 0; i < 4; ++i) clients.push_back(net.client(i));
  auto admin = fixture::key_from_label("admin");
  int i = 0;
  while (net.node(0).height() < blocks) {
    auto& c = *clients[i % 4];
    auto id = "actor" + std::to_string(i++);
    auto tx = contracts::make_tx(contracts::RegisterActorBody{id, Role::Researcher,
                                                              fixture::key_from_label(id).public_key, {}},
                                 "admin", c.next_nonce("admin"), admin.secret);
    c.commit(tx);
  }
  EXPECT_TRUE(net.run_until_quiescent(600'000));
  EXPECT_TRUE(net.converged());

  // Every node's chain replays independently to its advertised state.
  for (std::size_t n = 0; n < 4; ++n) {
    auto bs = net.node(n).blocks();
    auto replayed = ledger::Chain::replay(genesis, std::vector<ledger::Block>(bs.begin() + 1, bs.end()));
    EXPECT_EQ(ledger::state_hash(replayed.state()), net.node(n).state_hash()) << n;
    EXPECT_EQ(net.node(n).state_hash(), net.node(0).state_hash()) << n;
  }
  return {net.node(0).tip().hash, net.node(0).state_hash(), net.node(0).height(), net.stats()};
}

}  // namespace

TEST(Sim, FourNodesConvergeAfterFiftyBlocks) {
  auto r = run_sim(50, 0.0, 1);
  EXPECT_GE(r.height, 50u);
  EXPECT_EQ(r.stats.dropped, 0u);
}

TEST(Sim, FourNodesConvergeOverAHundredBlocksWithLoss) {
  for (std::uint64_t seed : {2u, 3u}) {
    auto r = run_sim(100, 0.2, seed);
    EXPECT_GE(r.height, 100u);
    EXPECT_GT(r.stats.dropped, 0u);
  }
}

TEST(Sim, DeterministicUnderAFixedSeed) {
  auto a = run_sim(20, 0.1, 17);
  auto b = run_sim(20, 0.1, 17);
  EXPECT_EQ(a.tip_hash, b.tip_hash);
  EXPECT_EQ(a.stats.sent, b.stats.sent);
  EXPECT_EQ(a.stats.dropped, b.stats.dropped);
}

TEST(Sim, IsolatedNodeCatchesUpAfterRejoining) {
  std::vector<SigningKey> keys;
  auto genesis = fixture::make_genesis(pre::GroupId::Toy, 4, &keys);
  SimNetwork net(sim_config(4, 0.0, 4), genesis, key_map(genesis, keys));
  auto client = net.client(0);
  auto admin = fixture::key_from_label("admin");
  net.set_isolated(3, true);
  // Heights 1 and 2 are proposed by v1 and v2, so the chain moves without v3.
  for (int i = 0; i < 2; ++i) {
    auto id = "iso" + std::to_string(i);
    client->commit(contracts::make_tx(
        contracts::RegisterActorBody{id, Role::Researcher, fixture::key_from_label(id).public_key, {}}, "admin",
        client->next_nonce("admin"), admin.secret));
  }
  EXPECT_EQ(net.node(0).height(), 2u);
  net.run_for(2000);
  EXPECT_EQ(net.node(3).height(), 0u);
  net.set_isolated(3, false);
  EXPECT_TRUE(net.run_until_quiescent(60'000));
  EXPECT_EQ(net.node(3).height(), 2u);
  EXPECT_EQ(net.node(3).state_hash(), net.node(0).state_hash());
}

// --- TCP -----------------------------------------------------------------------------------

TEST(Tcp, TwoNodesAgreeOverSockets) {
  std::vector<SigningKey> keys;
  auto genesis = fixture::make_genesis(pre::GroupId::Toy, 4, &keys);
  auto ids = harness::identities(genesis, keys);
  Node a("a", genesis, std::make_shared<blob::MemoryBlobStore>(), {ids[0], ids[1]});
  Node b("b", genesis, std::make_shared<blob::MemoryBlobStore>(), {ids[2], ids[3]});
  TcpServer sa(a, {"127.0.0.1", 0});
  TcpServer sb(b, {"127.0.0.1", 0});
  ServiceOptions opts{std::chrono::milliseconds(20), std::chrono::milliseconds(100)};
  NodeService na(a, {{"127.0.0.1", sb.port()}}, opts);
  NodeService nb(b, {{"127.0.0.1", sa.port()}}, opts);
  na.start();
  nb.start();

  TcpClient client({"127.0.0.1", sa.port()}, std::chrono::milliseconds(20));
  EXPECT_EQ(client.tip().height, 0u);
  // Unknown kinds get an error and the connection stays usable.
  EXPECT_EQ(error_code(client.call(WireMessage(std::uint8_t{0x42}, {}))), WireErrc::UnknownKind);
  EXPECT_EQ(client.tip().height, 0u);

  auto admin = fixture::key_from_label("admin");
  for (int i = 0; i < 4; ++i) {
    auto id = "t" + std::to_string(i);
    client.commit(contracts::make_tx(
        contracts::RegisterActorBody{id, Role::Researcher, fixture::key_from_label(id).public_key, {}}, "admin",
        client.next_nonce("admin"), admin.secret));
  }
  EXPECT_GE(a.height(), 4u);
  for (int i = 0; i < 200 && b.tip().hash != a.tip().hash; ++i)
    std::this_thread::sleep_for(std::chrono::milliseconds(25));
  EXPECT_EQ(b.tip().hash, a.tip().hash);
  EXPECT_EQ(b.state_hash(), a.state_hash());
  EXPECT_EQ(b.state().actors.size(), 6u);

  TcpClient to_b({"127.0.0.1", sb.port()});
  EXPECT_EQ(to_b.tip().state_hash, a.state_hash());
  na.stop();
  nb.stop();
  sa.stop();
  sb.stop();
}

TEST(Tcp, ClientReconnectsAfterServerRestart) {
  harness::Local h;
  auto server = std::make_unique<TcpServer>(h.node, Endpoint{"127.0.0.1", 0});
  auto port = server->port();
  TcpClient client({"127.0.0.1", port});
  EXPECT_EQ(client.tip().height, 0u);
  server.reset();
  EXPECT_THROW(client.tip(), std::exception);
  server = std::make_unique<TcpServer>(h.node, Endpoint{"127.0.0.1", port});
  EXPECT_EQ(client.tip().height, 0u);
}

TEST(Endpoint, ParseAndPrint) {
  auto e = Endpoint::parse("10.0.0.2:7001");
  EXPECT_EQ(e.host, "10.0.0.2");
  EXPECT_EQ(e.port, 7001);
  EXPECT_EQ(e.str(), "10.0.0.2:7001");
  EXPECT_THROW(Endpoint::parse("nohost"), std::invalid_argument);
  EXPECT_THROW(Endpoint::parse("h:99999"), std::invalid_argument);
  EXPECT_THROW(Endpoint::parse("h:"), std::invalid_argument);
}
