#include "medledger/sim_network.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace medledger::net {

using nlohmann::json;

void NetConfig::validate() const {
  if (nodes.empty()) throw std::invalid_argument("net config lists no nodes");
  if (!(drop_probability >= 0.0 && drop_probability < 1.0))
    throw std::invalid_argument("drop probability must be in [0, 1)");
  if (latency_min_ms > latency_max_ms) throw std::invalid_argument("latency min exceeds max");
  std::set<std::string> ids;
  for (const auto& n : nodes) {
    if (n.id.empty()) throw std::invalid_argument("node without id");
    if (!ids.insert(n.id).second) throw std::invalid_argument("duplicate node id " + n.id);
  }
}

NetConfig parse_net_config(const std::string& text) {
  NetConfig c;
  try {
    auto j = json::parse(text);
    for (const auto& n : j.at("nodes")) c.nodes.push_back({n.at("id").get<std::string>(), n.value("address", "")});
    if (j.contains("latency_ms")) {
      c.latency_min_ms = j["latency_ms"].at("min").get<std::uint32_t>();
      c.latency_max_ms = j["latency_ms"].at("max").get<std::uint32_t>();
    }
    c.drop_probability = j.value("drop_probability", 0.0);
    c.seed = j.value("seed", std::uint64_t{1});
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("net config: ") + e.what());
  }
  c.validate();
  return c;
}

std::string net_config_to_json(const NetConfig& c) {
  json j;
  j["nodes"] = json::array();
  for (const auto& n : c.nodes) j["nodes"].push_back({{"id", n.id}, {"address", n.address}});
  j["latency_ms"] = {{"min", c.latency_min_ms}, {"max", c.latency_max_ms}};
  j["drop_probability"] = c.drop_probability;
  j["seed"] = c.seed;
  return j.dump(2);
}

NetConfig load_net_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot read " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_net_config(ss.str());
}

namespace {

class SimClient final : public NodeClient {
 public:
  SimClient(SimNetwork& net, Node& node, std::uint64_t settle_ms) : net_(net), node_(node), settle_ms_(settle_ms) {}

  WireMessage call(const WireMessage& request) override {
    auto response = node_.handle(decode_frame(encode_frame(request)));
    return decode_frame(encode_frame(response));
  }
  void settle() override { net_.run_for(settle_ms_); }

 private:
  SimNetwork& net_;
  Node& node_;
  std::uint64_t settle_ms_;
};

}  // namespace

SimNetwork::SimNetwork(NetConfig config, ledger::Genesis genesis, std::map<std::string, SigSecretKey> keys,
                       std::shared_ptr<blob::BlobStore> blobs, SimTiming timing)
    : config_(std::move(config)),
      genesis_(std::move(genesis)),
      timing_(timing),
      blobs_(std::move(blobs)),
      rng_(config_.seed) {
  config_.validate();
  for (std::size_t i = 0; i < config_.nodes.size(); ++i) {
    const auto& id = config_.nodes[i].id;
    std::vector<ValidatorIdentity> identity;
    if (auto k = keys.find(id); k != keys.end()) identity.push_back({id, k->second});
    nodes_.push_back(std::make_unique<Node>(id, genesis_, blobs_, identity));
  }
  isolated_.assign(nodes_.size(), false);
  peer_heights_.resize(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    nodes_[i]->on_fresh_tx([this, i](const ledger::TransactionEnvelope& tx) {
      broadcast(i, WireMessage(MsgKind::SubmitTx, tx.serialize()));
    });
    nodes_[i]->on_block([this, i](const ledger::Block& b) {
      broadcast(i, WireMessage(MsgKind::BlockAnnounce, b.serialize()));
    });
    // Stagger periodic work so nodes do not act in lockstep.
    schedule({timing_.tick_ms, 0, Event::Type::Tick, i, i, false, {}});
    schedule({timing_.sync_ms + i, 0, Event::Type::Sync, i, i, false, {}});
    schedule({timing_.regossip_ms + i, 0, Event::Type::Regossip, i, i, false, {}});
  }
}

SimNetwork::~SimNetwork() {
  for (auto& n : nodes_) {
    n->on_fresh_tx({});
    n->on_block({});
  }
}

std::size_t SimNetwork::index_of(const std::string& id) const {
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    if (nodes_[i]->id() == id) return i;
  throw std::out_of_range("no node " + id);
}

std::unique_ptr<NodeClient> SimNetwork::client(std::size_t i) {
  return std::make_unique<SimClient>(*this, node(i), timing_.settle_ms);
}

void SimNetwork::schedule(Event e) {
  e.seq = seq_++;
  queue_.push(std::move(e));
}

void SimNetwork::send(std::size_t from, std::size_t to, WireMessage msg, bool response) {
  ++stats_.sent;
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_int_distribution<std::uint32_t> latency(config_.latency_min_ms, config_.latency_max_ms);
  bool drop = coin(rng_) < config_.drop_probability;
  auto delay = latency(rng_);
  if (drop || isolated_[from] || isolated_[to]) {
    ++stats_.dropped;
    return;
  }
  schedule({now_ + delay, 0, Event::Type::Deliver, from, to, response, std::move(msg)});
}

void SimNetwork::broadcast(std::size_t from, const WireMessage& msg) {
  for (std::size_t to = 0; to < nodes_.size(); ++to)
    if (to != from) send(from, to, msg, false);
}

std::uint64_t SimNetwork::block_timestamp() const { return genesis_.timestamp + now_ / 1000; }

void SimNetwork::request_block(std::size_t node, std::size_t peer, std::uint64_t height) {
  Writer w;
  w.u64(height);
  send(node, peer, WireMessage(MsgKind::GetBlock, std::move(w).take()), false);
}

void SimNetwork::on_response(std::size_t i, std::size_t from, const WireMessage& msg) {
  auto& n = *nodes_[i];
  try {
    if (msg.is(MsgKind::GetTipResp)) {
      auto t = decode_exact<TipInfo>(msg.payload);
      peer_heights_[i][from] = t.height;
      if (t.height > n.height()) request_block(i, from, n.height() + 1);
    } else if (msg.is(MsgKind::GetBlockResp)) {
      auto b = ledger::Block::parse(msg.payload);
      if (b.header.height == n.height() + 1 && !n.accept_block(b)) {
        if (peer_heights_[i][from] > n.height()) request_block(i, from, n.height() + 1);
      }
    }
  } catch (const std::exception&) {
    // A bad response from a peer is ignored; the next sync round retries.
  }
}

void SimNetwork::process(Event& e) {
  switch (e.type) {
    case Event::Type::Tick:
      nodes_[e.to]->propose(block_timestamp());
      schedule({now_ + timing_.tick_ms, 0, Event::Type::Tick, e.to, e.to, false, {}});
      break;
    case Event::Type::Sync: {
      if (nodes_.size() > 1) {
        std::uniform_int_distribution<std::size_t> pick(0, nodes_.size() - 2);
        auto peer = pick(rng_);
        if (peer >= e.to) ++peer;
        send(e.to, peer, WireMessage(MsgKind::GetTip, {}), false);
      }
      schedule({now_ + timing_.sync_ms, 0, Event::Type::Sync, e.to, e.to, false, {}});
      break;
    }
    case Event::Type::Regossip: {
      auto& n = *nodes_[e.to];
      auto next = ledger::select_proposer(genesis_.validators, n.height() + 1).id;
      for (std::size_t j = 0; j < nodes_.size(); ++j) {
        if (j == e.to || nodes_[j]->id() != next) continue;
        for (const auto& tx : n.pool()) send(e.to, j, WireMessage(MsgKind::SubmitTx, tx.serialize()), false);
      }
      schedule({now_ + timing_.regossip_ms, 0, Event::Type::Regossip, e.to, e.to, false, {}});
      break;
    }
    case Event::Type::Deliver: {
      ++stats_.delivered;
      if (e.response) {
        on_response(e.to, e.from, e.msg);
        break;
      }
      auto& n = *nodes_[e.to];
      std::uint64_t announced = 0;
      if (e.msg.is(MsgKind::BlockAnnounce)) {
        try {
          announced = ledger::Block::parse(e.msg.payload).header.height;
        } catch (const std::exception&) {
        }
      }
      auto response = n.handle(e.msg);
      if (announced > n.height()) {
        // Behind the announcer: pull the gap from it.
        peer_heights_[e.to][e.from] = announced;
        request_block(e.to, e.from, n.height() + 1);
      }
      if (e.msg.is(MsgKind::GetTip) || e.msg.is(MsgKind::GetBlock))
        send(e.to, e.from, std::move(response), true);
      break;
    }
  }
}

void SimNetwork::run_for(std::uint64_t ms) {
  auto until = now_ + ms;
  while (!queue_.empty() && queue_.top().at <= until) {
    auto e = queue_.top();
    queue_.pop();
    now_ = e.at;
    process(e);
  }
  now_ = until;
}

bool SimNetwork::converged() const {
  auto tip = nodes_.front()->tip();
  for (const auto& n : nodes_) {
    if (isolated_[&n - &nodes_.front()]) continue;
    auto t = n->tip();
    if (t.hash != tip.hash || t.state_hash != tip.state_hash) return false;
  }
  return true;
}

bool SimNetwork::run_until_quiescent(std::uint64_t max_ms) {
  auto deadline = now_ + max_ms;
  while (now_ < deadline) {
    run_for(timing_.tick_ms);
    bool idle = true;
    for (std::size_t i = 0; i < nodes_.size(); ++i)
      if (!isolated_[i] && nodes_[i]->pool_size() != 0) idle = false;
    if (idle && converged()) return true;
  }
  return false;
}

void SimNetwork::set_isolated(std::size_t i, bool isolated) { isolated_.at(i) = isolated; }

}  // namespace medledger::net
