#pragma once

// Deterministic in-process network: nodes exchange WireMessages through a
// virtual-time event queue with seeded latency and loss. Transactions and
// blocks are flooded, pools are re-offered to the next proposer, and every
// node periodically pulls missing blocks from a random peer.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <queue>
#include <random>
#include <string>
#include <vector>

#include "medledger/client.hpp"
#include "medledger/node.hpp"

namespace medledger::net {

struct PeerSpec {
  std::string id;
  std::string address;  // host:port; unused by the simulator
};

struct NetConfig {
  std::vector<PeerSpec> nodes;
  std::uint32_t latency_min_ms = 1;
  std::uint32_t latency_max_ms = 20;
  double drop_probability = 0.0;
  std::uint64_t seed = 1;

  /// Throws std::invalid_argument.
  void validate() const;
};

NetConfig parse_net_config(const std::string& json_text);
std::string net_config_to_json(const NetConfig& config);
NetConfig load_net_config(const std::filesystem::path& file);

struct SimTiming {
  std::uint32_t tick_ms = 10;       // proposer attempts
  std::uint32_t sync_ms = 100;      // tip polling
  std::uint32_t regossip_ms = 200;  // pool re-offer to the next proposer
  std::uint32_t settle_ms = 50;     // virtual time per client settle()
};

struct SimStats {
  std::uint64_t sent = 0;
  std::uint64_t dropped = 0;
  std::uint64_t delivered = 0;
};

class SimNetwork {
 public:
  /// Nodes whose id names a genesis validator get that validator's key from
  /// `keys`. All nodes share `blobs` (the off-chain store).
  SimNetwork(NetConfig config, ledger::Genesis genesis, std::map<std::string, SigSecretKey> keys,
             std::shared_ptr<blob::BlobStore> blobs = std::make_shared<blob::MemoryBlobStore>(),
             SimTiming timing = {});
  ~SimNetwork();

  std::size_t size() const { return nodes_.size(); }
  Node& node(std::size_t i) { return *nodes_.at(i); }
  std::size_t index_of(const std::string& id) const;
  std::shared_ptr<blob::BlobStore> blobs() const { return blobs_; }

  /// A client attached to node `i`; settle() advances virtual time.
  std::unique_ptr<NodeClient> client(std::size_t i);

  std::uint64_t now_ms() const { return now_; }
  void run_for(std::uint64_t ms);
  /// Runs until every node has the same tip and empty pools. Returns false
  /// when `max_ms` of virtual time passes first.
  bool run_until_quiescent(std::uint64_t max_ms);

  bool converged() const;
  const SimStats& stats() const { return stats_; }

  /// Cuts a node off (messages to and from it are dropped) or reconnects it.
  void set_isolated(std::size_t i, bool isolated);

 private:
  struct Event {
    std::uint64_t at;
    std::uint64_t seq;
    enum class Type { Deliver, Tick, Sync, Regossip } type;
    std::size_t from;
    std::size_t to;
    bool response;
    WireMessage msg;
  };
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      return a.at != b.at ? a.at > b.at : a.seq > b.seq;
    }
  };

  void schedule(Event e);
  void send(std::size_t from, std::size_t to, WireMessage msg, bool response);
  void broadcast(std::size_t from, const WireMessage& msg);
  void process(Event& e);
  void on_response(std::size_t node, std::size_t from, const WireMessage& msg);
  void request_block(std::size_t node, std::size_t peer, std::uint64_t height);
  std::uint64_t block_timestamp() const;

  NetConfig config_;
  ledger::Genesis genesis_;
  SimTiming timing_;
  std::shared_ptr<blob::BlobStore> blobs_;
  std::vector<std::unique_ptr<Node>> nodes_;
  std::vector<bool> isolated_;
  std::vector<std::map<std::size_t, std::uint64_t>> peer_heights_;

  std::priority_queue<Event, std::vector<Event>, Later> queue_;
  std::uint64_t now_ = 0;
  std::uint64_t seq_ = 0;
  std::mt19937_64 rng_;
  SimStats stats_;
};

}  // namespace medledger::net
