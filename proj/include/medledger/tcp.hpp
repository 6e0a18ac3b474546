#pragma once

// Socket transport for the wire protocol (same frames as the simulator) and
// the long-running node service: proposer ticks, gossip and periodic sync.

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "medledger/client.hpp"
#include "medledger/node.hpp"

namespace medledger::net {

struct Endpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;

  /// "host:port"; throws std::invalid_argument.
  static Endpoint parse(const std::string& text);
  std::string str() const;
};

class TcpServer {
 public:
  /// Binds immediately; port 0 picks a free port.
  TcpServer(Node& node, Endpoint bind);
  ~TcpServer();
  TcpServer(const TcpServer&) = delete;
  TcpServer& operator=(const TcpServer&) = delete;

  std::uint16_t port() const { return port_; }
  void stop();

 private:
  void accept_loop();
  void serve_connection(int fd);

  Node& node_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> stopping_{false};
  std::thread acceptor_;
  std::mutex mu_;
  std::vector<std::thread> workers_;
  std::vector<int> open_fds_;
};

/// One persistent connection, reopened on failure. Calls are serialized.
class TcpClient final : public NodeClient {
 public:
  explicit TcpClient(Endpoint remote, std::chrono::milliseconds poll = std::chrono::milliseconds(100));
  ~TcpClient() override;

  WireMessage call(const WireMessage& request) override;
  void settle() override;

 private:
  void connect_locked();
  void close_locked();

  Endpoint remote_;
  std::chrono::milliseconds poll_;
  std::mutex mu_;
  int fd_ = -1;
};

struct ServiceOptions {
  std::chrono::milliseconds tick{200};
  std::chrono::milliseconds sync{1000};
};

/// Runs a node against TCP peers. Fresh transactions and new blocks are
/// pushed to every peer from a background queue; a sync pass pulls missing
/// blocks from each peer.
class NodeService {
 public:
  NodeService(Node& node, std::vector<Endpoint> peers, ServiceOptions options = {});
  ~NodeService();

  void start();
  void stop();

 private:
  void tick_loop();
  void sync_loop();
  void gossip_loop();
  void enqueue(WireMessage msg);

  Node& node_;
  std::vector<Endpoint> peers_;
  ServiceOptions options_;
  std::vector<std::unique_ptr<TcpClient>> clients_;
  std::atomic<bool> running_{false};
  std::thread ticker_, syncer_, gossiper_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<WireMessage> outbox_;
};

}  // namespace medledger::net
