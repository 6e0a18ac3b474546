#include "medledger/tcp.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <stdexcept>

namespace medledger::net {

namespace {

std::uint64_t unix_seconds() {
  return static_cast<std::uint64_t>(
      std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch()).count());
}

std::runtime_error sys_error(const std::string& what) {
  return std::runtime_error(what + ": " + std::strerror(errno));
}

void write_all(int fd, ByteView data) {
  std::size_t off = 0;
  while (off < data.size()) {
    auto n = ::send(fd, data.data() + off, data.size() - off, MSG_NOSIGNAL);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) throw sys_error("send");
    off += static_cast<std::size_t>(n);
  }
}

/// Returns false on orderly close before any byte.
bool read_frame(int fd, FrameReader& reader, WireMessage& out) {
  std::uint8_t buf[16384];
  for (;;) {
    if (auto msg = reader.next()) {
      out = std::move(*msg);
      return true;
    }
    auto n = ::recv(fd, buf, sizeof(buf), 0);
    if (n < 0 && errno == EINTR) continue;
    if (n < 0) throw sys_error("recv");
    if (n == 0) return false;
    reader.feed(ByteView(buf, static_cast<std::size_t>(n)));
  }
}

}  // namespace

Endpoint Endpoint::parse(const std::string& text) {
  auto colon = text.rfind(':');
  if (colon == std::string::npos) throw std::invalid_argument("expected host:port, got " + text);
  Endpoint e;
  e.host = text.substr(0, colon);
  try {
    auto port = std::stoul(text.substr(colon + 1));
    if (port > 65535) throw std::out_of_range("port");
    e.port = static_cast<std::uint16_t>(port);
  } catch (const std::exception&) {
    throw std::invalid_argument("bad port in " + text);
  }
  if (e.host.empty()) e.host = "127.0.0.1";
  return e;
}

std::string Endpoint::str() const { return host + ":" + std::to_string(port); }

// --- server --------------------------------------------------------------------

TcpServer::TcpServer(Node& node, Endpoint bind) : node_(node) {
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw sys_error("socket");
  int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(bind.port);
  if (::inet_pton(AF_INET, bind.host.c_str(), &addr.sin_addr) != 1) {
    ::close(listen_fd_);
    throw std::invalid_argument("bind address must be an IPv4 literal: " + bind.host);
  }
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0 || ::listen(listen_fd_, 64) < 0) {
    auto err = sys_error("bind " + bind.str());
    ::close(listen_fd_);
    throw err;
  }
  socklen_t len = sizeof(addr);
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
  acceptor_ = std::thread([this] { accept_loop(); });
}

TcpServer::~TcpServer() { stop(); }

void TcpServer::stop() {
  if (stopping_.exchange(true)) return;
  ::shutdown(listen_fd_, SHUT_RDWR);
  ::close(listen_fd_);
  if (acceptor_.joinable()) acceptor_.join();
  std::vector<std::thread> workers;
  {
    std::lock_guard lock(mu_);
    for (int fd : open_fds_) ::shutdown(fd, SHUT_RDWR);
    workers.swap(workers_);
  }
  for (auto& t : workers) t.join();
}

void TcpServer::accept_loop() {
  while (!stopping_) {
    int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) {
      if (errno == EINTR) continue;
      return;
    }
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    std::lock_guard lock(mu_);
    open_fds_.push_back(fd);
    workers_.emplace_back([this, fd] { serve_connection(fd); });
  }
}

void TcpServer::serve_connection(int fd) {
  FrameReader reader;
  try {
    WireMessage request;
    while (!stopping_ && read_frame(fd, reader, request)) write_all(fd, encode_frame(node_.handle(request)));
  } catch (const FrameError& e) {
    // Framing is lost; answer once and drop the connection.
    try {
      write_all(fd, encode_frame(error_message(WireErrc::Malformed, e.what())));
    } catch (const std::exception&) {
    }
  } catch (const std::exception&) {
  }
  std::lock_guard lock(mu_);
  std::erase(open_fds_, fd);
  ::close(fd);
}

// --- client --------------------------------------------------------------------

TcpClient::TcpClient(Endpoint remote, std::chrono::milliseconds poll) : remote_(std::move(remote)), poll_(poll) {}

TcpClient::~TcpClient() {
  std::lock_guard lock(mu_);
  close_locked();
}

void TcpClient::close_locked() {
  if (fd_ >= 0) ::close(fd_);
  fd_ = -1;
}

void TcpClient::connect_locked() {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  auto port = std::to_string(remote_.port);
  if (::getaddrinfo(remote_.host.c_str(), port.c_str(), &hints, &res) != 0 || !res)
    throw std::runtime_error("cannot resolve " + remote_.host);
  int fd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
  if (fd < 0) {
    ::freeaddrinfo(res);
    throw sys_error("socket");
  }
  timeval tv{30, 0};
  ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof(tv));
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  int rc = ::connect(fd, res->ai_addr, res->ai_addrlen);
  ::freeaddrinfo(res);
  if (rc < 0) {
    auto err = sys_error("connect " + remote_.str());
    ::close(fd);
    throw err;
  }
  fd_ = fd;
}

WireMessage TcpClient::call(const WireMessage& request) {
  std::lock_guard lock(mu_);
  auto frame = encode_frame(request);
  for (int attempt = 0;; ++attempt) {
    try {
      if (fd_ < 0) connect_locked();
      write_all(fd_, frame);
      FrameReader reader;
      WireMessage response;
      if (!read_frame(fd_, reader, response)) throw std::runtime_error("connection closed by " + remote_.str());
      return response;
    } catch (const std::runtime_error&) {
      close_locked();
      if (attempt >= 1) throw;
    }
  }
}

void TcpClient::settle() { std::this_thread::sleep_for(poll_); }

// --- service -------------------------------------------------------------------

NodeService::NodeService(Node& node, std::vector<Endpoint> peers, ServiceOptions options)
    : node_(node), peers_(std::move(peers)), options_(options) {
  for (const auto& p : peers_) clients_.push_back(std::make_unique<TcpClient>(p));
}

NodeService::~NodeService() { stop(); }

void NodeService::enqueue(WireMessage msg) {
  {
    std::lock_guard lock(mu_);
    if (outbox_.size() > 10'000) outbox_.pop_front();
    outbox_.push_back(std::move(msg));
  }
  cv_.notify_one();
}

void NodeService::start() {
  if (running_.exchange(true)) return;
  node_.on_fresh_tx([this](const ledger::TransactionEnvelope& tx) {
    enqueue(WireMessage(MsgKind::SubmitTx, tx.serialize()));
  });
  node_.on_block([this](const ledger::Block& b) { enqueue(WireMessage(MsgKind::BlockAnnounce, b.serialize())); });
  ticker_ = std::thread([this] { tick_loop(); });
  syncer_ = std::thread([this] { sync_loop(); });
  gossiper_ = std::thread([this] { gossip_loop(); });
}

void NodeService::stop() {
  if (!running_.exchange(false)) return;
  cv_.notify_all();
  node_.on_fresh_tx({});
  node_.on_block({});
  for (auto* t : {&ticker_, &syncer_, &gossiper_})
    if (t->joinable()) t->join();
}

void NodeService::tick_loop() {
  while (running_) {
    try {
      node_.propose(unix_seconds());
    } catch (const std::exception&) {
    }
    std::this_thread::sleep_for(options_.tick);
  }
}

void NodeService::sync_loop() {
  while (running_) {
    for (auto& c : clients_) {
      try {
        sync(node_, *c);
        // Offer our pool to peers so the scheduled proposer has it.
        for (const auto& tx : node_.pool()) c->call(WireMessage(MsgKind::SubmitTx, tx.serialize()));
      } catch (const std::exception&) {
        // Peer down; retry next round.
      }
    }
    auto until = std::chrono::steady_clock::now() + options_.sync;
    while (running_ && std::chrono::steady_clock::now() < until)
      std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
}

void NodeService::gossip_loop() {
  while (running_) {
    WireMessage msg;
    {
      std::unique_lock lock(mu_);
      cv_.wait_for(lock, std::chrono::milliseconds(200), [this] { return !outbox_.empty() || !running_; });
      if (outbox_.empty()) continue;
      msg = std::move(outbox_.front());
      outbox_.pop_front();
    }
    for (auto& c : clients_) {
      try {
        c->call(msg);
      } catch (const std::exception&) {
      }
    }
  }
}

}  // namespace medledger::net
