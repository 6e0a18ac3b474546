// medledger: role-based command line for the ledger.
//
// Without --node every command runs against a chain kept under
// $MEDLEDGER_HOME (single-process mode: the CLI holds the validator keys from
// init-genesis and seals one block per submission). With --node host:port it
// talks to a running node.
//
// Exit codes: 0 ok, 1 error, 2 invalid chain, 3 rejected or denied, 4 pending.

#include <sys/file.h>
#include <unistd.h>

#include <atomic>
#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "keyfile.hpp"
#include "medledger/chain.hpp"
#include "medledger/client.hpp"
#include "medledger/contracts.hpp"
#include "medledger/credential.hpp"
#include "medledger/device.hpp"
#include "medledger/node.hpp"
#include "medledger/proxy.hpp"
#include "medledger/tcp.hpp"

namespace fs = std::filesystem;
using namespace medledger;
using cli::KeyFile;

namespace {

enum Exit { kOk = 0, kError = 1, kInvalidChain = 2, kDenied = 3, kPending = 4 };

struct CliError : std::runtime_error {
  CliError(int code, const std::string& what) : std::runtime_error(what), code(code) {}
  int code;
};

std::atomic<bool> g_stop{false};

std::uint64_t unix_now() {
  return static_cast<std::uint64_t>(
      std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch()).count());
}

fs::path home() {
  if (const char* h = std::getenv("MEDLEDGER_HOME"); h && *h) return h;
  if (const char* h = std::getenv("HOME"); h && *h) return fs::path(h) / ".medledger";
  return ".medledger";
}

fs::path genesis_path() { return home() / "genesis.bin"; }

ledger::Genesis load_genesis() {
  if (!fs::exists(genesis_path()))
    throw CliError(kError, "no genesis at " + genesis_path().string() + " (run init-genesis)");
  return ledger::read_genesis(genesis_path());
}

std::string random_id(const std::string& prefix) {
  SystemRandom rng;
  return prefix + to_hex(rng.bytes(4));
}

/// A connection to the ledger: either a local chain under an exclusive lock
/// or a remote node.
class Session {
 public:
  explicit Session(const std::string& node_addr) : genesis_(load_genesis()) {
    if (!node_addr.empty()) {
      client_ = std::make_unique<net::TcpClient>(net::Endpoint::parse(node_addr));
      blobs_ = std::make_unique<net::RemoteBlobStore>(*client_);
      return;
    }
    fs::create_directories(home());
    lock_fd_ = ::open((home() / "lock").c_str(), O_CREAT | O_RDWR, 0600);
    if (lock_fd_ < 0 || ::flock(lock_fd_, LOCK_EX) != 0) throw CliError(kError, "cannot lock " + home().string());
    std::vector<net::ValidatorIdentity> keys;
    for (const auto& v : genesis_.validators) {
      auto file = home() / "keys" / (v.id + ".json");
      if (!fs::exists(file)) throw CliError(kError, "validator key " + file.string() + " missing; pass --node");
      keys.push_back({v.id, cli::load_key_file(file).sig});
    }
    auto store = std::make_shared<blob::FileBlobStore>(home() / "blobs");
    try {
      node_ = std::make_unique<net::Node>("local", genesis_, store, std::move(keys), home() / "chain");
    } catch (const ledger::BadChain& e) {
      throw CliError(kInvalidChain, "invalid height " + std::to_string(e.height) + " " + e.reason.str());
    }
    client_ = std::make_unique<net::DirectClient>(*node_, true);
    blobs_ = std::make_unique<net::RemoteBlobStore>(*client_);
  }

  ~Session() {
    blobs_.reset();
    client_.reset();
    node_.reset();
    if (lock_fd_ >= 0) ::close(lock_fd_);
  }

  const ledger::Genesis& genesis() const { return genesis_; }
  const pre::GroupParams& params() const { return pre::GroupParams::get(genesis_.group); }
  net::NodeClient& client() { return *client_; }
  blob::BlobStore& blobs() { return *blobs_; }

  /// Submits and waits for inclusion; returns the block height.
  std::uint64_t commit(const ledger::TransactionEnvelope& tx) { return client_->commit(tx); }

  template <typename Body>
  std::uint64_t commit(const Body& body, const KeyFile& key) {
    auto nonce = client_->next_nonce(key.id);
    return commit(contracts::make_tx(body, key.id, nonce, key.sig));
  }

 private:
  ledger::Genesis genesis_;
  int lock_fd_ = -1;
  std::unique_ptr<net::Node> node_;
  std::unique_ptr<net::NodeClient> client_;
  std::unique_ptr<blob::BlobStore> blobs_;
};

KeyFile key_for(const Session& s, const std::string& file) {
  auto k = cli::load_key_file(file);
  if (k.group != s.genesis().group) throw CliError(kError, "key file group does not match the chain");
  return k;
}

const ledger::Actor& actor_or_throw(const ledger::LedgerState& st, const std::string& id) {
  auto it = st.actors.find(id);
  if (it == st.actors.end()) throw CliError(kError, "unknown actor " + id);
  return it->second;
}

void print_vitals(const Bytes& payload) {
  try {
    auto v = device::VitalsReading::parse(payload);
    std::cout << "vitals device=" << v.device_id << " seq=" << v.seq << " ts=" << v.ts
              << " heart_rate=" << v.heart_rate_bpm << " systolic=" << v.systolic_mmHg
              << " diastolic=" << v.diastolic_mmHg << " spo2=" << v.spo2_pct << " temp_mdeg=" << v.temp_mdegC
              << "\n";
  } catch (const DecodeError&) {
  }
}

std::string event_line(const ledger::AccessEvent& e) {
  return "event request=" + e.request_id + " grant=" + e.grant_id + " requester=" + e.requester +
         " record=" + e.record_id.hex() + " decision=" + e.decision.str() +
         " result=" + (e.result_blob_hash ? e.result_blob_hash->hex() : "-") + " height=" + std::to_string(e.height);
}

/// Replays a block list against genesis; throws CliError(kInvalidChain).
ledger::Chain replay_or_fail(const ledger::Genesis& g, const std::vector<Bytes>& raw) {
  try {
    return ledger::Chain::replay_bytes(g, raw);
  } catch (const ledger::BadChain& e) {
    throw CliError(kInvalidChain, "invalid height " + std::to_string(e.height) + " " + e.reason.str());
  }
}

/// Pulls every block from the node and replays it here, so a client does not
/// have to trust the node's state.
ledger::Chain verified_chain(Session& s) {
  auto tip = s.client().tip();
  std::vector<Bytes> raw;
  for (std::uint64_t h = 0; h <= tip.height; ++h) raw.push_back(s.client().block(h).serialize());
  auto chain = replay_or_fail(s.genesis(), raw);
  if (chain.tip().hash() != tip.hash || ledger::state_hash(chain.state()) != tip.state_hash)
    throw CliError(kInvalidChain, "invalid height " + std::to_string(tip.height) + " node tip disagrees with replay");
  return chain;
}

// --- commands --------------------------------------------------------------------

struct Common {
  std::string node;
  std::string key_file;
};

int cmd_init_genesis(const std::string& chain_id, const std::string& validators, const std::string& group,
                     std::uint64_t timestamp, bool force) {
  if (fs::exists(genesis_path()) && !force)
    throw CliError(kError, "genesis already exists at " + genesis_path().string() + " (use --force)");
  if (force) {
    fs::remove_all(home() / "chain");
    fs::remove(genesis_path());
  }
  SystemRandom rng;
  ledger::Genesis g;
  g.chain_id = chain_id;
  g.group = pre::group_id_from_string(group);
  g.timestamp = timestamp ? timestamp : unix_now();
  auto make_key = [&](const std::string& id) {
    KeyFile k;
    k.id = id;
    k.group = g.group;
    k.sig = generate_signing_key(rng).secret;
    cli::save_key_file(home() / "keys" / (id + ".json"), k);
    return k;
  };
  std::stringstream ss(validators);
  for (std::string id; std::getline(ss, id, ',');) {
    if (id.empty()) continue;
    g.validators.push_back({id, make_key(id).sig_pk()});
  }
  if (g.validators.empty()) throw CliError(kError, "at least one validator required");
  g.admin_id = "admin";
  g.admin_pk = make_key(g.admin_id).sig_pk();
  g.registrar_id = "registrar";
  g.registrar_pk = make_key(g.registrar_id).sig_pk();
  ledger::write_genesis(genesis_path(), g);
  std::cout << "genesis " << sha256(g.serialize()).hex() << "\n";
  std::cout << "chain_id " << g.chain_id << "\n";
  std::cout << "group " << pre::to_string(g.group) << "\n";
  for (const auto& v : g.validators) std::cout << "validator " << v.id << " " << to_hex(v.sig_pk.bytes) << "\n";
  std::cout << "admin " << (home() / "keys" / "admin.json").string() << "\n";
  std::cout << "registrar " << (home() / "keys" / "registrar.json").string() << "\n";
  return kOk;
}

int cmd_keygen(const std::string& id, const std::string& out, const std::string& group, bool no_pre) {
  SystemRandom rng;
  KeyFile k;
  k.id = id;
  if (!group.empty()) k.group = pre::group_id_from_string(group);
  else if (fs::exists(genesis_path())) k.group = ledger::read_genesis(genesis_path()).group;
  k.sig = generate_signing_key(rng).secret;
  if (!no_pre) k.pre_sk = pre::keygen(k.params(), rng).sk;
  fs::path file = out.empty() ? home() / "keys" / (id + ".json") : fs::path(out);
  if (fs::exists(file)) throw CliError(kError, file.string() + " already exists");
  cli::save_key_file(file, k);
  std::cout << "key " << id << " sig_pk " << to_hex(k.sig_pk().bytes);
  if (k.pre_sk) std::cout << " pre_pk " << to_hex(k.params().encode(k.params().pow_g(*k.pre_sk)));
  std::cout << "\nfile " << file.string() << "\n";
  return kOk;
}

int cmd_register_actor(const Common& c, const std::string& actor_key, const std::string& role_name) {
  Session s(c.node);
  auto admin = key_for(s, c.key_file);
  auto actor = key_for(s, actor_key);
  auto role = ledger::role_from_string(role_name);
  if (!role) {
    std::string upper;
    for (char ch : role_name) upper += static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    role = ledger::role_from_string(upper);
  }
  if (!role) throw CliError(kError, "unknown role " + role_name);
  contracts::RegisterActorBody body{actor.id, *role, actor.sig_pk(), {}};
  if (actor.pre_sk) body.pre_pk = s.params().encode(s.params().pow_g(*actor.pre_sk));
  auto h = s.commit(body, admin);
  std::cout << "registered " << actor.id << " " << ledger::to_string(*role) << " height " << h << "\n";
  return kOk;
}

int cmd_register_device(const Common& c, const std::string& device_key) {
  Session s(c.node);
  auto owner = key_for(s, c.key_file);
  auto dev = key_for(s, device_key);
  auto h = s.commit(contracts::RegisterDeviceBody{dev.id, dev.sig_pk()}, owner);
  std::cout << "device " << dev.id << " owner " << owner.id << " height " << h << "\n";
  return kOk;
}

int cmd_issue_attr(const Common& c, const std::string& subject, const std::string& attr, bool revoke) {
  Session s(c.node);
  auto registrar = key_for(s, c.key_file);
  std::uint64_t h;
  if (revoke) {
    h = s.commit(contracts::RevokeAttributeBody{subject, attr}, registrar);
  } else {
    auto issued_at = s.client().tip().height;
    h = s.commit(contracts::IssueAttributeBody{policy::issue_credential(registrar.sig, subject, attr, issued_at)},
                 registrar);
  }
  std::cout << "attribute " << subject << " " << attr << (revoke ? " revoked" : " issued") << " height " << h << "\n";
  return kOk;
}

int cmd_new_stream(const Common& c, const std::string& stream) {
  Session s(c.node);
  auto owner = key_for(s, c.key_file);
  if (owner.streams.contains(stream)) throw CliError(kError, "key file already holds stream " + stream);
  SystemRandom rng;
  auto kp = pre::keygen(s.params(), rng);
  owner.streams[stream] = kp.sk;
  // Keep the secret before the chain learns the public half.
  cli::save_key_file(c.key_file, owner);
  auto h = s.commit(contracts::RegisterStreamBody{stream, s.params().encode(kp.pk)}, owner);
  std::cout << "stream " << stream << " owner " << owner.id << " height " << h << "\n";
  return kOk;
}

int cmd_ingest(const Common& c, const std::string& owner, const std::string& stream, std::size_t count,
               std::uint64_t seed, const std::string& profile_file) {
  Session s(c.node);
  auto dev = key_for(s, c.key_file);
  auto st = s.client().state();
  auto it = st.streams.find(stream);
  if (it == st.streams.end()) throw CliError(kError, "unknown stream " + stream);
  auto profile = profile_file.empty() ? device::VitalsProfile{} : device::load_profile(profile_file);
  std::uint64_t first_seq = 1;
  for (const auto& [id, rec] : st.records)
    if (rec.device_id == dev.id) ++first_seq;
  auto readings = device::generate(profile, dev.id, seed, count, first_seq);
  device::DeviceIdentity identity{dev.id, dev.sig, owner, stream};
  auto ids = device::ingest(readings, identity, s.params(), s.params().decode_element(it->second.stream_pk),
                            s.client(), s.blobs());
  for (const auto& id : ids) std::cout << "record " << id.hex() << "\n";
  std::cout << "ingested " << ids.size() << " height " << s.client().tip().height << "\n";
  return kOk;
}

int cmd_grant(const Common& c, const std::string& stream, const std::string& delegatee, const std::string& proxy,
              const std::string& policy_text, std::uint64_t expiry, std::string grant_id) {
  Session s(c.node);
  auto owner = key_for(s, c.key_file);
  auto sk = owner.streams.find(stream);
  if (sk == owner.streams.end()) throw CliError(kError, "key file holds no secret for stream " + stream);
  auto st = s.client().state();
  const auto& d = actor_or_throw(st, delegatee);
  if (d.pre_pk.empty()) throw CliError(kError, delegatee + " has no PRE key");
  if (grant_id.empty()) grant_id = random_id("g-");
  SystemRandom rng;
  auto body = contracts::prepare_grant(s.params(), sk->second, s.params().decode_element(d.pre_pk), grant_id, stream,
                                       delegatee, policy_text, proxy, expiry, rng);
  auto h = s.commit(body, owner);
  std::cout << "grant " << grant_id << " stream " << stream << " delegatee " << delegatee << " height " << h << "\n";
  return kOk;
}

int cmd_revoke(const Common& c, const std::string& grant_id) {
  Session s(c.node);
  auto owner = key_for(s, c.key_file);
  auto h = s.commit(contracts::RevokeAccessBody{grant_id}, owner);
  std::cout << "revoked " << grant_id << " height " << h << "\n";
  return kOk;
}

/// Submits one request per record (all records of the grant's stream when
/// `records` is empty) and returns the request ids.
std::vector<std::string> submit_requests(Session& s, const KeyFile& who, const std::string& grant_id,
                                         std::vector<std::string> records, const std::string& request_id) {
  auto st = s.client().state();
  auto g = st.grants.find(grant_id);
  if (g == st.grants.end()) throw CliError(kError, "unknown grant " + grant_id);
  if (records.empty())
    for (const auto& rec : contracts::query_records(st, g->second.stream_id)) records.push_back(rec.record_id.hex());
  if (!request_id.empty() && records.size() != 1)
    throw CliError(kError, "--request-id needs exactly one record");
  std::vector<std::string> ids;
  std::vector<Digest> txs;
  auto nonce = s.client().next_nonce(who.id);
  for (const auto& rec : records) {
    auto id = request_id.empty() ? random_id(who.id + "-") : request_id;
    contracts::AccessRequestBody body{id, grant_id, Digest::from_hex(rec)};
    txs.push_back(s.client().submit(contracts::make_tx(body, who.id, nonce++, who.sig)));
    ids.push_back(id);
  }
  for (const auto& t : txs) s.client().wait_for(t);
  return ids;
}

int cmd_request_access(const Common& c, const std::string& grant_id, const std::vector<std::string>& records,
                       const std::string& request_id) {
  Session s(c.node);
  auto who = key_for(s, c.key_file);
  auto ids = submit_requests(s, who, grant_id, records, request_id);
  auto st = s.client().state();
  bool denied = false;
  for (const auto& id : ids) {
    const auto& req = st.requests.at(id);
    denied |= !req.decision.is_granted();
    std::cout << "request " << id << " record " << req.record_id.hex() << " " << req.decision.str() << "\n";
  }
  return denied ? kDenied : kOk;
}

int cmd_fetch(const Common& c, std::vector<std::string> request_ids, const std::string& grant_id,
              const std::vector<std::string>& records, const std::string& out_dir, std::uint64_t wait_ms) {
  KeyFile who;
  {
    Session s(c.node);
    who = key_for(s, c.key_file);
    if (!who.pre_sk) throw CliError(kError, "key file has no PRE secret");
    if (!grant_id.empty()) {
      auto more = submit_requests(s, who, grant_id, records, "");
      request_ids.insert(request_ids.end(), more.begin(), more.end());
    }
  }
  if (request_ids.empty()) throw CliError(kError, "nothing to fetch (give --request or --grant)");
  if (!out_dir.empty()) fs::create_directories(out_dir);

  auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(wait_ms);
  std::set<std::string> remaining(request_ids.begin(), request_ids.end());
  int rc = kOk;
  for (;;) {
    {
      // Reopened per poll so a local-mode proxy can take the lock meanwhile.
      Session s(c.node);
      auto st = s.client().state();
      for (auto it = remaining.begin(); it != remaining.end();) {
        auto req = st.requests.find(*it);
        if (req == st.requests.end()) throw CliError(kError, "unknown request " + *it);
        if (req->second.requester != who.id) throw CliError(kError, "request " + *it + " belongs to another actor");
        std::optional<ledger::AccessEvent> event;
        for (const auto& e : st.audit_log)
          if (e.request_id == *it) event = e;
        auto decision = event ? event->decision : req->second.decision;
        if (!decision.is_granted()) {
          std::cout << "denied " << *it << " " << decision.str() << "\n";
          rc = kDenied;
        } else if (event) {
          auto blob = s.blobs().get(*event->result_blob_hash);
          auto payload = pre::open_delegated(s.params(), *who.pre_sk, pre::parse_delegated(s.params(), blob));
          std::cout << "record " << *it << " " << req->second.record_id.hex() << " bytes " << payload.size() << " sha256 "
                    << sha256(payload).hex() << "\n";
          print_vitals(payload);
          if (!out_dir.empty()) {
            std::ofstream f(fs::path(out_dir) / (req->second.record_id.hex() + ".bin"), std::ios::binary);
            f.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
          }
        } else {
          ++it;
          continue;
        }
        it = remaining.erase(it);
      }
    }
    if (remaining.empty()) return rc;
    if (std::chrono::steady_clock::now() >= deadline) {
      for (const auto& id : remaining) std::cout << "pending " << id << "\n";
      return rc == kOk ? kPending : rc;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(200));
  }
}

int cmd_audit(const Common& c, const std::string& grant, const std::string& requester, const std::string& request,
              const std::string& decision) {
  Session s(c.node);
  auto chain = verified_chain(s);
  contracts::AuditFilter f;
  if (!grant.empty()) f.grant_id = grant;
  if (!requester.empty()) f.requester = requester;
  if (!request.empty()) f.request_id = request;
  if (decision == "granted") f.decision = contracts::AuditFilter::DecisionFilter::Granted;
  else if (decision == "denied") f.decision = contracts::AuditFilter::DecisionFilter::Denied;
  else if (!decision.empty()) throw CliError(kError, "--decision must be granted or denied");
  auto events = contracts::query_audit(chain.state(), f);
  for (const auto& e : events) std::cout << event_line(e) << "\n";
  std::cout << "events " << events.size() << " height " << chain.height() << "\n";
  return kOk;
}

int cmd_verify_chain(const std::string& node, const std::string& chain_dir) {
  auto g = load_genesis();
  if (!node.empty()) {
    Session s(node);
    auto chain = verified_chain(s);
    std::cout << "valid height " << chain.height() << " state " << ledger::state_hash(chain.state()).hex() << "\n";
    return kOk;
  }
  fs::path dir = chain_dir.empty() ? home() / "chain" : fs::path(chain_dir);
  if (!fs::exists(dir)) throw CliError(kError, "no chain at " + dir.string());
  ledger::ChainStore store(dir);
  auto raw = store.read_all();
  auto head = store.head();
  auto chain = replay_or_fail(g, raw);
  if (head && raw.size() != *head + 1)
    throw CliError(kInvalidChain, "invalid height " + std::to_string(raw.size()) + " block file missing");
  std::cout << "valid height " << chain.height() << " state " << ledger::state_hash(chain.state()).hex() << "\n";
  return kOk;
}

int cmd_run_node(const std::string& id, const std::string& listen, const std::string& peers,
                 const std::string& key_file, const std::string& chain_dir, const std::string& blob_dir,
                 std::uint32_t tick_ms, std::uint32_t sync_ms) {
  auto g = load_genesis();
  std::vector<net::ValidatorIdentity> keys;
  fs::path kf = key_file.empty() ? home() / "keys" / (id + ".json") : fs::path(key_file);
  bool validator = std::any_of(g.validators.begin(), g.validators.end(), [&](auto& v) { return v.id == id; });
  if (validator) keys.push_back({id, cli::load_key_file(kf).sig});
  auto store = std::make_shared<blob::FileBlobStore>(blob_dir.empty() ? home() / "blobs" : fs::path(blob_dir));
  net::Node node(id, g, store, keys, chain_dir.empty() ? home() / "nodes" / id / "chain" : fs::path(chain_dir));
  std::vector<net::Endpoint> peer_list;
  std::stringstream ss(peers);
  for (std::string p; std::getline(ss, p, ',');)
    if (!p.empty()) peer_list.push_back(net::Endpoint::parse(p));
  net::TcpServer server(node, net::Endpoint::parse(listen));
  net::NodeService service(node, peer_list,
                           net::ServiceOptions{std::chrono::milliseconds(tick_ms), std::chrono::milliseconds(sync_ms)});
  service.start();
  std::cout << "listening 127.0.0.1:" << server.port() << " id " << id << " height " << node.height()
            << (validator ? " validator" : " observer") << std::endl;
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  service.stop();
  server.stop();
  std::cout << "stopped height " << node.height() << std::endl;
  return kOk;
}

int cmd_run_proxy(const Common& c, std::uint32_t interval_ms, bool once) {
  auto round = [&] {
    Session s(c.node);
    auto key = key_for(s, c.key_file);
    proxy::ProxyService svc(key.id, key.sig, s.client(), s.blobs());
    auto r = svc.run_once();
    if (once || r.granted || r.denied || r.skipped)
      std::cout << "round granted " << r.granted << " denied " << r.denied << " skipped " << r.skipped << std::endl;
  };
  if (once) {
    round();
    return kOk;
  }
  while (!g_stop) {
    try {
      round();
    } catch (const std::exception& e) {
      std::cerr << "proxy: " << e.what() << std::endl;
    }
    for (std::uint32_t waited = 0; waited < interval_ms && !g_stop; waited += 50)
      std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"medledger: permissioned ledger for IoT health records with proxy re-encryption"};
  app.require_subcommand(1);
  std::function<int()> run;

  Common common;
  auto add_common = [&](CLI::App* sub, bool needs_key) {
    sub->add_option("--node", common.node, "host:port of a running node (default: local chain)");
    auto* k = sub->add_option("--key-file", common.key_file, "signing key file");
    if (needs_key) k->required();
  };

  {
    auto* sub = app.add_subcommand("init-genesis", "create genesis and validator/admin/registrar keys");
    static std::string chain_id = "medledger-dev", validators = "v0,v1,v2,v3", group = "prod";
    static std::uint64_t ts = 0;
    static bool force = false;
    sub->add_option("--chain-id", chain_id);
    sub->add_option("--validators", validators, "comma-separated validator ids");
    sub->add_option("--group", group, "toy or prod");
    sub->add_option("--timestamp", ts);
    sub->add_flag("--force", force, "overwrite an existing genesis and local chain");
    sub->callback([&] { run = [] { return cmd_init_genesis(chain_id, validators, group, ts, force); }; });
  }
  {
    auto* sub = app.add_subcommand("keygen", "create a key file");
    static std::string id, out, group;
    static bool no_pre = false;
    sub->add_option("--id", id)->required();
    sub->add_option("--out", out);
    sub->add_option("--group", group);
    sub->add_flag("--no-pre", no_pre, "signing key only");
    sub->callback([&] { run = [] { return cmd_keygen(id, out, group, no_pre); }; });
  }
  {
    auto* sub = app.add_subcommand("register-actor", "admin registers an actor");
    static std::string actor_key, role;
    add_common(sub, true);
    sub->add_option("--actor-key", actor_key, "key file of the new actor")->required();
    sub->add_option("--role", role)->required();
    sub->callback([&] { run = [&] { return cmd_register_actor(common, actor_key, role); }; });
  }
  {
    auto* sub = app.add_subcommand("register-device", "patient registers a device");
    static std::string device_key;
    add_common(sub, true);
    sub->add_option("--device-key", device_key)->required();
    sub->callback([&] { run = [&] { return cmd_register_device(common, device_key); }; });
  }
  {
    auto* sub = app.add_subcommand("issue-attr", "registrar issues or revokes an attribute");
    static std::string subject, attr;
    static bool revoke = false;
    add_common(sub, true);
    sub->add_option("--subject", subject)->required();
    sub->add_option("--attr", attr)->required();
    sub->add_flag("--revoke", revoke);
    sub->callback([&] { run = [&] { return cmd_issue_attr(common, subject, attr, revoke); }; });
  }
  {
    auto* sub = app.add_subcommand("new-stream", "patient creates a record stream");
    static std::string stream;
    add_common(sub, true);
    sub->add_option("--stream", stream)->required();
    sub->callback([&] { run = [&] { return cmd_new_stream(common, stream); }; });
  }
  {
    auto* sub = app.add_subcommand("ingest", "device generates, seals and stores readings");
    static std::string owner, stream, profile;
    static std::size_t count = 1;
    static std::uint64_t seed = 1;
    add_common(sub, true);
    sub->add_option("--owner", owner)->required();
    sub->add_option("--stream", stream)->required();
    sub->add_option("--count", count);
    sub->add_option("--seed", seed);
    sub->add_option("--profile", profile, "vitals profile JSON");
    sub->callback([&] { run = [&] { return cmd_ingest(common, owner, stream, count, seed, profile); }; });
  }
  {
    auto* sub = app.add_subcommand("grant", "patient grants a delegatee access to a stream");
    static std::string stream, delegatee, proxy_id, policy_text, grant_id;
    static std::uint64_t expiry = 0;
    add_common(sub, true);
    sub->add_option("--stream", stream)->required();
    sub->add_option("--delegatee", delegatee)->required();
    sub->add_option("--proxy", proxy_id)->required();
    sub->add_option("--policy", policy_text)->required();
    sub->add_option("--expiry-height", expiry, "0 = never");
    sub->add_option("--grant-id", grant_id);
    sub->callback([&] {
      run = [&] { return cmd_grant(common, stream, delegatee, proxy_id, policy_text, expiry, grant_id); };
    });
  }
  {
    auto* sub = app.add_subcommand("revoke", "patient revokes a grant");
    static std::string grant_id;
    add_common(sub, true);
    sub->add_option("--grant", grant_id)->required();
    sub->callback([&] { run = [&] { return cmd_revoke(common, grant_id); }; });
  }
  {
    auto* sub = app.add_subcommand("request-access", "delegatee requests records under a grant");
    static std::string grant_id, request_id;
    static std::vector<std::string> records;
    add_common(sub, true);
    sub->add_option("--grant", grant_id)->required();
    sub->add_option("--record", records, "record id (hex); default all records of the stream");
    sub->add_option("--request-id", request_id);
    sub->callback([&] { run = [&] { return cmd_request_access(common, grant_id, records, request_id); }; });
  }
  {
    auto* sub = app.add_subcommand("fetch", "delegatee pulls and decrypts served records");
    static std::vector<std::string> requests, records;
    static std::string grant_id, out_dir;
    static std::uint64_t wait_ms = 0;
    add_common(sub, true);
    sub->add_option("--request", requests, "request id(s) already on chain");
    sub->add_option("--grant", grant_id, "request every record of this grant first");
    sub->add_option("--record", records);
    sub->add_option("--out", out_dir, "directory for decrypted payloads");
    sub->add_option("--wait-ms", wait_ms, "how long to wait for the proxy");
    sub->callback([&] { run = [&] { return cmd_fetch(common, requests, grant_id, records, out_dir, wait_ms); }; });
  }
  {
    auto* sub = app.add_subcommand("audit", "verify the chain and list access events");
    static std::string grant, requester, request, decision;
    add_common(sub, false);
    sub->add_option("--grant", grant);
    sub->add_option("--requester", requester);
    sub->add_option("--request", request);
    sub->add_option("--decision", decision, "granted or denied");
    sub->callback([&] { run = [&] { return cmd_audit(common, grant, requester, request, decision); }; });
  }
  {
    auto* sub = app.add_subcommand("verify-chain", "replay and check every block");
    static std::string chain_dir;
    sub->add_option("--node", common.node);
    sub->add_option("--chain-dir", chain_dir);
    sub->callback([&] { run = [&] { return cmd_verify_chain(common.node, chain_dir); }; });
  }
  {
    auto* sub = app.add_subcommand("run-node", "serve a node over TCP");
    static std::string id, listen = "127.0.0.1:7000", peers, chain_dir, blob_dir;
    static std::uint32_t tick_ms = 200, sync_ms = 1000;
    sub->add_option("--id", id)->required();
    sub->add_option("--listen", listen);
    sub->add_option("--peers", peers, "comma-separated host:port list");
    sub->add_option("--key-file", common.key_file);
    sub->add_option("--chain-dir", chain_dir);
    sub->add_option("--blob-dir", blob_dir);
    sub->add_option("--tick-ms", tick_ms);
    sub->add_option("--sync-ms", sync_ms);
    sub->callback([&] {
      run = [&] { return cmd_run_node(id, listen, peers, common.key_file, chain_dir, blob_dir, tick_ms, sync_ms); };
    });
  }
  {
    auto* sub = app.add_subcommand("run-proxy", "serve access requests as a proxy");
    static std::uint32_t interval_ms = 500;
    static bool once = false;
    add_common(sub, true);
    sub->add_option("--interval-ms", interval_ms);
    sub->add_flag("--once", once, "one round, then exit");
    sub->callback([&] { run = [&] { return cmd_run_proxy(common, interval_ms, once); }; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  std::signal(SIGINT, [](int) { g_stop = true; });
  std::signal(SIGTERM, [](int) { g_stop = true; });
  try {
    return run();
  } catch (const CliError& e) {
    std::cout << (e.code == kInvalidChain ? "" : "error ") << e.what() << "\n";
    return e.code;
  } catch (const net::RequestFailed& e) {
    if (e.code() == net::WireErrc::Rejected) {
      std::cout << "rejected " << e.detail() << "\n";
      return kDenied;
    }
    std::cout << "error " << e.what() << "\n";
    return kError;
  } catch (const std::exception& e) {
    std::cout << "error " << e.what() << "\n";
    return kError;
  }
}
