#pragma once

// Deterministic ledger fixtures shared by the test binaries.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "medledger/chain.hpp"
#include "medledger/contracts.hpp"
#include "medledger/credential.hpp"
#include "medledger/device.hpp"

namespace fixture {

using namespace medledger;
using contracts::Rejection;
using ledger::Role;
using ledger::TransactionEnvelope;

struct Party {
  std::string id;
  SigningKey sig;
  std::optional<pre::KeyPair> pre;
};

inline SigningKey key_from_label(const std::string& label) {
  auto d = sha256("fixture-key:" + label);
  SigSecretKey s;
  std::copy(d.bytes.begin(), d.bytes.end(), s.seed.begin());
  return SigningKey::from_seed(s);
}

inline ledger::Genesis make_genesis(pre::GroupId group, std::size_t validators,
                                    std::vector<SigningKey>* keys = nullptr) {
  ledger::Genesis g;
  g.chain_id = "fixture";
  g.group = group;
  g.timestamp = 1'700'000'000;
  for (std::size_t i = 0; i < validators; ++i) {
    auto id = "v" + std::to_string(i);
    auto k = key_from_label(id);
    g.validators.push_back({id, k.public_key});
    if (keys) keys->push_back(k);
  }
  g.admin_id = "admin";
  g.admin_pk = key_from_label("admin").public_key;
  g.registrar_id = "registrar";
  g.registrar_pk = key_from_label("registrar").public_key;
  return g;
}

/// A chain driven directly through build_block, one block per seal().
class Ledger {
 public:
  explicit Ledger(pre::GroupId group = pre::GroupId::Toy, std::size_t validators = 4, std::uint64_t seed = 7)
      : genesis(make_genesis(group, validators, &validator_keys)),
        admin{"admin", key_from_label("admin"), std::nullopt},
        registrar{"registrar", key_from_label("registrar"), std::nullopt},
        rng(seed),
        chain(genesis) {}

  const pre::GroupParams& params() const { return pre::GroupParams::get(genesis.group); }
  const ledger::LedgerState& state() const { return chain.state(); }
  std::uint64_t height() const { return chain.height(); }

  template <typename Body>
  TransactionEnvelope tx(const Body& body, const Party& sender) {
    return contracts::make_tx(body, sender.id, ++nonces[sender.id], sender.sig.secret);
  }

  /// Builds and appends one block with `txs`; returns the rejections of the
  /// excluded ones (their nonces are handed back).
  std::vector<Rejection> seal(const std::vector<TransactionEnvelope>& txs) {
    auto h = chain.height() + 1;
    const auto& proposer = ledger::select_proposer(genesis.validators, h);
    std::size_t idx = 0;
    while (genesis.validators[idx].id != proposer.id) ++idx;
    timestamp += 5;
    auto built = chain.build_next(txs, timestamp, proposer.id, validator_keys[idx].secret);
    std::vector<Rejection> out;
    for (const auto& [id, why] : built.excluded) {
      out.push_back(why);
      for (const auto& t : txs)
        if (t.tx_id() == id) --nonces[t.sender];
    }
    if (auto rejected = chain.append(built.block)) throw std::logic_error("own block rejected: " + rejected->str());
    return out;
  }

  /// Seals a single transaction; nullopt when it applied.
  std::optional<Rejection> submit(const TransactionEnvelope& t) {
    auto r = seal({t});
    if (r.empty()) return std::nullopt;
    return r.front();
  }

  template <typename Body>
  std::optional<Rejection> submit(const Body& body, const Party& sender) {
    return submit(tx(body, sender));
  }

  Party make_party(const std::string& id, bool with_pre = true) {
    Party p{id, key_from_label(id), std::nullopt};
    if (with_pre) p.pre = pre::keygen(params(), rng);
    return p;
  }

  Party add_actor(const std::string& id, Role role, bool with_pre = true) {
    auto p = make_party(id, with_pre && role != Role::Proxy);
    contracts::RegisterActorBody b{id, role, p.sig.public_key, {}};
    if (p.pre) b.pre_pk = params().encode(p.pre->pk);
    expect_ok(submit(b, admin));
    return p;
  }

  Party add_device(const Party& owner, const std::string& id) {
    auto p = make_party(id, false);
    expect_ok(submit(contracts::RegisterDeviceBody{id, p.sig.public_key}, owner));
    return p;
  }

  pre::KeyPair add_stream(const Party& owner, const std::string& stream_id) {
    auto kp = pre::keygen(params(), rng);
    expect_ok(submit(contracts::RegisterStreamBody{stream_id, params().encode(kp.pk)}, owner));
    return kp;
  }

  void issue(const std::string& subject, const std::string& name) {
    auto cred = policy::issue_credential(registrar.sig.secret, subject, name, chain.height());
    expect_ok(submit(contracts::IssueAttributeBody{cred}, registrar));
  }

  /// Seals `payload` under the stream key, stores it in `blobs` (if given)
  /// and records it on-chain signed by `signer`.
  Digest store(const Party& signer, const Party& owner, const std::string& stream_id, const pre::Element& stream_pk,
               ByteView payload, const std::string& device_id = {}, std::map<Digest, Bytes>* blobs = nullptr) {
    auto sealed = pre::seal_record(params(), stream_pk, payload, device::record_context(stream_id), rng);
    auto bytes = pre::serialize(params(), sealed);
    auto id = sha256(bytes);
    if (blobs) (*blobs)[id] = bytes;
    expect_ok(submit(contracts::StoreRecordBody{id, stream_id, owner.id, device_id, bytes.size()}, signer));
    return id;
  }

  contracts::GrantAccessBody grant_body(const pre::KeyPair& stream, const Party& delegatee, const std::string& grant_id,
                                        const std::string& stream_id, const std::string& policy,
                                        const std::string& proxy_id, std::uint64_t expiry = 0) {
    return contracts::prepare_grant(params(), stream.sk, delegatee.pre->pk, grant_id, stream_id, delegatee.id,
                                    policy, proxy_id, expiry, rng);
  }

  static void expect_ok(const std::optional<Rejection>& r) {
    if (r) throw std::logic_error("fixture transaction rejected: " + r->str());
  }

  std::vector<SigningKey> validator_keys;
  ledger::Genesis genesis;
  Party admin;
  Party registrar;
  SeededRandom rng;
  ledger::Chain chain;
  std::map<std::string, std::uint64_t> nonces;
  std::uint64_t timestamp = 1'700'000'000;
};

}  // namespace fixture
