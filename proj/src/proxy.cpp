#include "medledger/proxy.hpp"

#include <future>
#include <map>
#include <thread>

namespace medledger::proxy {

using contracts::AccessQuery;
using ledger::Decision;
using ledger::DenyReason;

namespace {

bool assigned_to(const LedgerState& state, const AccessRequestEntry& req, const std::string& proxy_id) {
  auto g = state.grants.find(req.grant_id);
  return !req.logged && g != state.grants.end() && g->second.proxy_id == proxy_id;
}

Decision current(const LedgerState& state, const AccessRequestEntry& req, std::uint64_t height) {
  return contracts::authorize(state, AccessQuery{req.grant_id, req.record_id, req.requester}, height);
}

}  // namespace

std::vector<AccessRequestEntry> scan(const LedgerState& state, const std::string& proxy_id,
                                     std::uint64_t height) {
  std::vector<AccessRequestEntry> out;
  for (const auto& [id, req] : state.requests) {
    if (!assigned_to(state, req, proxy_id) || !req.decision.is_granted()) continue;
    if (current(state, req, height).is_granted()) out.push_back(req);
  }
  return out;
}

std::vector<std::pair<AccessRequestEntry, DenyReason>> scan_denied(const LedgerState& state,
                                                                   const std::string& proxy_id,
                                                                   std::uint64_t height) {
  std::vector<std::pair<AccessRequestEntry, DenyReason>> out;
  for (const auto& [id, req] : state.requests) {
    if (!assigned_to(state, req, proxy_id)) continue;
    auto now = current(state, req, height);
    if (now.denied) out.emplace_back(req, *now.denied);
    else if (req.decision.denied) out.emplace_back(req, *req.decision.denied);
  }
  return out;
}

Served serve(const LedgerState& state, const AccessRequestEntry& request, blob::BlobStore& blobs) {
  const auto& params = state.params();
  const auto& grant = state.grants.at(request.grant_id);
  const auto& record = state.records.at(request.record_id);
  Served out;
  out.log.request_id = request.request_id;
  Bytes sealed_bytes;
  try {
    sealed_bytes = blobs.get(record.blob_hash);
  } catch (const blob::BlobError& e) {
    out.log.decision = Decision::deny(e.kind() == blob::BlobError::Kind::NotFound ? DenyReason::MissingBlob
                                                                                  : DenyReason::MalformedRecord);
    return out;
  }
  try {
    auto sealed = pre::parse_sealed(params, sealed_bytes);
    auto rk1 = params.decode_scalar(grant.rk1);
    pre::DelegatedRecord result{pre::reencrypt_record(params, sealed, rk1),
                                pre::parse_wrapped(params, grant.wrapped_r)};
    out.result = blobs.put(pre::serialize(params, result));
    out.log.decision = Decision::granted();
    out.log.result_blob_hash = out.result->hash;
  } catch (const pre::Error&) {
    out.log.decision = Decision::deny(DenyReason::MalformedRecord);
  }
  return out;
}

ProxyService::ProxyService(std::string proxy_id, SigSecretKey key, net::NodeClient& node, blob::BlobStore& blobs,
                           ProxyOptions options)
    : id_(std::move(proxy_id)), key_(key), node_(node), blobs_(blobs), options_(options) {}

RoundReport ProxyService::run_once() {
  RoundReport report;
  auto state = node_.state();
  auto height = node_.tip().height + 1;
  auto granted = scan(state, id_, height);
  auto denied = scan_denied(state, id_, height);

  std::vector<contracts::AccessLogBody> logs;
  std::size_t budget = options_.max_per_round ? options_.max_per_round : SIZE_MAX;

  // Work on distinct grants proceeds in parallel; requests under one grant
  // stay in order.
  std::map<std::string, std::vector<AccessRequestEntry>> by_grant;
  std::size_t taken = 0;
  for (const auto& req : granted) {
    if (taken++ >= budget) break;
    by_grant[req.grant_id].push_back(req);
  }
  std::vector<std::future<std::vector<Served>>> jobs;
  for (const auto& [grant_id, reqs] : by_grant) {
    jobs.push_back(std::async(by_grant.size() > 1 ? std::launch::async : std::launch::deferred,
                              [this, &state, reqs = reqs] {
                                std::vector<Served> out;
                                for (const auto& r : reqs) out.push_back(serve(state, r, blobs_));
                                return out;
                              }));
  }
  for (auto& job : jobs) {
    for (auto& s : job.get()) {
      if (options_.keep_transcript) {
        const auto& rec = state.records.at(state.requests.at(s.log.request_id).record_id);
        const auto& grant = state.grants.at(state.requests.at(s.log.request_id).grant_id);
        if (blobs_.has(rec.blob_hash)) transcript_.push_back(blobs_.get(rec.blob_hash));
        transcript_.push_back(grant.rk1);
        transcript_.push_back(grant.wrapped_r);
        if (s.result) transcript_.push_back(blobs_.get(s.result->hash));
      }
      logs.push_back(std::move(s.log));
    }
  }
  for (const auto& [req, reason] : denied) {
    if (taken++ >= budget) break;
    contracts::AccessLogBody log;
    log.request_id = req.request_id;
    log.decision = Decision::deny(reason);
    logs.push_back(std::move(log));
  }

  if (logs.empty()) return report;
  auto nonce = node_.next_nonce(id_);
  for (const auto& log : logs) {
    auto tx = contracts::make_tx(log, id_, nonce, key_);
    try {
      report.tx_ids.push_back(node_.submit(tx));
      ++nonce;
      if (log.decision.is_granted()) ++report.granted;
      else ++report.denied;
    } catch (const net::RequestFailed&) {
      // Already logged or a stale nonce from an interrupted run: the next
      // round starts from fresh state.
      ++report.skipped;
    }
  }
  if (options_.wait_for_inclusion) {
    for (const auto& id : report.tx_ids) {
      try {
        node_.wait_for(id);
      } catch (const net::NotIncluded&) {
        ++report.skipped;
      }
    }
  }
  return report;
}

void ProxyService::run_loop(std::chrono::milliseconds interval, const std::atomic<bool>& stop,
                            const std::function<void(const RoundReport&)>& on_round) {
  while (!stop.load()) {
    try {
      auto report = run_once();
      if (on_round) on_round(report);
    } catch (const std::exception&) {
      // Node unreachable or mid-restart; try again next interval.
    }
    std::this_thread::sleep_for(interval);
  }
}

}  // namespace medledger::proxy
