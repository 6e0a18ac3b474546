#include "medledger/device.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "medledger/contracts.hpp"

namespace medledger::device {

using nlohmann::json;

void VitalsReading::encode(Writer& w) const {
  w.str(device_id).u64(seq);
  for (auto v : {heart_rate_bpm, systolic_mmHg, diastolic_mmHg, spo2_pct, temp_mdegC})
    w.u32(static_cast<std::uint32_t>(v));
  w.u64(ts);
}

VitalsReading VitalsReading::decode(Reader& r) {
  VitalsReading v;
  v.device_id = r.str();
  v.seq = r.u64();
  v.heart_rate_bpm = static_cast<std::int32_t>(r.u32());
  v.systolic_mmHg = static_cast<std::int32_t>(r.u32());
  v.diastolic_mmHg = static_cast<std::int32_t>(r.u32());
  v.spo2_pct = static_cast<std::int32_t>(r.u32());
  v.temp_mdegC = static_cast<std::int32_t>(r.u32());
  v.ts = r.u64();
  return v;
}

Bytes VitalsReading::serialize() const {
  Writer w;
  encode(w);
  return std::move(w).take();
}

VitalsReading VitalsReading::parse(ByteView raw) { return decode_exact<VitalsReading>(raw); }

namespace {

void check_range(const char* name, const VitalRange& r, std::int32_t lo, std::int32_t hi) {
  std::string n(name);
  if (r.min > r.max) throw std::invalid_argument(n + ": min exceeds max");
  if (r.start < r.min || r.start > r.max) throw std::invalid_argument(n + ": start outside range");
  if (r.step < 0) throw std::invalid_argument(n + ": negative step");
  if (r.min < lo || r.max > hi)
    throw std::invalid_argument(n + ": range outside [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
}

json range_json(const VitalRange& r) {
  return {{"min", r.min}, {"max", r.max}, {"start", r.start}, {"step", r.step}};
}

VitalRange range_from(const json& j, const VitalRange& fallback) {
  VitalRange r = fallback;
  r.min = j.value("min", r.min);
  r.max = j.value("max", r.max);
  r.start = j.value("start", r.start);
  r.step = j.value("step", r.step);
  return r;
}

// Uniform draw in [-step, step]; modulo bias is irrelevant at these sizes.
std::int32_t delta(std::mt19937_64& rng, std::int32_t step) {
  if (step == 0) return 0;
  auto span = static_cast<std::uint64_t>(2 * step + 1);
  return static_cast<std::int32_t>(rng() % span) - step;
}

// lo..hi always contains value, so clamping never stretches a move past the step.
std::int32_t walk(std::mt19937_64& rng, std::int32_t value, const VitalRange& r, std::int32_t lo, std::int32_t hi) {
  return std::clamp(value + delta(rng, r.step), lo, hi);
}

std::int32_t walk(std::mt19937_64& rng, std::int32_t value, const VitalRange& r) {
  return walk(rng, value, r, r.min, r.max);
}

/// Counter-mode HKDF stream keyed by (device key, reading).
class DerivedRandom final : public RandomSource {
 public:
  explicit DerivedRandom(Bytes ikm) : ikm_(std::move(ikm)) {}

  void fill(std::span<std::uint8_t> out) override {
    Writer w;
    w.raw(ikm_).u32(counter_++);
    auto block = hkdf_sha256(w.data(), "device-seal", out.size());
    std::copy(block.begin(), block.end(), out.begin());
  }

 private:
  Bytes ikm_;
  std::uint32_t counter_ = 0;
};

}  // namespace

void VitalsProfile::validate() const {
  check_range("heart_rate", heart_rate, 20, 250);
  check_range("systolic", systolic, 50, 260);
  check_range("diastolic", diastolic, 20, 160);
  check_range("spo2", spo2, 50, 100);
  check_range("temp_mdeg", temp_mdeg, 30000, 45000);
  if (diastolic.min >= systolic.min || diastolic.start >= systolic.start)
    throw std::invalid_argument("diastolic range must sit below systolic");
  if (interval_s == 0) throw std::invalid_argument("interval_s must be positive");
}

VitalsProfile parse_profile(const std::string& text) {
  VitalsProfile p;
  try {
    auto j = json::parse(text);
    if (j.contains("heart_rate")) p.heart_rate = range_from(j["heart_rate"], p.heart_rate);
    if (j.contains("systolic")) p.systolic = range_from(j["systolic"], p.systolic);
    if (j.contains("diastolic")) p.diastolic = range_from(j["diastolic"], p.diastolic);
    if (j.contains("spo2")) p.spo2 = range_from(j["spo2"], p.spo2);
    if (j.contains("temp_mdeg")) p.temp_mdeg = range_from(j["temp_mdeg"], p.temp_mdeg);
    p.start_ts = j.value("start_ts", p.start_ts);
    p.interval_s = j.value("interval_s", p.interval_s);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("profile: ") + e.what());
  }
  p.validate();
  return p;
}

std::string profile_to_json(const VitalsProfile& p) {
  json j{{"heart_rate", range_json(p.heart_rate)}, {"systolic", range_json(p.systolic)},
         {"diastolic", range_json(p.diastolic)},   {"spo2", range_json(p.spo2)},
         {"temp_mdeg", range_json(p.temp_mdeg)},   {"start_ts", p.start_ts},
         {"interval_s", p.interval_s}};
  return j.dump(2);
}

VitalsProfile load_profile(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot read " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_profile(ss.str());
}

std::vector<VitalsReading> generate(const VitalsProfile& profile, const std::string& device_id,
                                    std::uint64_t seed, std::size_t n, std::uint64_t first_seq) {
  profile.validate();
  // Mixing the device id in keeps two devices with one seed apart.
  auto id_hash = sha256(device_id);
  std::uint64_t mix = 0;
  for (int i = 0; i < 8; ++i) mix = (mix << 8) | id_hash.bytes[i];
  std::mt19937_64 rng(seed ^ mix);

  std::vector<VitalsReading> out;
  out.reserve(n);
  VitalsReading cur;
  cur.device_id = device_id;
  cur.heart_rate_bpm = profile.heart_rate.start;
  cur.systolic_mmHg = profile.systolic.start;
  cur.diastolic_mmHg = profile.diastolic.start;
  cur.spo2_pct = profile.spo2.start;
  cur.temp_mdegC = profile.temp_mdeg.start;
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0) {
      cur.heart_rate_bpm = walk(rng, cur.heart_rate_bpm, profile.heart_rate);
      cur.systolic_mmHg = walk(rng, cur.systolic_mmHg, profile.systolic,
                               std::max(profile.systolic.min, cur.diastolic_mmHg + 1), profile.systolic.max);
      cur.diastolic_mmHg = walk(rng, cur.diastolic_mmHg, profile.diastolic, profile.diastolic.min,
                                std::min(profile.diastolic.max, cur.systolic_mmHg - 1));
      cur.spo2_pct = walk(rng, cur.spo2_pct, profile.spo2);
      cur.temp_mdegC = walk(rng, cur.temp_mdegC, profile.temp_mdeg);
    }
    cur.seq = first_seq + i;
    cur.ts = profile.start_ts + (cur.seq - 1) * profile.interval_s;
    out.push_back(cur);
  }
  return out;
}

Bytes record_context(const std::string& stream_id) {
  Writer w;
  w.str("medledger/v1/record").str(stream_id);
  return std::move(w).take();
}

Bytes seal_reading(const pre::GroupParams& params, const pre::Element& stream_pk, const DeviceIdentity& device,
                   const VitalsReading& reading) {
  auto payload = reading.serialize();
  Writer ikm;
  ikm.raw(device.key.seed).bytes(params.encode(stream_pk)).bytes(payload);
  DerivedRandom rng(std::move(ikm).take());
  auto sealed = pre::seal_record(params, stream_pk, payload, record_context(device.stream_id), rng);
  return pre::serialize(params, sealed);
}

std::vector<Digest> ingest(const std::vector<VitalsReading>& readings, const DeviceIdentity& device,
                           const pre::GroupParams& params, const pre::Element& stream_pk, net::NodeClient& node,
                           blob::BlobStore& blobs, IngestOptions options) {
  std::vector<Digest> ids;
  std::vector<Digest> tx_ids;
  if (readings.empty()) return ids;
  auto nonce = node.next_nonce(device.device_id);
  for (const auto& reading : readings) {
    auto blob = seal_reading(params, stream_pk, device, reading);
    auto ref = blobs.put(blob);
    contracts::StoreRecordBody body{ref.hash, device.stream_id, device.owner, device.device_id, ref.size};
    tx_ids.push_back(node.submit(contracts::make_tx(body, device.device_id, nonce++, device.key)));
    ids.push_back(ref.hash);
  }
  if (options.wait_for_inclusion)
    for (const auto& id : tx_ids) node.wait_for(id);
  return ids;
}

}  // namespace medledger::device
