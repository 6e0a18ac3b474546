#pragma once

// Simulated vital-sign monitors: a seeded bounded random walk per vital, one
// sealed blob plus one StoreRecord transaction per reading.

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "medledger/blob_store.hpp"
#include "medledger/client.hpp"
#include "medledger/pre.hpp"

namespace medledger::device {

struct VitalsReading {
  std::string device_id;
  std::uint64_t seq = 0;
  std::int32_t heart_rate_bpm = 0;
  std::int32_t systolic_mmHg = 0;
  std::int32_t diastolic_mmHg = 0;
  std::int32_t spo2_pct = 0;
  std::int32_t temp_mdegC = 0;
  std::uint64_t ts = 0;

  void encode(Writer& w) const;
  static VitalsReading decode(Reader& r);
  Bytes serialize() const;
  static VitalsReading parse(ByteView raw);
  bool operator==(const VitalsReading&) const = default;
};

/// Walk bounds for one vital: values stay in [min, max], start at `start`
/// and move by at most `step` per reading.
struct VitalRange {
  std::int32_t min = 0;
  std::int32_t max = 0;
  std::int32_t start = 0;
  std::int32_t step = 0;
  bool operator==(const VitalRange&) const = default;
};

struct VitalsProfile {
  VitalRange heart_rate{50, 130, 72, 3};
  VitalRange systolic{90, 160, 120, 3};
  VitalRange diastolic{55, 100, 78, 2};
  VitalRange spo2{90, 100, 97, 1};
  VitalRange temp_mdeg{35800, 38500, 36800, 40};
  std::uint64_t start_ts = 1'700'000'000;
  std::uint64_t interval_s = 60;

  /// Throws std::invalid_argument when a range is empty, a start lies
  /// outside its range, or a range leaves physiological limits.
  void validate() const;
  bool operator==(const VitalsProfile&) const = default;
};

VitalsProfile parse_profile(const std::string& json_text);
std::string profile_to_json(const VitalsProfile& profile);
VitalsProfile load_profile(const std::filesystem::path& file);

/// Deterministic in (profile, device_id, seed). Sequence numbers start at
/// `first_seq`. Diastolic is kept below systolic.
std::vector<VitalsReading> generate(const VitalsProfile& profile, const std::string& device_id,
                                    std::uint64_t seed, std::size_t n, std::uint64_t first_seq = 1);

struct DeviceIdentity {
  std::string device_id;
  SigSecretKey key;
  std::string owner;
  std::string stream_id;
};

/// AAD bound into every sealed reading of a stream.
Bytes record_context(const std::string& stream_id);

/// Seals one reading. The encapsulation randomness is derived from the
/// device key and the reading bytes, so resubmitting a reading produces the
/// same record id (and is refused as a duplicate) while distinct readings
/// stay unlinkable.
Bytes seal_reading(const pre::GroupParams& params, const pre::Element& stream_pk, const DeviceIdentity& device,
                   const VitalsReading& reading);

struct IngestOptions {
  bool wait_for_inclusion = true;
};

/// Seals, stores and submits each reading; returns the record ids in order.
/// A node rejection is raised as net::RequestFailed carrying the contract
/// reason.
std::vector<Digest> ingest(const std::vector<VitalsReading>& readings, const DeviceIdentity& device,
                           const pre::GroupParams& params, const pre::Element& stream_pk, net::NodeClient& node,
                           blob::BlobStore& blobs, IngestOptions options = {});

}  // namespace medledger::device
