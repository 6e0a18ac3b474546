#include "keyfile.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace medledger::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

pre::Scalar scalar_from_hex(const pre::GroupParams& params, const std::string& hex) {
  return params.decode_scalar(from_hex(hex));
}

}  // namespace

KeyFile load_key_file(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot read key file " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  KeyFile k;
  try {
    auto j = json::parse(ss.str());
    k.id = j.at("id").get<std::string>();
    k.group = pre::group_id_from_string(j.at("group").get<std::string>());
    auto seed = from_hex(j.at("sig_seed").get<std::string>());
    if (seed.size() != k.sig.seed.size()) throw std::runtime_error("sig_seed must be 32 bytes");
    std::copy(seed.begin(), seed.end(), k.sig.seed.begin());
    const auto& params = k.params();
    if (j.contains("pre_sk")) k.pre_sk = scalar_from_hex(params, j["pre_sk"].get<std::string>());
    if (j.contains("streams"))
      for (const auto& [name, hex] : j["streams"].items()) k.streams[name] = scalar_from_hex(params, hex.get<std::string>());
  } catch (const json::exception& e) {
    throw std::runtime_error("bad key file " + file.string() + ": " + e.what());
  }
  return k;
}

void save_key_file(const fs::path& file, const KeyFile& k) {
  const auto& params = k.params();
  json j;
  j["id"] = k.id;
  j["group"] = pre::to_string(k.group);
  j["sig_seed"] = to_hex(k.sig.seed);
  j["sig_pk"] = to_hex(k.sig_pk().bytes);
  if (k.pre_sk) {
    j["pre_sk"] = to_hex(params.encode(*k.pre_sk));
    j["pre_pk"] = to_hex(params.encode(params.pow_g(*k.pre_sk)));
  }
  if (!k.streams.empty()) {
    j["streams"] = json::object();
    for (const auto& [name, sk] : k.streams) j["streams"][name] = to_hex(params.encode(sk));
  }
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  auto tmp = file;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << j.dump(2) << "\n";
  }
  fs::permissions(tmp, fs::perms::owner_read | fs::perms::owner_write, fs::perm_options::replace);
  fs::rename(tmp, file);
}

}  // namespace medledger::cli
