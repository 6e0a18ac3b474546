#pragma once

// JSON key files held by CLI users. Secrets are hex strings; the file is
// written owner-only.

#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "medledger/pre.hpp"
#include "medledger/primitives.hpp"

namespace medledger::cli {

struct KeyFile {
  std::string id;
  pre::GroupId group = pre::GroupId::Prod;
  SigSecretKey sig;
  std::optional<pre::Scalar> pre_sk;
  std::map<std::string, pre::Scalar> streams;  // stream id -> secret

  SigPublicKey sig_pk() const { return SigningKey::from_seed(sig).public_key; }
  const pre::GroupParams& params() const { return pre::GroupParams::get(group); }
};

KeyFile load_key_file(const std::filesystem::path& file);
void save_key_file(const std::filesystem::path& file, const KeyFile& key);

}  // namespace medledger::cli
