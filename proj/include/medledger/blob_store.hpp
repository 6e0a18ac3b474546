#pragma once

// Content-addressed storage for sealed records and proxy results. Every read
// re-hashes the stored bytes.

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <stdexcept>

#include "medledger/bytes.hpp"

namespace medledger::blob {

struct BlobRef {
  Digest hash;
  std::uint64_t size = 0;

  bool operator==(const BlobRef&) const = default;
};

class BlobError : public std::runtime_error {
 public:
  enum class Kind { NotFound, CorruptBlob, Io };

  BlobError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

class BlobStore {
 public:
  virtual ~BlobStore() = default;

  /// Idempotent.
  virtual BlobRef put(ByteView data) = 0;
  /// Throws BlobError NotFound or CorruptBlob.
  virtual Bytes get(const Digest& hash) const = 0;
  virtual bool has(const Digest& hash) const = 0;
};

class MemoryBlobStore final : public BlobStore {
 public:
  BlobRef put(ByteView data) override;
  Bytes get(const Digest& hash) const override;
  bool has(const Digest& hash) const override;

  /// Test hook: overwrite stored bytes without updating the key.
  void corrupt(const Digest& hash, Bytes replacement);
  void erase(const Digest& hash);
  std::size_t size() const;
  /// Snapshot of every stored blob, for structural scans in tests.
  std::map<Digest, Bytes> contents() const;

 private:
  mutable std::mutex mu_;
  std::map<Digest, Bytes> blobs_;
};

/// <root>/aa/bb/<64-hex> where aa, bb are the first two hash bytes.
class FileBlobStore final : public BlobStore {
 public:
  explicit FileBlobStore(std::filesystem::path root);

  BlobRef put(ByteView data) override;
  Bytes get(const Digest& hash) const override;
  bool has(const Digest& hash) const override;

  std::filesystem::path path_for(const Digest& hash) const;

 private:
  std::filesystem::path root_;
};

}  // namespace medledger::blob
