#include "medledger/blob_store.hpp"

#include <atomic>
#include <fstream>
#include <iterator>
#include <sstream>
#include <thread>

#include "medledger/primitives.hpp"

namespace medledger::blob {

namespace fs = std::filesystem;

BlobRef MemoryBlobStore::put(ByteView data) {
  BlobRef ref{sha256(data), data.size()};
  std::lock_guard lock(mu_);
  blobs_.try_emplace(ref.hash, data.begin(), data.end());
  return ref;
}

Bytes MemoryBlobStore::get(const Digest& hash) const {
  Bytes data;
  {
    std::lock_guard lock(mu_);
    auto it = blobs_.find(hash);
    if (it == blobs_.end()) throw BlobError(BlobError::Kind::NotFound, "blob not found: " + hash.hex());
    data = it->second;
  }
  if (sha256(data) != hash) throw BlobError(BlobError::Kind::CorruptBlob, "hash mismatch: " + hash.hex());
  return data;
}

bool MemoryBlobStore::has(const Digest& hash) const {
  std::lock_guard lock(mu_);
  return blobs_.contains(hash);
}

void MemoryBlobStore::corrupt(const Digest& hash, Bytes replacement) {
  std::lock_guard lock(mu_);
  blobs_.at(hash) = std::move(replacement);
}

void MemoryBlobStore::erase(const Digest& hash) {
  std::lock_guard lock(mu_);
  blobs_.erase(hash);
}

std::size_t MemoryBlobStore::size() const {
  std::lock_guard lock(mu_);
  return blobs_.size();
}

std::map<Digest, Bytes> MemoryBlobStore::contents() const {
  std::lock_guard lock(mu_);
  return blobs_;
}

FileBlobStore::FileBlobStore(fs::path root) : root_(std::move(root)) {
  std::error_code ec;
  fs::create_directories(root_, ec);
  if (ec) throw BlobError(BlobError::Kind::Io, "cannot create " + root_.string() + ": " + ec.message());
}

fs::path FileBlobStore::path_for(const Digest& hash) const {
  auto hex = hash.hex();
  return root_ / hex.substr(0, 2) / hex.substr(2, 2) / hex;
}

BlobRef FileBlobStore::put(ByteView data) {
  BlobRef ref{sha256(data), data.size()};
  auto target = path_for(ref.hash);
  if (fs::exists(target)) {
    // Keep an intact copy; a damaged one is replaced below.
    try {
      get(ref.hash);
      return ref;
    } catch (const BlobError&) {
    }
  }

  std::error_code ec;
  fs::create_directories(target.parent_path(), ec);
  if (ec) throw BlobError(BlobError::Kind::Io, "mkdir failed: " + ec.message());

  // Unique temp name per writer so concurrent identical puts converge on rename.
  static std::atomic<std::uint64_t> counter{0};
  std::ostringstream tmp_name;
  tmp_name << target.filename().string() << ".tmp." << std::this_thread::get_id() << "."
           << counter.fetch_add(1);
  auto tmp = target.parent_path() / tmp_name.str();
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw BlobError(BlobError::Kind::Io, "cannot open " + tmp.string());
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
    out.flush();
    if (!out) throw BlobError(BlobError::Kind::Io, "write failed for " + tmp.string());
  }
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp);
    throw BlobError(BlobError::Kind::Io, "rename failed: " + ec.message());
  }
  return ref;
}

Bytes FileBlobStore::get(const Digest& hash) const {
  auto p = path_for(hash);
  std::ifstream in(p, std::ios::binary);
  if (!in) throw BlobError(BlobError::Kind::NotFound, "blob not found: " + hash.hex());
  Bytes data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (sha256(data) != hash) throw BlobError(BlobError::Kind::CorruptBlob, "hash mismatch: " + hash.hex());
  return data;
}

bool FileBlobStore::has(const Digest& hash) const { return fs::exists(path_for(hash)); }

}  // namespace medledger::blob
