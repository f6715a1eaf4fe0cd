/*
 * Copyright 2026 The ShieldRun Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "shieldrun/common/bytes.hpp"
#include "shieldrun/common/crypto.hpp"
#include "shieldrun/fs/host_io.hpp"
#include "shieldrun/fs/policy.hpp"

namespace shieldrun::enclave {
class Enclave;
}

namespace shieldrun::fs {

// TSFS container, all integers little-endian:
//   0  magic "TSFS"          28 mode u8, 3 reserved zero bytes
//   4  version u32 (1)       32 file_id[16]
//   8  chunk_size u32        48 header_counter u64
//  12  chunk_count u64       56 header_tag[16]
//  20  file_length u64       72 chunk records
// Chunk record i at 72 + i * (chunk_size + 28): nonce[12] | data | tag[16],
// data being ciphertext (EncryptAuth) or plaintext (AuthOnly). Only the
// last chunk may be short.
//
// Version 1 means ChaCha20-Poly1305 (IETF) with a per-file key
// HKDF-SHA256(shield key, salt = file_id, info = "tsfs chunk key").
//   chunk nonce  = index u32 | version u64, version = header_counter of the
//                  flush that wrote the chunk
//   chunk AD     = index u32 | SHA-256(magic, version, chunk_size, mode, file_id)
//   AuthOnly tag = AEAD tag over an empty plaintext with AD = chunk AD | data
//   header tag   = AEAD tag over an empty plaintext, AD = header bytes 0..55,
//                  nonce = ffffffff | header_counter
inline constexpr std::uint32_t kTsfsVersion = 1;
inline constexpr std::uint32_t kDefaultChunkSize = 65536;
inline constexpr std::size_t kHeaderSize = 72;
inline constexpr std::size_t kChunkOverhead = crypto::kNonceSize + crypto::kTagSize;

struct TsfsHeader {
  std::uint32_t version = kTsfsVersion;
  std::uint32_t chunk_size = kDefaultChunkSize;
  std::uint64_t chunk_count = 0;
  std::uint64_t file_length = 0;
  ShieldMode mode = ShieldMode::EncryptAuth;
  std::array<std::uint8_t, 16> file_id{};
  std::uint64_t header_counter = 0;
  std::array<std::uint8_t, 16> tag{};

  Bytes authenticated_bytes() const;  // bytes 0..55
  Bytes encode() const;
  // Structure only; raises TamperDetected on a bad magic.
  static TsfsHeader decode(ByteSpan raw);
};

struct ChunkMeta {
  crypto::Nonce nonce{};
  std::array<std::uint8_t, 16> tag{};
  std::uint64_t version = 0;
  bool known = false;
};

enum class Intent {
  Read,       // must exist, read only
  ReadWrite,  // opened or created empty
  Create,     // always starts empty
};

class ShieldedFile {
 public:
  virtual ~ShieldedFile() = default;
  // Bytes past the end are not returned.
  virtual Bytes read(std::uint64_t offset, std::uint64_t len) = 0;
  virtual void write(std::uint64_t offset, ByteSpan data) = 0;
  virtual void flush() = 0;
  virtual std::uint64_t length() = 0;
  virtual ShieldMode mode() const = 0;

  Bytes read_all() { return read(0, length()); }
};

struct ShieldStats {
  std::uint64_t chunks_sealed = 0;
  std::uint64_t chunks_opened = 0;
  std::uint64_t bytes_sealed = 0;
  std::uint64_t bytes_opened = 0;
};

// Transparent file protection. Paths are routed by policy; protected files
// keep their chunk metadata inside the enclave and charge crypto and
// memory costs to it. With an enclave in native mode every path is
// Passthrough.
class FileShield {
 public:
  FileShield(HostIo& io, std::vector<PathPolicy> policies, enclave::Enclave* enclave = nullptr,
             std::optional<crypto::SymmetricKey> key = std::nullopt,
             std::uint32_t chunk_size = kDefaultChunkSize);

  ShieldMode mode_for(std::string_view path) const;
  // KeyMissing when the path is protected and no key has been provisioned.
  std::unique_ptr<ShieldedFile> open(const std::string& path, Intent intent = Intent::Read);

  Bytes read_file(const std::string& path);
  void write_file(const std::string& path, ByteSpan data);

  const ShieldStats& stats() const { return stats_; }
  std::uint32_t chunk_size() const { return chunk_size_; }

  // Internal plumbing for the file classes.
  HostIo& io() { return io_; }
  enclave::Enclave* enclave() { return enclave_; }
  ShieldStats& mutable_stats() { return stats_; }
  crypto::SymmetricKey key_or_throw(const std::string& path) const;

 private:
  HostIo& io_;
  std::vector<PathPolicy> policies_;
  enclave::Enclave* enclave_;
  std::optional<crypto::SymmetricKey> key_;
  std::uint32_t chunk_size_;
  ShieldStats stats_;
};

// Derives the per-file chunk key.
crypto::SymmetricKey derive_file_key(const crypto::SymmetricKey& shield_key,
                                     const std::array<std::uint8_t, 16>& file_id);

}  // namespace shieldrun::fs
