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

#include "shieldrun/fs/shield.hpp"

#include <algorithm>
#include <cstring>

#include "shieldrun/common/error.hpp"
#include "shieldrun/enclave/enclave.hpp"

namespace shieldrun::fs {

namespace {

constexpr std::uint8_t kMagic[4] = {'T', 'S', 'F', 'S'};
constexpr std::size_t kMetaEntryBytes = 48;
constexpr std::size_t kCleanCacheChunks = 8;
constexpr std::uint32_t kMaxChunkSize = 16u << 20;

[[noreturn]] void tamper(const std::string& path, const std::string& what) {
  raise(Errc::TamperDetected, path + ": " + what);
}

crypto::Nonce chunk_nonce(std::uint32_t index, std::uint64_t version) {
  crypto::Nonce n{};
  for (int i = 0; i < 4; ++i) n[i] = static_cast<std::uint8_t>(index >> (8 * i));
  for (int i = 0; i < 8; ++i) n[4 + i] = static_cast<std::uint8_t>(version >> (8 * i));
  return n;
}

crypto::Nonce header_nonce(std::uint64_t counter) { return chunk_nonce(0xffffffffu, counter); }

crypto::Digest static_digest(const TsfsHeader& h) {
  ByteWriter w;
  w.bytes(ByteSpan(kMagic, 4));
  w.u32_le(h.version);
  w.u32_le(h.chunk_size);
  w.u8(static_cast<std::uint8_t>(h.mode));
  w.bytes(h.file_id);
  return crypto::sha256(w.data());
}

Bytes chunk_ad(std::uint64_t index, const crypto::Digest& digest) {
  ByteWriter w;
  w.u32_le(static_cast<std::uint32_t>(index));
  w.bytes(digest);
  return std::move(w).take();
}

std::uint64_t ceil_div(std::uint64_t a, std::uint64_t b) { return (a + b - 1) / b; }

// ---------------------------------------------------------------------------

class PlainFile : public ShieldedFile {
 public:
  PlainFile(FileShield& shield, std::string path, Intent intent)
      : shield_(shield), path_(std::move(path)), intent_(intent) {
    OpenMode m = intent == Intent::Read        ? OpenMode::Read
                 : intent == Intent::Create    ? OpenMode::WriteTruncate
                                               : OpenMode::ReadWrite;
    fd_ = shield_.io().open(path_, m);
    if (fd_ < 0) raise(Errc::IoError, "cannot open " + path_);
    if (intent == Intent::Create) length_ = 0;
  }
  ~PlainFile() override { shield_.io().close(fd_); }

  Bytes read(std::uint64_t offset, std::uint64_t len) override {
    Bytes out(len);
    std::int64_t n = shield_.io().pread(fd_, out, offset);
    if (n < 0) raise(Errc::IoError, "read failed on " + path_);
    out.resize(static_cast<std::size_t>(n));
    return out;
  }

  void write(std::uint64_t offset, ByteSpan data) override {
    if (intent_ == Intent::Read) raise(Errc::InvalidArgument, path_ + " is open read-only");
    if (shield_.io().pwrite(fd_, data, offset) != static_cast<std::int64_t>(data.size())) {
      raise(Errc::IoError, "write failed on " + path_);
    }
    if (length_) length_ = std::max(*length_, offset + data.size());
  }

  void flush() override {}

  std::uint64_t length() override {
    if (!length_) {
      // No stat through the bridge: probe forward in large reads.
      std::uint64_t total = 0;
      Bytes buf(1 << 20);
      for (;;) {
        std::int64_t n = shield_.io().pread(fd_, buf, total);
        if (n < 0) raise(Errc::IoError, "read failed on " + path_);
        total += static_cast<std::uint64_t>(n);
        if (static_cast<std::size_t>(n) < buf.size()) break;
      }
      length_ = total;
    }
    return *length_;
  }

  ShieldMode mode() const override { return ShieldMode::Passthrough; }

 private:
  FileShield& shield_;
  std::string path_;
  Intent intent_;
  int fd_ = -1;
  std::optional<std::uint64_t> length_;
};

// ---------------------------------------------------------------------------

class ProtectedFile : public ShieldedFile {
 public:
  ProtectedFile(FileShield& shield, std::string path, ShieldMode mode, Intent intent)
      : shield_(shield), path_(std::move(path)), mode_(mode), intent_(intent) {
    shield_key_ = shield_.key_or_throw(path_);
    if (intent != Intent::Create) {
      fd_ = shield_.io().open(path_, OpenMode::Read);
      if (fd_ < 0 && intent == Intent::Read) raise(Errc::IoError, "cannot open " + path_);
    }
    if (fd_ >= 0) {
      load_header();
    } else {
      hdr_.chunk_size = shield_.chunk_size();
      hdr_.mode = mode_;
      crypto::random_bytes(hdr_.file_id);
      setup_keys();
      dirty_header_ = true;
    }
    length_ = on_disk_ ? hdr_.file_length : 0;
    meta_.resize(on_disk_ ? hdr_.chunk_count : 0);
    ensure_meta_capacity(meta_.size());
  }

  ~ProtectedFile() override {
    if (fd_ >= 0) shield_.io().close(fd_);
    if (auto* e = shield_.enclave()) {
      for (auto& [i, c] : cache_) e->release(c.address);
      if (meta_address_) e->release(meta_address_);
    }
  }

  Bytes read(std::uint64_t offset, std::uint64_t len) override {
    if (offset >= length_ || len == 0) return {};
    len = std::min(len, length_ - offset);
    std::uint64_t cs = hdr_.chunk_size;
    std::uint64_t first = offset / cs, last = (offset + len - 1) / cs;
    // A failure anywhere throws, so the caller never sees partial data.
    Bytes out(len);
    for (std::uint64_t i = first; i <= last; ++i) {
      Cached& c = chunk(i);
      std::uint64_t start = std::max(offset, i * cs);
      std::uint64_t end = std::min(offset + len, i * cs + c.data.size());
      std::memcpy(out.data() + (start - offset), c.data.data() + (start - i * cs), end - start);
      touch(c, start - i * cs, end - start, enclave::AccessKind::Read);
    }
    return out;
  }

  void write(std::uint64_t offset, ByteSpan data) override {
    if (intent_ == Intent::Read) raise(Errc::InvalidArgument, path_ + " is open read-only");
    if (data.empty()) return;
    std::uint64_t cs = hdr_.chunk_size;
    std::uint64_t new_len = std::max(length_, offset + data.size());
    std::uint64_t from = std::min(offset, length_);
    std::uint64_t first = from / cs, last = (new_len - 1) / cs;
    // Chunks past the old end and the old tail chunk are rewritten in full.
    last = std::min(last, (offset + data.size() - 1) / cs);
    for (std::uint64_t i = first; i <= last; ++i) chunk(i, true);
    if (meta_.size() < last + 1) {
      meta_.resize(last + 1);
      ensure_meta_capacity(meta_.size());
    }
    for (std::uint64_t i = first; i <= last; ++i) {
      Cached& c = chunk(i, true);
      std::uint64_t want = std::min<std::uint64_t>(cs, new_len - i * cs);
      if (c.data.size() < want) c.data.resize(want, 0);
      std::uint64_t start = std::max(offset, i * cs);
      std::uint64_t end = std::min(offset + data.size(), i * cs + want);
      if (end > start) {
        std::memcpy(c.data.data() + (start - i * cs), data.data() + (start - offset), end - start);
        touch(c, start - i * cs, end - start, enclave::AccessKind::Write);
      }
      c.dirty = true;
    }
    length_ = new_len;
    dirty_header_ = true;
  }

  void flush() override {
    if (!dirty_header_) return;
    std::uint64_t cs = hdr_.chunk_size;
    TsfsHeader next = hdr_;
    next.header_counter = hdr_.header_counter + 1;
    next.file_length = length_;
    next.chunk_count = ceil_div(length_, cs);

    std::string tmp = path_ + ".tsfs-tmp";
    HostIo& io = shield_.io();
    int out = io.open(tmp, OpenMode::WriteTruncate);
    if (out < 0) raise(Errc::IoError, "cannot create " + tmp);
    try {
      for (std::uint64_t i = 0; i < next.chunk_count; ++i) {
        std::uint64_t off = kHeaderSize + i * (cs + kChunkOverhead);
        auto it = cache_.find(i);
        Bytes record;
        if (it != cache_.end() && it->second.dirty) {
          record = seal_chunk(i, it->second, next.header_counter);
        } else {
          record = raw_record(i);
        }
        if (io.pwrite(out, record, off) != static_cast<std::int64_t>(record.size())) {
          raise(Errc::IoError, "write failed on " + tmp);
        }
      }
      next.tag = header_tag(next);
      Bytes h = next.encode();
      if (io.pwrite(out, h, 0) != static_cast<std::int64_t>(h.size())) {
        raise(Errc::IoError, "write failed on " + tmp);
      }
    } catch (...) {
      io.close(out);
      throw;
    }
    io.close(out);
    if (!io.rename(tmp, path_)) raise(Errc::IoError, "cannot replace " + path_);
    if (fd_ >= 0) io.close(fd_);
    fd_ = io.open(path_, OpenMode::Read);
    if (fd_ < 0) raise(Errc::IoError, "cannot reopen " + path_);
    hdr_ = next;
    on_disk_ = true;
    for (auto& [i, c] : cache_) c.dirty = false;
    dirty_header_ = false;
    evict_clean();
  }

  std::uint64_t length() override { return length_; }
  ShieldMode mode() const override { return mode_; }

 private:
  struct Cached {
    Bytes data;
    bool dirty = false;
    std::uint64_t address = 0;
    std::uint64_t last_use = 0;
  };

  void setup_keys() {
    file_key_ = derive_file_key(shield_key_, hdr_.file_id);
    digest_ = static_digest(hdr_);
  }

  std::array<std::uint8_t, 16> header_tag(const TsfsHeader& h) const {
    Bytes sealed = crypto::aead_seal(file_key_, header_nonce(h.header_counter),
                                     h.authenticated_bytes(), {});
    std::array<std::uint8_t, 16> tag{};
    std::copy(sealed.begin(), sealed.end(), tag.begin());
    return tag;
  }

  void load_header() {
    Bytes raw(kHeaderSize);
    std::int64_t n = shield_.io().pread(fd_, raw, 0);
    if (n < 0) raise(Errc::IoError, "read failed on " + path_);
    if (static_cast<std::size_t>(n) < kHeaderSize) {
      raise(Errc::HeaderCorrupt, path_ + ": file too short for a TSFS header");
    }
    hdr_ = TsfsHeader::decode(raw);
    if (hdr_.version != kTsfsVersion) tamper(path_, "unknown container version");
    if (hdr_.chunk_size == 0 || hdr_.chunk_size > kMaxChunkSize) tamper(path_, "bad chunk size");
    if (hdr_.mode != mode_) tamper(path_, "protection mode differs from policy");
    setup_keys();
    if (!crypto::constant_time_equal(header_tag(hdr_), hdr_.tag)) {
      tamper(path_, "header authentication failed");
    }
    if (hdr_.chunk_count != ceil_div(hdr_.file_length, hdr_.chunk_size)) {
      tamper(path_, "chunk count does not match length");
    }
    // Appended bytes are tampering too.
    std::uint64_t end = kHeaderSize;
    if (hdr_.chunk_count > 0) {
      std::uint64_t last = hdr_.chunk_count - 1;
      end = kHeaderSize + last * (hdr_.chunk_size + kChunkOverhead) +
            (hdr_.file_length - last * hdr_.chunk_size) + kChunkOverhead;
    }
    std::uint8_t probe[1];
    if (shield_.io().pread(fd_, probe, end) != 0) tamper(path_, "trailing bytes after last chunk");
    on_disk_ = true;
  }

  std::uint64_t disk_chunk_len(std::uint64_t i) const {
    return std::min<std::uint64_t>(hdr_.chunk_size, hdr_.file_length - i * hdr_.chunk_size);
  }

  Bytes raw_record(std::uint64_t i) {
    if (!on_disk_ || i >= hdr_.chunk_count) {
      raise(Errc::InvalidArgument, "internal: raw copy of a chunk that is not on disk");
    }
    Bytes rec(disk_chunk_len(i) + kChunkOverhead);
    std::uint64_t off = kHeaderSize + i * (hdr_.chunk_size + kChunkOverhead);
    std::int64_t n = shield_.io().pread(fd_, rec, off);
    if (n != static_cast<std::int64_t>(rec.size())) tamper(path_, "chunk " + std::to_string(i) + " truncated");
    return rec;
  }

  Cached& chunk(std::uint64_t i, bool for_write = false) {
    ++clock_;
    auto it = cache_.find(i);
    if (it != cache_.end()) {
      it->second.last_use = clock_;
      touch_meta(i);
      return it->second;
    }
    Cached c;
    if (on_disk_ && i < hdr_.chunk_count) {
      c.data = open_chunk(i);
    }
    if (auto* e = shield_.enclave()) c.address = e->allocate(hdr_.chunk_size);
    c.last_use = clock_;
    cache_.emplace(i, std::move(c));
    if (!for_write) evict_clean();  // never the newest entry
    return cache_.at(i);
  }

  Bytes open_chunk(std::uint64_t i) {
    Bytes rec = raw_record(i);
    std::uint64_t len = rec.size() - kChunkOverhead;
    crypto::Nonce nonce{};
    std::copy_n(rec.begin(), crypto::kNonceSize, nonce.begin());
    std::uint32_t idx = 0;
    for (int k = 0; k < 4; ++k) idx |= static_cast<std::uint32_t>(nonce[k]) << (8 * k);
    if (idx != i) tamper(path_, "chunk " + std::to_string(i) + " carries a foreign nonce");
    std::uint64_t version = 0;
    for (int k = 0; k < 8; ++k) version |= static_cast<std::uint64_t>(nonce[4 + k]) << (8 * k);
    Bytes ad = chunk_ad(i, digest_);
    ByteSpan body(rec.data() + crypto::kNonceSize, len);
    ByteSpan tag(rec.data() + crypto::kNonceSize + len, crypto::kTagSize);
    Bytes plain;
    if (mode_ == ShieldMode::EncryptAuth) {
      auto opened = crypto::aead_open(file_key_, nonce, ad,
                                      ByteSpan(rec.data() + crypto::kNonceSize, len + crypto::kTagSize));
      if (!opened) tamper(path_, "chunk " + std::to_string(i) + " failed authentication");
      plain = std::move(*opened);
    } else {
      ad.insert(ad.end(), body.begin(), body.end());
      Bytes expect = crypto::aead_seal(file_key_, nonce, ad, {});
      if (!crypto::constant_time_equal(expect, tag)) {
        tamper(path_, "chunk " + std::to_string(i) + " failed authentication");
      }
      plain.assign(body.begin(), body.end());
    }
    ChunkMeta& m = meta_.at(i);
    m.nonce = nonce;
    std::copy(tag.begin(), tag.end(), m.tag.begin());
    m.version = version;
    m.known = true;
    touch_meta(i);
    auto& st = shield_.mutable_stats();
    ++st.chunks_opened;
    st.bytes_opened += len;
    if (auto* e = shield_.enclave()) e->charge_crypto(len);
    return plain;
  }

  Bytes seal_chunk(std::uint64_t i, const Cached& c, std::uint64_t version) {
    crypto::Nonce nonce = chunk_nonce(static_cast<std::uint32_t>(i), version);
    Bytes ad = chunk_ad(i, digest_);
    Bytes rec(nonce.begin(), nonce.end());
    std::array<std::uint8_t, 16> tag{};
    if (mode_ == ShieldMode::EncryptAuth) {
      Bytes sealed = crypto::aead_seal(file_key_, nonce, ad, c.data);
      std::copy(sealed.end() - crypto::kTagSize, sealed.end(), tag.begin());
      rec.insert(rec.end(), sealed.begin(), sealed.end());
    } else {
      ad.insert(ad.end(), c.data.begin(), c.data.end());
      Bytes t = crypto::aead_seal(file_key_, nonce, ad, {});
      std::copy(t.begin(), t.end(), tag.begin());
      rec.insert(rec.end(), c.data.begin(), c.data.end());
      rec.insert(rec.end(), t.begin(), t.end());
    }
    ChunkMeta& m = meta_.at(i);
    m.nonce = nonce;
    m.tag = tag;
    m.version = version;
    m.known = true;
    touch_meta(i);
    auto& st = shield_.mutable_stats();
    ++st.chunks_sealed;
    st.bytes_sealed += c.data.size();
    if (auto* e = shield_.enclave()) {
      e->mem_access(c.address, std::max<std::uint64_t>(c.data.size(), 1), enclave::AccessKind::Read);
      e->charge_crypto(c.data.size());
    }
    return rec;
  }

  void touch(const Cached& c, std::uint64_t off, std::uint64_t len, enclave::AccessKind kind) {
    if (auto* e = shield_.enclave(); e && len > 0) e->mem_access(c.address + off, len, kind);
  }

  void touch_meta(std::uint64_t i) {
    if (auto* e = shield_.enclave(); e && meta_address_) {
      e->mem_access(meta_address_ + i * kMetaEntryBytes, kMetaEntryBytes, enclave::AccessKind::Write);
    }
  }

  void ensure_meta_capacity(std::uint64_t entries) {
    auto* e = shield_.enclave();
    if (!e) return;
    std::uint64_t want = std::max<std::uint64_t>(entries, 1);
    if (meta_address_ && want <= meta_capacity_) return;
    std::uint64_t cap = std::max<std::uint64_t>(want, meta_capacity_ * 2);
    if (meta_address_) e->release(meta_address_);
    meta_address_ = e->allocate(cap * kMetaEntryBytes);
    meta_capacity_ = cap;
  }

  void evict_clean() {
    std::size_t clean = 0;
    for (auto& [i, c] : cache_) clean += c.dirty ? 0 : 1;
    while (clean > kCleanCacheChunks) {
      auto victim = cache_.end();
      for (auto it = cache_.begin(); it != cache_.end(); ++it) {
        if (it->second.dirty) continue;
        if (victim == cache_.end() || it->second.last_use < victim->second.last_use) victim = it;
      }
      if (auto* e = shield_.enclave()) e->release(victim->second.address);
      cache_.erase(victim);
      --clean;
    }
  }

  FileShield& shield_;
  std::string path_;
  ShieldMode mode_;
  Intent intent_;
  crypto::SymmetricKey shield_key_;
  crypto::SymmetricKey file_key_;
  crypto::Digest digest_{};
  TsfsHeader hdr_;
  bool on_disk_ = false;
  bool dirty_header_ = false;
  int fd_ = -1;
  std::uint64_t length_ = 0;
  std::vector<ChunkMeta> meta_;
  std::uint64_t meta_address_ = 0;
  std::uint64_t meta_capacity_ = 0;
  std::map<std::uint64_t, Cached> cache_;
  std::uint64_t clock_ = 0;
};

}  // namespace

Bytes TsfsHeader::authenticated_bytes() const {
  ByteWriter w;
  w.bytes(ByteSpan(kMagic, 4));
  w.u32_le(version);
  w.u32_le(chunk_size);
  w.u64_le(chunk_count);
  w.u64_le(file_length);
  w.u8(static_cast<std::uint8_t>(mode));
  w.zeros(3);
  w.bytes(file_id);
  w.u64_le(header_counter);
  return std::move(w).take();
}

Bytes TsfsHeader::encode() const {
  Bytes b = authenticated_bytes();
  b.insert(b.end(), tag.begin(), tag.end());
  return b;
}

TsfsHeader TsfsHeader::decode(ByteSpan raw) {
  ByteReader r(raw, Errc::HeaderCorrupt);
  ByteSpan magic = r.bytes(4);
  if (!std::equal(magic.begin(), magic.end(), kMagic)) {
    raise(Errc::TamperDetected, "not a TSFS container (bad magic)");
  }
  TsfsHeader h;
  h.version = r.u32_le();
  h.chunk_size = r.u32_le();
  h.chunk_count = r.u64_le();
  h.file_length = r.u64_le();
  h.mode = static_cast<ShieldMode>(r.u8());
  ByteSpan reserved = r.bytes(3);
  ByteSpan id = r.bytes(16);
  std::copy(id.begin(), id.end(), h.file_id.begin());
  h.header_counter = r.u64_le();
  ByteSpan tag = r.bytes(16);
  std::copy(tag.begin(), tag.end(), h.tag.begin());
  if (reserved[0] || reserved[1] || reserved[2]) {
    raise(Errc::TamperDetected, "reserved header bytes are not zero");
  }
  return h;
}

crypto::SymmetricKey derive_file_key(const crypto::SymmetricKey& shield_key,
                                     const std::array<std::uint8_t, 16>& file_id) {
  Bytes k = crypto::hkdf_sha256(shield_key.span(), file_id, as_bytes("tsfs chunk key"),
                                crypto::kKeySize);
  return crypto::SymmetricKey(k);
}

FileShield::FileShield(HostIo& io, std::vector<PathPolicy> policies, enclave::Enclave* enclave,
                       std::optional<crypto::SymmetricKey> key, std::uint32_t chunk_size)
    : io_(io), policies_(std::move(policies)), enclave_(enclave), key_(std::move(key)),
      chunk_size_(chunk_size) {
  if (chunk_size_ == 0 || chunk_size_ > kMaxChunkSize) {
    raise(Errc::ConfigInvalid, "chunk size must be in (0, 16 MiB]");
  }
}

ShieldMode FileShield::mode_for(std::string_view path) const {
  if (enclave_ && !enclave_->shields_active()) return ShieldMode::Passthrough;
  return policy_for(policies_, path);
}

crypto::SymmetricKey FileShield::key_or_throw(const std::string& path) const {
  if (key_) return *key_;
  if (enclave_) {
    if (auto k = enclave_->fs_key()) return *k;
  }
  raise(Errc::KeyMissing, "no file-system key provisioned for protected path " + path);
}

std::unique_ptr<ShieldedFile> FileShield::open(const std::string& path, Intent intent) {
  ShieldMode m = mode_for(path);
  if (m == ShieldMode::Passthrough) return std::make_unique<PlainFile>(*this, path, intent);
  return std::make_unique<ProtectedFile>(*this, path, m, intent);
}

Bytes FileShield::read_file(const std::string& path) { return open(path, Intent::Read)->read_all(); }

void FileShield::write_file(const std::string& path, ByteSpan data) {
  auto f = open(path, Intent::Create);
  f->write(0, data);
  f->flush();
}

}  // namespace shieldrun::fs
