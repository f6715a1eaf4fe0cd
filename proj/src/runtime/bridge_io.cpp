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

#include "shieldrun/runtime/bridge_io.hpp"

#include <algorithm>
#include <cstring>

#include "shieldrun/enclave/enclave.hpp"

namespace shieldrun::runtime {

using bridge::SyscallClass;
using bridge::SyscallRequest;

namespace {

constexpr std::uint64_t kStagingBytes = 256 * 1024;

}  // namespace

BridgeHostIo::BridgeHostIo(bridge::SyscallBridge& bridge, enclave::Enclave& enclave)
    : bridge_(bridge), enclave_(enclave) {
  staging_ = enclave_.allocate(kStagingBytes);
}

BridgeHostIo::~BridgeHostIo() { enclave_.release(staging_); }

int BridgeHostIo::open(const std::string& path, fs::OpenMode mode) {
  SyscallRequest r;
  r.cls = SyscallClass::Open;
  r.in_payload.assign(path.begin(), path.end());
  r.args[0] = mode == fs::OpenMode::Read            ? bridge::kOpenRead
              : mode == fs::OpenMode::WriteTruncate ? bridge::kOpenWriteTruncate
                                                    : bridge::kOpenReadWrite;
  return static_cast<int>(bridge_.call(std::move(r)).status);
}

std::int64_t BridgeHostIo::pread(int fd, MutableByteSpan out, std::uint64_t offset) {
  std::uint64_t done = 0;
  while (done < out.size()) {
    std::uint64_t n = std::min<std::uint64_t>(out.size() - done, kStagingBytes);
    SyscallRequest r;
    r.cls = SyscallClass::Read;
    r.args[0] = fd;
    r.args[1] = static_cast<std::int64_t>(offset + done);
    r.out_capacity = n;
    r.out_address = staging_;
    auto res = bridge_.call(std::move(r));
    if (res.status < 0) return -1;
    std::memcpy(out.data() + done, res.payload.data(), res.payload.size());
    done += res.payload.size();
    if (res.payload.size() < n) break;
  }
  return static_cast<std::int64_t>(done);
}

std::int64_t BridgeHostIo::pwrite(int fd, ByteSpan data, std::uint64_t offset) {
  std::uint64_t done = 0;
  while (done < data.size()) {
    std::uint64_t n = std::min<std::uint64_t>(data.size() - done, kStagingBytes);
    SyscallRequest r;
    r.cls = SyscallClass::Write;
    r.args[0] = fd;
    r.args[1] = static_cast<std::int64_t>(offset + done);
    r.in_payload.assign(data.begin() + done, data.begin() + done + n);
    enclave_.mem_access(staging_, n, enclave::AccessKind::Read);
    auto res = bridge_.call(std::move(r));
    if (res.status < 0) return -1;
    done += static_cast<std::uint64_t>(res.status);
    if (static_cast<std::uint64_t>(res.status) < n) break;
  }
  return static_cast<std::int64_t>(done);
}

void BridgeHostIo::close(int fd) {
  SyscallRequest r;
  r.cls = SyscallClass::Close;
  r.args[0] = fd;
  bridge_.call(std::move(r));
}

bool BridgeHostIo::rename(const std::string& from, const std::string& to) {
  SyscallRequest r;
  r.cls = SyscallClass::Rename;
  r.in_payload.assign(from.begin(), from.end());
  r.in_payload.push_back(0);
  r.in_payload.insert(r.in_payload.end(), to.begin(), to.end());
  return bridge_.call(std::move(r)).status == 0;
}

}  // namespace shieldrun::runtime
