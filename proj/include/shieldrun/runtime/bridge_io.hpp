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

#include "shieldrun/bridge/bridge.hpp"
#include "shieldrun/fs/host_io.hpp"

namespace shieldrun::runtime {

// Host file primitives routed through the syscall bridge. Read payloads land
// in an enclave staging buffer so the copy is charged to the paging model.
class BridgeHostIo : public fs::HostIo {
 public:
  BridgeHostIo(bridge::SyscallBridge& bridge, enclave::Enclave& enclave);
  ~BridgeHostIo() override;

  int open(const std::string& path, fs::OpenMode mode) override;
  std::int64_t pread(int fd, MutableByteSpan out, std::uint64_t offset) override;
  std::int64_t pwrite(int fd, ByteSpan data, std::uint64_t offset) override;
  void close(int fd) override;
  bool rename(const std::string& from, const std::string& to) override;

 private:
  bridge::SyscallBridge& bridge_;
  enclave::Enclave& enclave_;
  std::uint64_t staging_ = 0;
};

}  // namespace shieldrun::runtime
