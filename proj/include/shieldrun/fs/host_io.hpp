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

#include <cstdint>
#include <string>

#include "shieldrun/common/bytes.hpp"

namespace shieldrun::fs {

enum class OpenMode { Read, WriteTruncate, ReadWrite };

// Untrusted host file primitives. Everything coming back from here is
// treated as attacker controlled.
class HostIo {
 public:
  virtual ~HostIo() = default;
  // Returns -1 when the file cannot be opened.
  virtual int open(const std::string& path, OpenMode mode) = 0;
  // Reads up to out.size() bytes at offset; fewer only at end of file.
  virtual std::int64_t pread(int fd, MutableByteSpan out, std::uint64_t offset) = 0;
  virtual std::int64_t pwrite(int fd, ByteSpan data, std::uint64_t offset) = 0;
  virtual void close(int fd) = 0;
  virtual bool rename(const std::string& from, const std::string& to) = 0;
};

// Direct POSIX calls, used outside any enclave (tools, setup phases).
class PosixHostIo : public HostIo {
 public:
  int open(const std::string& path, OpenMode mode) override;
  std::int64_t pread(int fd, MutableByteSpan out, std::uint64_t offset) override;
  std::int64_t pwrite(int fd, ByteSpan data, std::uint64_t offset) override;
  void close(int fd) override;
  bool rename(const std::string& from, const std::string& to) override;
};

}  // namespace shieldrun::fs
