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
#include <memory>
#include <string>
#include <utility>

#include "shieldrun/common/bytes.hpp"

namespace shieldrun::bridge {
class SyscallBridge;
}

namespace shieldrun::net {

// An ordered, reliable byte stream. read_exact raises ChannelClosed at end
// of stream; both calls raise IoError on host failures.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual void write_all(ByteSpan data) = 0;
  virtual void read_exact(MutableByteSpan out) = 0;
  virtual void close() = 0;

  Bytes read_bytes(std::size_t n) {
    Bytes b(n);
    read_exact(b);
    return b;
  }
};

// Two connected in-memory endpoints. A reader on a green thread parks in the
// scheduler; any other reader waits on a condition variable.
std::pair<std::unique_ptr<Transport>, std::unique_ptr<Transport>> memory_pipe();

// Plain POSIX stream descriptor, used outside any enclave.
class FdTransport : public Transport {
 public:
  explicit FdTransport(int fd) : fd_(fd) {}
  ~FdTransport() override;
  void write_all(ByteSpan data) override;
  void read_exact(MutableByteSpan out) override;
  void close() override;
  int fd() const { return fd_; }

 private:
  int fd_;
};

// Stream descriptor whose reads and writes cross the syscall bridge.
class BridgeTransport : public Transport {
 public:
  BridgeTransport(bridge::SyscallBridge& bridge, int fd) : bridge_(bridge), fd_(fd) {}
  ~BridgeTransport() override;
  void write_all(ByteSpan data) override;
  void read_exact(MutableByteSpan out) override;
  void close() override;

 private:
  bridge::SyscallBridge& bridge_;
  int fd_;
};

// TCP helpers. Addresses are "host:port"; port 0 binds an ephemeral port.
struct Endpoint {
  std::string host;
  std::uint16_t port = 0;
};
Endpoint parse_endpoint(const std::string& text);  // InvalidArgument
int tcp_listen(const Endpoint& at, std::uint16_t* bound_port = nullptr);
int tcp_accept(int listen_fd);  // -1 once the listener is shut down
int tcp_connect(const Endpoint& to);

}  // namespace shieldrun::net
