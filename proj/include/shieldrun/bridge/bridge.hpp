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
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <thread>
#include <unordered_map>
#include <vector>

#include "shieldrun/bridge/profile.hpp"
#include "shieldrun/common/bytes.hpp"

namespace shieldrun::enclave {
class Enclave;
}
namespace shieldrun::sched {
class Scheduler;
}

namespace shieldrun::bridge {

// Open flags understood by the host backend.
enum OpenFlags : std::int64_t {
  kOpenRead = 0,
  kOpenWriteTruncate = 1,
  kOpenReadWrite = 2,
};

// Argument conventions:
//   open     in_payload = path, args[0] = OpenFlags          -> fd
//   read     args[0] = fd, args[1] = offset or -1            -> bytes read
//   write    args[0] = fd, args[1] = offset or -1, in_payload = data
//   close    args[0] = fd
//   rename   in_payload = from '\0' to
//   nanosleep args[0] = nanoseconds
struct SyscallRequest {
  std::uint64_t id = 0;  // assigned by submit
  SyscallClass cls = SyscallClass::SchedYield;
  std::array<std::int64_t, 4> args{};
  Bytes in_payload;
  std::uint64_t out_capacity = 0;
  // Enclave heap address the payload is copied to on delivery (0 = none).
  std::uint64_t out_address = 0;
};

struct SyscallResponse {
  std::uint64_t id = 0;
  std::int64_t status = 0;
  Bytes payload;
};

struct SyscallResult {
  std::int64_t status = 0;
  Bytes payload;
};

// Executes requests outside the enclave.
class HostBackend {
 public:
  virtual ~HostBackend() = default;
  virtual SyscallResponse execute(const SyscallRequest& req) = 0;
};

// Real POSIX file and stream primitives.
class PosixHost : public HostBackend {
 public:
  SyscallResponse execute(const SyscallRequest& req) override;
};

// Documented [min, max] status range per class for a request.
std::pair<std::int64_t, std::int64_t> status_range(const SyscallRequest& req);

struct BridgeOptions {
  std::size_t queue_depth = 64;
  unsigned workers = 2;
  std::uint64_t max_out_capacity = 1024 * 1024;
  // Execute inline with one enclave exit+entry per call instead of queueing.
  bool synchronous = false;
};

struct Ticket {
  std::uint64_t id = 0;
  std::uint64_t ready_at = 0;
};

struct BridgeStats {
  std::uint64_t submitted = 0;
  std::uint64_t delivered = 0;
  std::uint64_t violations = 0;
  std::array<std::uint64_t, kSyscallClassCount> queued_by_class{};
};

// Asynchronous syscall queue between enclave green threads and outside
// worker threads. Responses are validated on the enclave side before any
// byte reaches application code.
class SyscallBridge {
 public:
  SyscallBridge(enclave::Enclave& enclave, sched::Scheduler* scheduler,
                std::unique_ptr<HostBackend> host, BridgeOptions options = {});
  ~SyscallBridge();

  SyscallBridge(const SyscallBridge&) = delete;
  SyscallBridge& operator=(const SyscallBridge&) = delete;

  // Queues a request. QueueFull when queue_depth requests are in flight.
  Ticket submit(SyscallRequest req);
  // Parks the calling green thread until the ticket resolves. Raises
  // IagoViolation if the response was rejected.
  SyscallResult wait(const Ticket& ticket);
  // submit + wait, yielding while the queue is full. Uses the synchronous
  // path when configured.
  SyscallResult call(SyscallRequest req);

  // Enclave-side validation of one response. Raises IagoViolation for an
  // unknown id, an oversized payload or an out-of-range status; the
  // response is dropped and the waiter (if any) gets the error.
  void complete(SyscallResponse resp);
  // Validates every response the workers produced so far.
  void drain();

  std::size_t in_flight() const;
  BridgeStats stats() const;
  const BridgeOptions& options() const { return options_; }

 private:
  struct Pending {
    SyscallRequest req;  // payload moved out once queued
    std::uint64_t submitted_at = 0;
    std::uint64_t ready_at = 0;
    bool resolved = false;
    bool violation = false;
    std::int64_t status = 0;
    Bytes payload;
  };

  std::uint64_t service_cost(const SyscallRequest& req) const;
  void worker_main();
  SyscallResult call_synchronous(SyscallRequest req);

  enclave::Enclave& enclave_;
  sched::Scheduler* scheduler_;
  std::unique_ptr<HostBackend> host_;
  BridgeOptions options_;

  mutable std::mutex mu_;
  std::condition_variable request_cv_;
  std::condition_variable response_cv_;
  std::deque<SyscallRequest> requests_;
  std::deque<SyscallResponse> responses_;
  std::unordered_map<std::uint64_t, Pending> pending_;
  std::uint64_t next_id_ = 1;
  std::size_t in_flight_ = 0;
  BridgeStats stats_;
  bool stopping_ = false;
  std::vector<std::thread> workers_;
};

}  // namespace shieldrun::bridge
