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

#include "shieldrun/bridge/bridge.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <cerrno>
#include <cstdio>
#include <limits>

#include "shieldrun/common/error.hpp"
#include "shieldrun/enclave/enclave.hpp"
#include "shieldrun/sched/scheduler.hpp"

namespace shieldrun::bridge {

namespace {

std::int64_t host_read(int fd, std::int64_t offset, std::uint8_t* out, std::size_t count) {
  std::size_t done = 0;
  while (done < count) {
    ssize_t n = offset >= 0 ? ::pread(fd, out + done, count - done, offset + done)
                            : ::read(fd, out + done, count - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      return -1;
    }
    if (n == 0) break;
    done += static_cast<std::size_t>(n);
    if (offset < 0) break;  // streams return what is available
  }
  return static_cast<std::int64_t>(done);
}

std::int64_t host_write(int fd, std::int64_t offset, const std::uint8_t* data, std::size_t count) {
  std::size_t done = 0;
  while (done < count) {
    ssize_t n = offset >= 0 ? ::pwrite(fd, data + done, count - done, offset + done)
                            : ::write(fd, data + done, count - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      return -1;
    }
    done += static_cast<std::size_t>(n);
  }
  return static_cast<std::int64_t>(done);
}

std::string payload_string(const Bytes& b) { return std::string(b.begin(), b.end()); }

std::optional<std::string> validate(const SyscallRequest& req, const SyscallResponse& resp,
                                    std::uint64_t max_capacity) {
  std::uint64_t cap = std::min(req.out_capacity, max_capacity);
  if (resp.payload.size() > cap) {
    return "payload of " + std::to_string(resp.payload.size()) + " bytes exceeds capacity " +
           std::to_string(cap);
  }
  auto [lo, hi] = status_range(req);
  if (resp.status < lo || resp.status > hi) {
    return "status " + std::to_string(resp.status) + " outside [" + std::to_string(lo) + ", " +
           std::to_string(hi) + "] for " + std::string(to_string(req.cls));
  }
  if (req.cls == SyscallClass::Read) {
    std::uint64_t expect = resp.status < 0 ? 0 : static_cast<std::uint64_t>(resp.status);
    if (resp.payload.size() != expect) return "read status does not match payload length";
  } else if (!resp.payload.empty()) {
    return std::string(to_string(req.cls)) + " must not return a payload";
  }
  return std::nullopt;
}

}  // namespace

SyscallResponse PosixHost::execute(const SyscallRequest& req) {
  SyscallResponse r;
  r.id = req.id;
  switch (req.cls) {
    case SyscallClass::Open: {
      int flags = O_RDONLY;
      if (req.args[0] == kOpenWriteTruncate) flags = O_RDWR | O_CREAT | O_TRUNC;
      if (req.args[0] == kOpenReadWrite) flags = O_RDWR | O_CREAT;
      int fd = ::open(payload_string(req.in_payload).c_str(), flags | O_CLOEXEC, 0644);
      r.status = fd < 0 ? -1 : fd;
      break;
    }
    case SyscallClass::Read: {
      r.payload.resize(req.out_capacity);
      std::int64_t n = host_read(static_cast<int>(req.args[0]), req.args[1], r.payload.data(),
                                 r.payload.size());
      r.payload.resize(n < 0 ? 0 : static_cast<std::size_t>(n));
      r.status = n;
      break;
    }
    case SyscallClass::Write:
      r.status = host_write(static_cast<int>(req.args[0]), req.args[1], req.in_payload.data(),
                            req.in_payload.size());
      break;
    case SyscallClass::Close:
      r.status = ::close(static_cast<int>(req.args[0])) == 0 ? 0 : -1;
      break;
    case SyscallClass::Rename: {
      std::string both = payload_string(req.in_payload);
      auto sep = both.find('\0');
      if (sep == std::string::npos) {
        r.status = -1;
        break;
      }
      r.status = std::rename(both.substr(0, sep).c_str(), both.substr(sep + 1).c_str()) == 0 ? 0 : -1;
      break;
    }
    case SyscallClass::SchedYield:
      std::this_thread::yield();
      r.status = 0;
      break;
    case SyscallClass::Nanosleep:
    case SyscallClass::Munmap:
    case SyscallClass::Brk:
      // Time and memory are simulated; the host only acknowledges.
      r.status = 0;
      break;
    case SyscallClass::Futex:
    case SyscallClass::Spinlock:
      r.status = -1;
      break;
  }
  return r;
}

std::pair<std::int64_t, std::int64_t> status_range(const SyscallRequest& req) {
  constexpr std::int64_t kMaxFd = std::numeric_limits<std::int32_t>::max();
  switch (req.cls) {
    case SyscallClass::Read: return {-1, static_cast<std::int64_t>(req.out_capacity)};
    case SyscallClass::Write: return {-1, static_cast<std::int64_t>(req.in_payload.size())};
    case SyscallClass::Open: return {-1, kMaxFd};
    case SyscallClass::Close:
    case SyscallClass::Rename:
    case SyscallClass::Munmap:
    case SyscallClass::Brk:
    case SyscallClass::Nanosleep: return {-1, 0};
    case SyscallClass::SchedYield: return {0, 0};
    case SyscallClass::Futex:
    case SyscallClass::Spinlock: return {0, -1};  // empty: never valid
  }
  return {0, -1};
}

SyscallBridge::SyscallBridge(enclave::Enclave& enclave, sched::Scheduler* scheduler,
                             std::unique_ptr<HostBackend> host, BridgeOptions options)
    : enclave_(enclave), scheduler_(scheduler), host_(std::move(host)), options_(options) {
  if (!host_) raise(Errc::InvalidArgument, "syscall bridge needs a host backend");
  if (options_.queue_depth == 0) raise(Errc::ConfigInvalid, "queue depth must be positive");
  if (options_.synchronous) return;
  if (options_.workers == 0) raise(Errc::ConfigInvalid, "asynchronous bridge needs workers");
  for (unsigned i = 0; i < options_.workers; ++i) workers_.emplace_back([this] { worker_main(); });
  if (scheduler_) scheduler_->add_poller([this] { drain(); });
}

SyscallBridge::~SyscallBridge() {
  {
    std::lock_guard lk(mu_);
    stopping_ = true;
  }
  request_cv_.notify_all();
  for (auto& w : workers_) w.join();
}

std::uint64_t SyscallBridge::service_cost(const SyscallRequest& req) const {
  const auto& c = enclave_.costs();
  return c.syscall_base + (req.in_payload.size() + req.out_capacity) / c.syscall_bytes_per_unit;
}

Ticket SyscallBridge::submit(SyscallRequest req) {
  if (!crosses_bridge(req.cls)) {
    raise(Errc::InvalidArgument,
          std::string(to_string(req.cls)) + " is serviced inside the enclave, not by the host");
  }
  if (req.out_capacity > options_.max_out_capacity) {
    raise(Errc::InvalidArgument, "output capacity " + std::to_string(req.out_capacity) +
                                     " exceeds the bridge maximum");
  }
  std::uint64_t now = enclave_.now();
  std::uint64_t cost = service_cost(req);
  std::lock_guard lk(mu_);
  if (in_flight_ >= options_.queue_depth) {
    raise(Errc::QueueFull, "syscall queue holds " + std::to_string(in_flight_) + " requests");
  }
  req.id = next_id_++;
  Pending p;
  p.submitted_at = now;
  p.ready_at = now + cost;
  p.req.id = req.id;
  p.req.cls = req.cls;
  p.req.args = req.args;
  p.req.out_capacity = req.out_capacity;
  p.req.out_address = req.out_address;
  // Write validation needs the request length, not the data.
  p.req.in_payload.resize(req.cls == SyscallClass::Write ? req.in_payload.size() : 0);
  Ticket t{req.id, p.ready_at};
  pending_.emplace(req.id, std::move(p));
  ++in_flight_;
  ++stats_.submitted;
  ++stats_.queued_by_class[static_cast<std::size_t>(req.cls)];
  requests_.push_back(std::move(req));
  request_cv_.notify_one();
  return t;
}

void SyscallBridge::worker_main() {
  for (;;) {
    SyscallRequest req;
    {
      std::unique_lock lk(mu_);
      request_cv_.wait(lk, [&] { return stopping_ || !requests_.empty(); });
      if (requests_.empty()) return;
      req = std::move(requests_.front());
      requests_.pop_front();
    }
    SyscallResponse resp;
    try {
      resp = host_->execute(req);
    } catch (...) {
      resp = SyscallResponse{req.id, -1, {}};
    }
    {
      std::lock_guard lk(mu_);
      responses_.push_back(std::move(resp));
    }
    response_cv_.notify_all();
    if (scheduler_) scheduler_->notify();
  }
}

void SyscallBridge::complete(SyscallResponse resp) {
  std::unique_lock lk(mu_);
  auto it = pending_.find(resp.id);
  if (it == pending_.end() || it->second.resolved) {
    ++stats_.violations;
    lk.unlock();
    raise(Errc::IagoViolation, "response for id " + std::to_string(resp.id) +
                                   " that is not outstanding");
  }
  Pending& p = it->second;
  auto reason = validate(p.req, resp, options_.max_out_capacity);
  p.resolved = true;
  --in_flight_;
  if (reason) {
    p.violation = true;
    ++stats_.violations;
  } else {
    p.status = resp.status;
    p.payload = std::move(resp.payload);
    ++stats_.delivered;
  }
  std::uint64_t id = resp.id;
  lk.unlock();
  response_cv_.notify_all();
  if (scheduler_) scheduler_->ticket_ready(id);
  if (reason) raise(Errc::IagoViolation, *reason);
}

void SyscallBridge::drain() {
  std::deque<SyscallResponse> batch;
  {
    std::lock_guard lk(mu_);
    batch.swap(responses_);
  }
  for (auto& r : batch) {
    try {
      complete(std::move(r));
    } catch (const Error& e) {
      if (e.code() != Errc::IagoViolation) throw;
    }
  }
}

SyscallResult SyscallBridge::wait(const Ticket& ticket) {
  bool green = scheduler_ && sched::Scheduler::current() == scheduler_;
  if (green) {
    scheduler_->block_on_ticket(ticket.id, ticket.ready_at);
  } else {
    for (;;) {
      drain();
      std::unique_lock lk(mu_);
      auto it = pending_.find(ticket.id);
      if (it == pending_.end()) raise(Errc::InvalidArgument, "unknown ticket");
      if (it->second.resolved) break;
      response_cv_.wait(lk, [&] { return !responses_.empty() || it->second.resolved; });
    }
    std::uint64_t now = enclave_.now();
    if (ticket.ready_at > now) enclave_.charge_idle(ticket.ready_at - now);
  }

  Pending p;
  {
    std::lock_guard lk(mu_);
    auto it = pending_.find(ticket.id);
    if (it == pending_.end() || !it->second.resolved) {
      raise(Errc::SchedulerMisuse, "ticket " + std::to_string(ticket.id) + " resumed unresolved");
    }
    p = std::move(it->second);
    pending_.erase(it);
  }
  enclave_.record_syscall(p.req.cls, p.ready_at - p.submitted_at, true);
  if (p.violation) {
    raise(Errc::IagoViolation, std::string(to_string(p.req.cls)) + " response rejected");
  }
  if (p.req.out_address != 0 && !p.payload.empty()) {
    enclave_.mem_access(p.req.out_address, p.payload.size(), enclave::AccessKind::Write);
  }
  return SyscallResult{p.status, std::move(p.payload)};
}

SyscallResult SyscallBridge::call_synchronous(SyscallRequest req) {
  if (!crosses_bridge(req.cls)) {
    raise(Errc::InvalidArgument,
          std::string(to_string(req.cls)) + " is serviced inside the enclave, not by the host");
  }
  {
    std::lock_guard lk(mu_);
    req.id = next_id_++;
  }
  bool enclaved = enclave_.mode() != enclave::ExecMode::Native;
  if (enclaved) enclave_.record_exit();
  SyscallResponse resp = host_->execute(req);
  if (enclaved) enclave_.record_entry();
  std::uint64_t cost = service_cost(req);
  enclave_.charge_syscall(cost);
  enclave_.record_syscall(req.cls, cost, false);
  auto reason = resp.id == req.id ? validate(req, resp, options_.max_out_capacity)
                                  : std::optional<std::string>("response id mismatch");
  if (reason) {
    std::lock_guard lk(mu_);
    ++stats_.violations;
    raise(Errc::IagoViolation, *reason);
  }
  if (req.out_address != 0 && !resp.payload.empty()) {
    enclave_.mem_access(req.out_address, resp.payload.size(), enclave::AccessKind::Write);
  }
  {
    std::lock_guard lk(mu_);
    ++stats_.submitted;
    ++stats_.delivered;
  }
  return SyscallResult{resp.status, std::move(resp.payload)};
}

SyscallResult SyscallBridge::call(SyscallRequest req) {
  if (options_.synchronous) return call_synchronous(std::move(req));
  for (;;) {
    try {
      Ticket t = submit(req);
      return wait(t);
    } catch (const Error& e) {
      if (e.code() != Errc::QueueFull) throw;
    }
    if (scheduler_ && sched::Scheduler::current() == scheduler_) {
      scheduler_->yield_now();
    } else {
      drain();
      std::this_thread::yield();
    }
  }
}

std::size_t SyscallBridge::in_flight() const {
  std::lock_guard lk(mu_);
  return in_flight_;
}

BridgeStats SyscallBridge::stats() const {
  std::lock_guard lk(mu_);
  return stats_;
}

}  // namespace shieldrun::bridge
