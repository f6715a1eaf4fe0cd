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

#include <filesystem>
#include <fstream>
#include <functional>
#include <random>

#include "doctest.h"
#include "shieldrun/bridge/bridge.hpp"
#include "shieldrun/common/error.hpp"
#include "shieldrun/runtime/runtime.hpp"

using namespace shieldrun;
using namespace shieldrun::bridge;

namespace {

Bytes code() { return Bytes{'b', 'r', 'i', 'd', 'g', 'e'}; }

std::unique_ptr<enclave::Enclave> make_enclave(enclave::ExecMode mode = enclave::ExecMode::HardwareSim) {
  enclave::EnclaveConfig c;
  c.mode = mode;
  c.heap_limit = 16 * enclave::MiB;
  c.epc_limit = 4 * enclave::MiB;
  return enclave::Enclave::create(code(), c);
}

// Host whose answers are rewritten by a test-supplied function.
struct TamperingHost : HostBackend {
  std::function<void(SyscallResponse&)> tamper;
  PosixHost real;
  SyscallResponse execute(const SyscallRequest& req) override {
    SyscallResponse r = real.execute(req);
    if (tamper) tamper(r);
    return r;
  }
};

std::filesystem::path temp_file(std::size_t n) {
  auto p = std::filesystem::temp_directory_path() /
           ("shieldrun_bridge_" + std::to_string(::getpid()) + "_" + std::to_string(n));
  std::ofstream f(p, std::ios::binary);
  for (std::size_t i = 0; i < n; ++i) f.put(static_cast<char>(i * 7));
  return p;
}

SyscallRequest open_req(const std::string& path) {
  SyscallRequest r;
  r.cls = SyscallClass::Open;
  r.in_payload.assign(path.begin(), path.end());
  r.args[0] = kOpenRead;
  return r;
}

SyscallRequest read_req(std::int64_t fd, std::uint64_t n, std::int64_t offset = 0) {
  SyscallRequest r;
  r.cls = SyscallClass::Read;
  r.args[0] = fd;
  r.args[1] = offset;
  r.out_capacity = n;
  return r;
}

template <class Fn>
Errc code_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return Errc::InvalidArgument;
}

}  // namespace

TEST_CASE("read of 100 bytes resolves with a 100-byte payload") {
  auto e = make_enclave();
  SyscallBridge b(*e, nullptr, std::make_unique<PosixHost>());
  auto path = temp_file(300);
  auto fd = b.call(open_req(path)).status;
  REQUIRE(fd >= 0);
  auto r = b.call(read_req(fd, 100, 50));
  CHECK(r.status == 100);
  REQUIRE(r.payload.size() == 100);
  CHECK(r.payload[0] == static_cast<std::uint8_t>(50 * 7));
  SyscallRequest c;
  c.cls = SyscallClass::Close;
  c.args[0] = fd;
  CHECK(b.call(c).status == 0);
  CHECK(e->transitions().sync_exits == 0);
  std::filesystem::remove(path);
}

TEST_CASE("65 submits without draining: the 65th is QueueFull") {
  auto e = make_enclave();
  SyscallBridge b(*e, nullptr, std::make_unique<PosixHost>());
  std::vector<Ticket> tickets;
  for (int i = 0; i < 64; ++i) {
    SyscallRequest r;
    r.cls = SyscallClass::SchedYield;
    tickets.push_back(b.submit(r));
  }
  SyscallRequest r;
  r.cls = SyscallClass::SchedYield;
  CHECK(code_of([&] { b.submit(r); }) == Errc::QueueFull);
  for (auto& t : tickets) b.wait(t);
  CHECK(b.in_flight() == 0);
  b.wait(b.submit(r));
}

TEST_CASE("sched_yield completes with status 0 and no payload") {
  auto e = make_enclave();
  SyscallBridge b(*e, nullptr, std::make_unique<PosixHost>());
  SyscallRequest r;
  r.cls = SyscallClass::SchedYield;
  auto res = b.call(r);
  CHECK(res.status == 0);
  CHECK(res.payload.empty());
}

TEST_CASE("oversized payload is an Iago violation and never delivered") {
  auto e = make_enclave();
  auto host = std::make_unique<TamperingHost>();
  host->tamper = [](SyscallResponse& r) {
    r.payload.assign(101, 0xAA);
    r.status = 101;
  };
  SyscallBridge b(*e, nullptr, std::move(host));
  auto path = temp_file(300);
  SyscallRequest o = open_req(path);
  // open itself gets a tampered payload too.
  CHECK(code_of([&] { b.call(o); }) == Errc::IagoViolation);
  CHECK(code_of([&] { b.call(read_req(0, 100)); }) == Errc::IagoViolation);
  CHECK(b.stats().violations == 2);
  CHECK(b.stats().delivered == 0);
  std::filesystem::remove(path);
}

TEST_CASE("response for an id never issued is an Iago violation") {
  auto e = make_enclave();
  SyscallBridge b(*e, nullptr, std::make_unique<PosixHost>());
  CHECK(code_of([&] { b.complete(SyscallResponse{424242, 0, {}}); }) == Errc::IagoViolation);
}

TEST_CASE("status outside the class range is rejected") {
  auto e = make_enclave();
  auto host = std::make_unique<TamperingHost>();
  host->tamper = [](SyscallResponse& r) { r.status = 7; };
  SyscallBridge b(*e, nullptr, std::move(host));
  SyscallRequest r;
  r.cls = SyscallClass::Close;
  r.args[0] = -1;
  CHECK(code_of([&] { b.call(r); }) == Errc::IagoViolation);
}

TEST_CASE("a valid response resumes the waiter exactly once") {
  auto e = make_enclave();
  SyscallBridge b(*e, nullptr, std::make_unique<PosixHost>());
  SyscallRequest r;
  r.cls = SyscallClass::SchedYield;
  Ticket t = b.submit(r);
  b.wait(t);
  // A duplicate of the same response must not deliver again.
  CHECK(code_of([&] { b.complete(SyscallResponse{t.id, 0, {}}); }) == Errc::IagoViolation);
  CHECK(code_of([&] { b.wait(t); }) == Errc::InvalidArgument);
  CHECK(b.stats().delivered == 1);
}

TEST_CASE("futex and spinlock never enter the bridge queue") {
  auto e = make_enclave();
  SyscallBridge b(*e, nullptr, std::make_unique<PosixHost>());
  SyscallRequest r;
  r.cls = SyscallClass::Futex;
  CHECK(code_of([&] { b.submit(r); }) == Errc::InvalidArgument);
  r.cls = SyscallClass::Spinlock;
  CHECK(code_of([&] { b.submit(r); }) == Errc::InvalidArgument);
  CHECK(b.stats().queued_by_class[static_cast<std::size_t>(SyscallClass::Futex)] == 0);
  CHECK(b.stats().submitted == 0);
}

TEST_CASE("synchronous fallback charges exactly one exit and entry per call") {
  auto e = make_enclave();
  BridgeOptions o;
  o.synchronous = true;
  SyscallBridge b(*e, nullptr, std::make_unique<PosixHost>(), o);
  SyscallRequest r;
  r.cls = SyscallClass::SchedYield;
  for (int i = 0; i < 5; ++i) b.call(r);
  CHECK(e->transitions().sync_exits == 5);
  CHECK(e->transitions().sync_entries == 5);
  CHECK(e->ledger().transitions == 10 * e->costs().cost_per_transition);
}

TEST_CASE("green threads issue syscalls concurrently through the runtime") {
  enclave::EnclaveConfig c;
  c.heap_limit = 16 * enclave::MiB;
  c.epc_limit = 4 * enclave::MiB;
  runtime::Runtime rt(code(), c);
  auto path = temp_file(4096);
  std::vector<int> sizes(20, -1);
  rt.run_main([&] {
    auto& s = rt.scheduler();
    std::vector<sched::Tid> kids;
    for (int i = 0; i < 20; ++i) {
      kids.push_back(s.spawn([&, i] {
        auto fd = rt.bridge().call(open_req(path)).status;
        auto r = rt.bridge().call(read_req(fd, 64 + i, i));
        sizes[i] = static_cast<int>(r.payload.size());
        SyscallRequest cl;
        cl.cls = SyscallClass::Close;
        cl.args[0] = fd;
        rt.bridge().call(cl);
      }));
    }
    for (auto k : kids) s.join(k);
  });
  for (int i = 0; i < 20; ++i) CHECK(sizes[i] == 64 + i);
  auto prof = rt.enclave().profile();
  CHECK(prof.stats(SyscallClass::Read).bridge_calls == 20);
  CHECK(prof.stats(SyscallClass::Futex).bridge_calls == 0);
  auto tr = rt.enclave().transitions();
  CHECK(tr.sync_exits == tr.sync_entries);
  CHECK(tr.sync_exits <= 2);  // only the runtime thread entering and leaving
  std::filesystem::remove(path);
}

TEST_CASE("runtime virtual time is deterministic") {
  auto once = [] {
    enclave::EnclaveConfig c;
    c.heap_limit = 16 * enclave::MiB;
    c.epc_limit = 4 * enclave::MiB;
    runtime::Runtime rt(code(), c);
    rt.run_main([&] {
      auto& s = rt.scheduler();
      for (int i = 0; i < 8; ++i) {
        s.spawn([&, i] {
          for (int k = 0; k < 3; ++k) {
            rt.enclave().charge_compute(1000 * (i + 1));
            SyscallRequest r;
            r.cls = SyscallClass::Nanosleep;
            rt.bridge().call(r);
          }
        });
      }
    });
    return std::make_pair(rt.enclave().now(), rt.enclave().profile().render_csv());
  };
  auto a = once();
  auto b = once();
  CHECK(a == b);
}

TEST_CASE("property: malformed responses never reach the caller") {
  std::mt19937_64 rng(99);
  auto e = make_enclave();
  auto host = std::make_unique<TamperingHost>();
  auto* h = host.get();
  SyscallBridge b(*e, nullptr, std::move(host));
  auto path = temp_file(1000);
  auto fd = b.call(open_req(path)).status;
  for (int trial = 0; trial < 300; ++trial) {
    std::uint64_t cap = 1 + rng() % 200;
    int kind = static_cast<int>(rng() % 3);
    h->tamper = [kind, cap, &rng](SyscallResponse& r) {
      switch (kind) {
        case 0: r.payload.resize(cap + 1 + rng() % 10, 0xEE); r.status = static_cast<std::int64_t>(r.payload.size()); break;
        case 1: r.status = -2 - static_cast<std::int64_t>(rng() % 100); r.payload.clear(); break;
        default: r.status = static_cast<std::int64_t>(cap) + 1; break;
      }
    };
    bool rejected = false;
    try {
      auto res = b.call(read_req(fd, cap));
      (void)res;
    } catch (const Error& err) {
      rejected = err.code() == Errc::IagoViolation;
    }
    CHECK(rejected);
    CHECK(b.in_flight() == 0);
    h->tamper = nullptr;
  }
  std::filesystem::remove(path);
}
