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

#include <algorithm>
#include <list>
#include <random>

#include "doctest.h"
#include "shieldrun/common/error.hpp"
#include "shieldrun/enclave/enclave.hpp"

using namespace shieldrun;
using namespace shieldrun::enclave;

namespace {

Bytes image(std::string_view s) { return Bytes(s.begin(), s.end()); }

// Reference LRU over page ids kept in a plain list, most recent first.
struct ListLru {
  std::size_t capacity;
  std::list<std::uint64_t> order;
  std::uint64_t hits = 0, misses = 0, evictions = 0;

  void touch(std::uint64_t page) {
    auto it = std::find(order.begin(), order.end(), page);
    if (it != order.end()) {
      ++hits;
      order.erase(it);
    } else {
      ++misses;
      if (order.size() == capacity) {
        order.pop_back();
        ++evictions;
      }
    }
    order.push_front(page);
  }
};

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

TEST_CASE("create_enclave is deterministic and measures config") {
  EnclaveConfig c;
  c.epc_limit = 1 * MiB;
  auto a = Enclave::create(image("image A"), c);
  auto b = Enclave::create(image("image A"), c);
  CHECK(a->measurement() == b->measurement());
  CHECK(a->measurement().hex().size() == 64);

  EnclaveConfig c2 = c;
  c2.heap_limit = 128 * MiB;
  CHECK_FALSE(Enclave::create(image("image A"), c2)->measurement() == a->measurement());
}

TEST_CASE("code cannot be loaded after creation") {
  auto e = Enclave::create(image("x"), EnclaveConfig{});
  CHECK(code_of([&] { e->load_code(image("more")); }) == Errc::AlreadyFinalized);
}

TEST_CASE("invalid configs are rejected") {
  EnclaveConfig c;
  c.heap_limit = 0;
  CHECK(code_of([&] { Enclave::create(image("x"), c); }) == Errc::ConfigInvalid);
  c = {};
  c.epc_limit = 0;
  CHECK(code_of([&] { Enclave::create(image("x"), c); }) == Errc::ConfigInvalid);
  c = {};
  c.tcs_count = 0;
  CHECK(code_of([&] { Enclave::create(image("x"), c); }) == Errc::ConfigInvalid);
  CHECK(code_of([&] { Enclave::create(Bytes{}, EnclaveConfig{}); }) == Errc::ConfigInvalid);
}

TEST_CASE("four thread control structures by default") {
  auto e = Enclave::create(image("x"), EnclaveConfig{});
  for (int i = 0; i < 4; ++i) e->acquire_tcs();
  CHECK(e->tcs_in_use() == 4);
  CHECK(code_of([&] { e->acquire_tcs(); }) == Errc::NoFreeTcs);
  e->release_tcs(2);
  CHECK(e->acquire_tcs() == 2);
}

TEST_CASE("measure ignores secrets and sees every code byte") {
  EnclaveConfig c;
  Bytes code = image("some enclave code image");
  Measurement m = measure(code, c);
  CHECK(measure(code, c) == m);

  EnclaveConfig keyed = c;
  keyed.fs_key = crypto::SymmetricKey::random();
  keyed.tls_identity = crypto::SigningKeyPair::generate();
  CHECK(measure(code, keyed) == m);

  for (std::size_t i = 0; i < code.size(); ++i) {
    Bytes flipped = code;
    flipped[i] ^= 0x01;
    CHECK_FALSE(measure(flipped, c) == m);
  }
  EnclaveConfig pol = c;
  pol.shield_policies.push_back({"/secure", fs::ShieldMode::EncryptAuth});
  CHECK_FALSE(measure(code, pol) == m);
  CHECK(Measurement::from_hex(m.hex()) == m);
}

TEST_CASE("read_env_config parses sizes and defaults") {
  auto c = read_env_config({{"TS_HEAP", "220M"}});
  CHECK(c.heap_limit == 230686720ull);
  CHECK(c.epc_limit == 90 * MiB);
  CHECK(c.stack_limit == 8 * MiB);
  CHECK(c.tcs_count == 4);
  CHECK(c.mode == ExecMode::HardwareSim);

  auto d = read_env_config({{"TS_EPC", "64K"}, {"TS_STACK", "1G"}, {"TS_TCS", "8"},
                            {"TS_MODE", "simulation"}});
  CHECK(d.epc_limit == 64 * KiB);
  CHECK(d.stack_limit == GiB);
  CHECK(d.tcs_count == 8);
  CHECK(d.mode == ExecMode::Simulation);

  CHECK(code_of([] { read_env_config({{"TS_HEAP", "abc"}}); }) == Errc::ParseError);
  CHECK(code_of([] { read_env_config({{"TS_HEAP", "12X"}}); }) == Errc::ParseError);
  CHECK(code_of([] { read_env_config({{"TS_HEAP", ""}}); }) == Errc::ParseError);
  CHECK(code_of([] { read_env_config({{"TS_MODE", "sgx"}}); }) == Errc::ModeUnknown);
  CHECK(parse_size("4096") == 4096);
  CHECK(parse_size("2G") == 2 * GiB);
}

TEST_CASE("mem_access: fits in EPC, second pass all hits") {
  EnclaveConfig c;
  c.epc_limit = 8 * 4096;
  auto e = Enclave::create(image("x"), c);
  for (int p = 0; p < 8; ++p) e->mem_access(p * 4096, 1, AccessKind::Read);
  std::uint64_t cost = 0;
  for (int p = 0; p < 8; ++p) cost += e->mem_access(p * 4096, 1, AccessKind::Read);
  CHECK(cost == 8 * e->costs().cost_hit);
  CHECK(e->paging_counters().hits == 8);
  CHECK(e->paging_counters().misses == 8);
}

TEST_CASE("mem_access: 16-page cycle through 8-page EPC never hits") {
  EnclaveConfig c;
  c.epc_limit = 8 * 4096;
  auto e = Enclave::create(image("x"), c);
  ListLru ref{8, {}};
  for (int pass = 0; pass < 5; ++pass) {
    for (int p = 0; p < 16; ++p) {
      e->mem_access(p * 4096, 4096, AccessKind::Write);
      ref.touch(p);
    }
  }
  CHECK(ref.hits == 0);
  CHECK(e->paging_counters().hits == ref.hits);
  CHECK(e->paging_counters().misses == ref.misses);
  CHECK(e->paging_counters().evictions == ref.evictions);
}

TEST_CASE("mem_access bounds") {
  EnclaveConfig c;
  c.heap_limit = 1 * MiB;
  auto e = Enclave::create(image("x"), c);
  CHECK(code_of([&] { e->mem_access(c.heap_limit, 1, AccessKind::Read); }) == Errc::OutOfBounds);
  CHECK(code_of([&] { e->mem_access(c.heap_limit - 10, 11, AccessKind::Read); }) ==
        Errc::OutOfBounds);
  e->mem_access(c.heap_limit - 10, 10, AccessKind::Read);
}

TEST_CASE("native and simulation track residency at zero cost") {
  for (ExecMode m : {ExecMode::Native, ExecMode::Simulation}) {
    EnclaveConfig c;
    c.mode = m;
    c.epc_limit = 4 * 4096;
    auto e = Enclave::create(image("x"), c);
    std::uint64_t cost = 0;
    for (int p = 0; p < 32; ++p) cost += e->mem_access(p * 4096, 8, AccessKind::Read);
    CHECK(cost == 0);
    CHECK(e->paging_counters().misses == 32);
    CHECK(e->resident_pages() == 4);
    e->charge_transition_pair();
    CHECK(e->ledger().transitions == 0);
    CHECK(e->ledger().paging == 0);
  }
}

TEST_CASE("property: paging model agrees with reference LRU on random traces") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    std::uint64_t cap = 1 + rng() % 24;
    std::uint64_t span = 1 + rng() % 64;
    PagingModel pm(cap * 4096, 4096, 1, 1000);
    ListLru ref{static_cast<std::size_t>(cap), {}};
    std::uint64_t cost = 0, ref_cost = 0;
    for (int i = 0; i < 400; ++i) {
      std::uint64_t page = rng() % span;
      std::uint64_t before = ref.hits;
      ref.touch(page);
      ref_cost += ref.hits > before ? 1 : 1000;
      cost += pm.touch_page(page);
      REQUIRE(pm.resident_pages() * 4096 <= pm.epc_limit());
    }
    CHECK(pm.counters().hits == ref.hits);
    CHECK(pm.counters().misses == ref.misses);
    CHECK(pm.counters().evictions == ref.evictions);
    CHECK(pm.counters().accesses() == 400);
    CHECK(cost == ref_cost);
  }
}

TEST_CASE("property: evictions only on misses with a full resident set") {
  std::mt19937_64 rng(11);
  PagingModel pm(6 * 4096, 4096, 1, 1000);
  for (int i = 0; i < 2000; ++i) {
    auto before = pm.counters();
    bool full = pm.resident_pages() == pm.capacity_pages();
    std::uint64_t page = rng() % 20;
    bool was_resident = pm.resident(page);
    pm.touch_page(page);
    auto after = pm.counters();
    std::uint64_t ev = after.evictions - before.evictions;
    CHECK(ev == ((!was_resident && full) ? 1u : 0u));
  }
}

TEST_CASE("property: total cost is non-increasing in EPC size") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<std::uint64_t> trace(600);
    for (auto& p : trace) p = rng() % 48;
    std::uint64_t prev = UINT64_MAX;
    for (std::uint64_t cap = 1; cap <= 50; ++cap) {
      PagingModel pm(cap * 4096, 4096, 1, 1000);
      std::uint64_t cost = 0;
      for (auto p : trace) cost += pm.touch_page(p);
      CHECK(cost <= prev);
      prev = cost;
    }
  }
}

TEST_CASE("cliff: 2x EPC sweep costs at least 10x a 0.5x EPC sweep") {
  const std::uint64_t epc = 256 * 4096;
  auto mean_cost = [&](std::uint64_t working_set) {
    PagingModel pm(epc, 4096, 1, 1000);
    std::uint64_t pages = working_set / 4096;
    for (std::uint64_t p = 0; p < pages; ++p) pm.touch_page(p);  // warm-up
    std::uint64_t cost = 0;
    for (int pass = 0; pass < 4; ++pass)
      for (std::uint64_t p = 0; p < pages; ++p) cost += pm.touch_page(p);
    return static_cast<double>(cost) / static_cast<double>(4 * pages);
  };
  double small = mean_cost(epc / 2);
  double large = mean_cost(2 * epc);
  CHECK(small == doctest::Approx(1.0));
  CHECK(large >= 10 * small);
}

TEST_CASE("heap allocator: alignment, reuse and high water") {
  EnclaveHeap h(1 * MiB, 4096);
  auto a = h.allocate(10);
  auto b = h.allocate(5000);
  CHECK(a % 64 == 0);
  CHECK(b % 4096 == 0);
  CHECK(h.live_blocks() == 2);
  auto hw = h.high_water();
  h.release(b);
  auto c = h.allocate(5000);
  CHECK(c == b);
  CHECK(h.high_water() == hw);
  CHECK(code_of([&] { h.allocate(2 * MiB); }) == Errc::OutOfMemory);
  h.release(a);
  h.release(c);
  CHECK(h.live_bytes() == 0);
  CHECK(h.allocate(1 * MiB) == 0);
}

TEST_CASE("transition counters balance and cost only in hardware-sim") {
  auto e = Enclave::create(image("x"), EnclaveConfig{});
  e->charge_transition_pair();
  e->record_exit();
  e->record_entry();
  CHECK(e->transitions().sync_exits == e->transitions().sync_entries);
  CHECK(e->ledger().transitions == 4 * e->costs().cost_per_transition);
  CHECK(e->now() == e->ledger().total());
}

TEST_CASE("provisioning happens once") {
  auto e = Enclave::create(image("x"), EnclaveConfig{});
  CHECK_FALSE(e->provisioned());
  SecretBundle s{crypto::SymmetricKey::random(), {}, ""};
  e->provision(s);
  CHECK(e->provisioned());
  CHECK(e->fs_key().has_value());
  CHECK(code_of([&] { e->provision(s); }) == Errc::AlreadyProvisioned);
}
