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

// Acceptance run: one PASS/FAIL line per criterion, exit status 1 when any
// criterion fails.

#include <malloc.h>

#include <chrono>
#include <cstdio>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <thread>

#include "ml_checks.hpp"
#include "sched_workload.hpp"
#include "shieldrun/bench/bench.hpp"
#include "shieldrun/cas/service.hpp"
#include "shieldrun/fs/host_io.hpp"
#include "shieldrun/fs/shield.hpp"
#include "shieldrun/net/channel.hpp"
#include "shieldrun/net/transport.hpp"
#include "test_util.hpp"

using namespace shieldrun;
using namespace testutil;
using enclave::ExecMode;

namespace {

int failed = 0;

void report(int id, const std::string& name, bool pass, const std::string& detail) {
  std::printf("[%s] %d. %s: %s\n", pass ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failed;
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

class Stopwatch {
 public:
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count(); }

 private:
  std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

struct Bench {
  TempDir dir{"accept"};
  bench::Workspace ws{dir.path("work")};
  crypto::SymmetricKey key = crypto::SymmetricKey::random();

  Bench() { bench::prepare_default_workspace(ws, key); }

  bench::BenchConfig config(ExecMode mode, bool shield = true) const {
    bench::BenchConfig c;
    c.mode = mode;
    c.fs_shield = shield;
    c.fs_key = key;
    return c;
  }
  bench::ClassifyResult classify(ExecMode mode, bool shield, std::uint64_t epc, std::size_t images = 100) const {
    bench::ClassifyOptions o;
    o.config = config(mode, shield);
    o.config.epc_limit = epc;
    o.images = images;
    return bench::run_classify(ws, o);
  }
  bench::TrainResult train(ExecMode mode, bool shield, std::uint64_t epc, int steps = 3) const {
    bench::TrainOptions o;
    o.config = config(mode, shield);
    o.config.epc_limit = epc;
    o.steps = steps;
    o.batch = 32;
    return bench::run_train(ws, o);
  }
};

void transparency(const Bench& b, std::uint64_t epc) {
  Stopwatch sw;
  std::optional<bench::ClassifyResult> first;
  bool same = true;
  int runs = 0;
  for (auto mode : {ExecMode::Native, ExecMode::Simulation, ExecMode::HardwareSim}) {
    for (bool shield : {true, false}) {
      auto r = b.classify(mode, shield, epc, 20);
      ++runs;
      if (!first) {
        first = std::move(r);
        continue;
      }
      same = same && r.logits.size() == first->logits.size() && r.top == first->top;
      for (std::size_t i = 0; same && i < r.logits.size(); ++i) same = r.logits[i].same_as(first->logits[i]);
    }
  }
  const double t = sw.seconds();
  report(1, "shield transparency", same && t < 10.0,
         std::to_string(runs) + " runs (3 modes x fs shield on/off, 20 images), logits " +
             (same ? "bitwise identical" : "DIFFER") + fmt(", %.2f s (limit 10 s)", t));
}

void epc_cliff() {
  Stopwatch sw;
  bench::SweepOptions o;
  const auto lo = bench::sweep_point(o, o.epc_limit / 2), hi = bench::sweep_point(o, o.epc_limit * 2);
  const double ratio = hi.mean_cost / lo.mean_cost, t = sw.seconds();
  report(2, "EPC cliff", ratio >= 10.0 && t < 5.0,
         fmt("mean access cost %.1f at 2xEPC vs %.1f at 0.5xEPC, ratio %.0f (>= 10), %.2f s (limit 5 s)", hi.mean_cost,
             lo.mean_cost, ratio, t));
}

void futex_and_overhead(const Bench& b, std::uint64_t epc, const bench::ClassifyResult& hw_on) {
  Stopwatch sw;
  auto hw_off = b.classify(ExecMode::HardwareSim, false, epc);
  auto tr_on = b.train(ExecMode::HardwareSim, true, epc);
  auto tr_off = b.train(ExecMode::HardwareSim, false, epc);
  const double t = sw.seconds();
  const double dc = static_cast<double>(hw_on.report.total()) / hw_off.report.total() - 1.0;
  const double dt = static_cast<double>(tr_on.report.total()) / tr_off.report.total() - 1.0;
  report(4, "FS shield overhead", std::abs(dc) <= 0.05 && std::abs(dt) <= 0.05 && t < 60.0,
         fmt("classify %+.2f%%, train %+.2f%% (limit 5%%), %.1f s (limit 60 s)", 100 * dc, 100 * dt, t));

  const double fc = hw_on.report.profile.percent(bridge::SyscallClass::Futex);
  const double ft = tr_on.report.profile.percent(bridge::SyscallClass::Futex);
  const auto crossings = hw_on.report.profile.stats(bridge::SyscallClass::Futex).bridge_calls +
                         tr_on.report.profile.stats(bridge::SyscallClass::Futex).bridge_calls;
  report(5, "syscall profile shape", fc > 90.0 && ft > 80.0 && crossings == 0,
         fmt("futex share classify %.2f%% (> 90), train %.2f%% (> 80), futex bridge crossings %.0f", fc, ft,
             static_cast<double>(crossings)));
}

// (a) TSFS single-bit tampering.
std::string tsfs_tamper(int trials, bool& ok) {
  TempDir t("accept_fs");
  fs::PosixHostIo io;
  fs::FileShield sh(io, t.policies(), nullptr, crypto::SymmetricKey::random(), 1024);
  std::mt19937_64 rng(11);
  Bytes data = make_data(rng, 5000);
  const std::string p = t.path("secure/t.bin");
  sh.write_file(p, data);
  const Bytes pristine = slurp(p);
  int detected = 0;
  for (int i = 0; i < trials; ++i) {
    Bytes bad = pristine;
    const std::size_t bit = rng() % (bad.size() * 8);
    bad[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
    spit(p, bad);
    std::optional<Bytes> exposed;
    try {
      exposed = sh.read_file(p);
    } catch (const Error& e) {
      detected += e.code() == Errc::TamperDetected;
    }
    if (exposed) ok = false;
  }
  ok = ok && detected == trials;
  return std::to_string(detected) + "/" + std::to_string(trials) + " tampers detected";
}

struct ChannelPair {
  std::optional<net::SecureChannel> client, server;
};

ChannelPair connect_pair() {
  auto [a, b] = net::memory_pipe();
  net::HandshakeOptions co, so;
  co.identity = crypto::SigningKeyPair::generate();
  so.identity = crypto::SigningKeyPair::generate();
  ChannelPair p;
  std::thread server([&, &st = *b] { p.server.emplace(net::SecureChannel::accept(st, so)); });
  p.client.emplace(net::SecureChannel::connect(*a, co));
  server.join();
  return p;
}

// (b) Record layer adversary: replay, reorder, drop, bit flips,
// truncation, foreign records. The receiver may only ever accept the
// untouched prefix, and must fail exactly when the stream was altered.
std::string channel_adversary(int trials, bool& ok) {
  std::mt19937_64 rng(2026);
  auto foreign = connect_pair();
  int altered = 0, rejected = 0, prefixes = 0, bad = 0;
  for (int trial = 0; trial < trials; ++trial) {
    auto p = connect_pair();
    const std::size_t n = 1 + rng() % 8;
    std::vector<Bytes> msgs, honest;
    for (std::size_t i = 0; i < n; ++i) {
      msgs.push_back(make_data(rng, rng() % 64));
      honest.push_back(p.client->seal_record(msgs.back()));
    }
    std::vector<Bytes> wire = honest;
    const int ops = 1 + static_cast<int>(rng() % 3);
    for (int k = 0; k < ops && !wire.empty(); ++k) {
      const std::size_t i = rng() % wire.size();
      switch (rng() % 6) {
        case 0: wire.insert(wire.begin() + static_cast<std::ptrdiff_t>(rng() % (wire.size() + 1)), wire[i]); break;
        case 1: if (i + 1 < wire.size()) std::swap(wire[i], wire[i + 1]); break;
        case 2: wire.erase(wire.begin() + static_cast<std::ptrdiff_t>(i)); break;
        case 3: {
          if (wire[i].empty()) break;
          const std::size_t bit = rng() % (wire[i].size() * 8);
          wire[i][bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
          break;
        }
        case 4: if (!wire[i].empty()) wire[i].resize(rng() % wire[i].size()); break;
        case 5: wire.insert(wire.begin() + static_cast<std::ptrdiff_t>(i), foreign.client->seal_record(msgs[0])); break;
      }
    }
    std::size_t intact = 0;
    while (intact < wire.size() && intact < honest.size() && wire[intact] == honest[intact]) ++intact;
    const bool changed = wire != honest;
    // Dropping trailing records leaves an honest prefix; only the missing
    // close record can reveal that.
    const bool prefix = changed && intact == wire.size();
    altered += changed && !prefix;
    prefixes += prefix;
    std::vector<Bytes> seen;
    bool error = false;
    for (auto& rec : wire) {
      try {
        seen.push_back(p.server->open_record(rec));
      } catch (const Error&) {
        error = true;
        break;
      }
    }
    bool good = seen.size() == intact && error == (intact < wire.size());
    for (std::size_t i = 0; good && i < seen.size(); ++i) good = seen[i] == msgs[i];
    bad += !good;
    rejected += changed && !prefix && error;
  }
  ok = ok && bad == 0;
  ok = ok && rejected == altered;
  return std::to_string(rejected) + "/" + std::to_string(altered) + " altered streams rejected (" +
         std::to_string(prefixes) + " more cut to an honest prefix), " + std::to_string(bad) +
         " accepted altered data";
}

// (c) Quotes for unregistered measurements, replayed quotes and quotes on
// nonces the service never issued.
std::string cas_denials(int trials, bool& ok) {
  TempDir t("accept_cas");
  auto platform = cas::Platform::generate();
  cas::SecretsRegistry reg(t.path("registry.tsfs"), crypto::SymmetricKey::random());
  std::vector<std::unique_ptr<enclave::Enclave>> known, strangers;
  for (int i = 0; i < 4; ++i) {
    known.push_back(enclave::Enclave::create(as_bytes("known " + std::to_string(i)), {}));
    strangers.push_back(enclave::Enclave::create(as_bytes("stranger " + std::to_string(i)), {}));
    enclave::SecretBundle b;
    b.fs_key = crypto::SymmetricKey::random();
    b.identity_seed = crypto::random_bytes(32);
    reg.put(known.back()->measurement(), {"k" + std::to_string(i), b});
  }
  cas::CasService svc(platform.verification_key(), std::move(reg));
  std::mt19937_64 rng(7);
  std::vector<cas::AttestationQuote> used;
  int hostile = 0, denied = 0, honest = 0, released = 0;
  for (int trial = 0; trial < trials; ++trial) {
    const auto conn = static_cast<std::uint64_t>(trial);
    cas::AttestationQuote q;
    const int kind = static_cast<int>(rng() % 5);
    if (kind == 0 || used.empty()) {
      q = platform.quote(*known[rng() % 4], svc.issue_nonce(conn));
      ++honest;
      const auto v = svc.verify_and_release(q, conn);
      released += v.released;
      used.push_back(q);
      continue;
    }
    if (kind == 1) q = platform.quote(*strangers[rng() % 4], svc.issue_nonce(conn));
    else if (kind == 2) q = used[rng() % used.size()];
    else if (kind == 3) q = platform.quote(*known[rng() % 4], cas::random_nonce());
    else q = cas::Platform::generate().quote(*known[rng() % 4], svc.issue_nonce(conn));
    ++hostile;
    const auto v = svc.verify_and_release(q, conn);
    denied += !v.released && !v.bundle;
  }
  ok = ok && denied == hostile && released == honest;
  return std::to_string(denied) + "/" + std::to_string(hostile) + " hostile quotes denied, " +
         std::to_string(released) + "/" + std::to_string(honest) + " fresh registered quotes released";
}

void security() {
  bool ok = true;
  const std::string a = tsfs_tamper(1000, ok);
  const std::string b = channel_adversary(1000, ok);
  const std::string c = cas_denials(1000, ok);
  report(6, "security properties", ok, "(a) " + a + "; (b) " + b + "; (c) " + c);
}

void ml(const Bench& b) {
  Stopwatch sw;
  double worst = 0.0;
  std::string worst_op;
  int shapes = 0;
  for (const auto& r : check_op_gradients(17, 50)) {
    shapes += r.shapes;
    if (r.worst >= worst) {
      worst = r.worst;
      worst_op = r.op;
    }
  }
  const double norm = softmax_normalization_error(18, 1000);
  const double separable = separable_training_accuracy(19, 200, 0.1);

  bench::TrainOptions o;
  o.config = b.config(ExecMode::Native);
  o.config.threads = 1;
  o.steps = 500;
  o.batch = 32;
  auto trained = bench::run_train(b.ws, o);
  tensor::SyntheticOptions d;
  const double acc = bench::evaluate(trained.params, tensor::synthetic_records(d));
  const double t = sw.seconds();
  const bool pass = worst < 1e-2 && norm <= 1e-6 && separable > 0.95 && acc > 0.10 && t < 300.0;
  report(7, "ML correctness", pass,
         fmt("worst gradient error %.2e (< 1e-2) over ", worst) + std::to_string(shapes) + " shapes (" + worst_op +
             "), " + fmt("softmax normalization error %.1e (<= 1e-6), separable accuracy %.3f (> 0.95), ", norm, separable) +
             fmt("500-step accuracy on the 2000-sample set %.3f (> 0.10, target 0.30), %.0f s (limit 300 s)", acc, t));
}

void scheduler() {
  Stopwatch sw;
  int lost = 0, over = 0;
  for (std::uint64_t seed = 1; seed <= 10000; ++seed) {
    const unsigned tcs = 1 + seed % 4;
    const unsigned rt = 1 + (seed / 4) % tcs;
    auto out = shieldrun::testing::run_random_schedule(seed, tcs, rt);
    lost += out.finished != out.spawned || out.blocked_left != 0;
    over += out.max_running > tcs;
  }
  report(8, "scheduler liveness", lost == 0 && over == 0,
         "10000 schedules, " + std::to_string(lost) + " with lost wakeups, " + std::to_string(over) +
             " exceeding tcs_count" + fmt(", %.1f s", sw.seconds()));
}

void determinism(const Bench& b, std::uint64_t epc, const bench::ClassifyResult& hw) {
  auto again = b.classify(ExecMode::HardwareSim, true, epc);
  const bool classify = bench::render_csv({hw.report}) == bench::render_csv({again.report});
  auto t1 = b.train(ExecMode::HardwareSim, true, epc), t2 = b.train(ExecMode::HardwareSim, true, epc);
  const bool train = bench::render_csv({t1.report}) + bench::render_series_csv(t1) ==
                     bench::render_csv({t2.report}) + bench::render_series_csv(t2);
  bench::SweepOptions so;
  const bool sweep = bench::render_sweep_csv(bench::epc_sweep(so)) == bench::render_sweep_csv(bench::epc_sweep(so));
  report(9, "determinism", classify && train && sweep,
         std::string("byte-identical CSV on rerun: classify ") + (classify ? "yes" : "NO") + ", train " +
             (train ? "yes" : "NO") + ", epc-sweep " + (sweep ? "yes" : "NO"));
}

}  // namespace

int main() {
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  try {
    Bench b;
    // Desk EPC: the native classify working set over 3.6.
    auto native = b.classify(ExecMode::Native, true, 0);
    const std::uint64_t epc = bench::desk_epc(native.report.heap_high_water);
    auto hw = b.classify(ExecMode::HardwareSim, true, epc);

    transparency(b, epc);
    epc_cliff();
    const double ratio = hw.report.throughput() / native.report.throughput();
    report(3, "throughput ratio", ratio >= 0.2 && ratio <= 0.5,
           fmt("hardware-sim/native %.3f in [0.2, 0.5], working set %.2f MiB over EPC %.2f MiB (x%.2f)", ratio,
               native.report.heap_high_water / 1048576.0, epc / 1048576.0,
               static_cast<double>(native.report.heap_high_water) / epc));
    futex_and_overhead(b, epc, hw);
    security();
    ml(b);
    scheduler();
    determinism(b, epc, hw);
  } catch (const std::exception& e) {
    std::printf("[FAIL] acceptance aborted: %s\n", e.what());
    return 1;
  }
  std::printf("%s: %d criteria failed\n", failed ? "FAIL" : "PASS", failed);
  return failed ? 1 : 0;
}
