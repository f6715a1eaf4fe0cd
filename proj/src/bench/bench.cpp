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

#include "shieldrun/bench/bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>

#include "shieldrun/fs/host_io.hpp"
#include "shieldrun/fs/shield.hpp"
#include "shieldrun/runtime/bridge_io.hpp"
#include "shieldrun/runtime/runtime.hpp"
#include "shieldrun/tensor/cifar.hpp"
#include "shieldrun/tensor/image.hpp"
#include "shieldrun/tensor/ops.hpp"
#include "shieldrun/tensor/serialize.hpp"

namespace shieldrun::bench {

namespace {

namespace stdfs = std::filesystem;
using tensor::Tensor;

constexpr std::string_view kCodeImage = "shieldrun bench workload v1";

std::string fixed(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

enclave::EnclaveConfig enclave_config(const BenchConfig& c, std::uint64_t epc) {
  enclave::EnclaveConfig e;
  e.heap_limit = c.heap_limit;
  e.epc_limit = epc;
  e.mode = c.mode;
  e.fs_key = c.fs_key;
  return e;
}

BenchReport make_report(std::string workload, const BenchConfig& c, bool shielded, std::uint64_t epc,
                        std::uint64_t items, const enclave::Enclave& e) {
  BenchReport r;
  r.workload = std::move(workload);
  r.mode = c.mode;
  r.fs_shield = shielded;
  r.threads = c.threads;
  r.heap_limit = c.heap_limit;
  r.epc_limit = epc;
  r.items = items;
  r.ledger = e.ledger();
  r.paging = e.paging_counters();
  r.transitions = e.transitions();
  r.profile = e.profile();
  r.heap_high_water = e.heap_high_water();
  return r;
}

// The EPC a run uses; native runs never page, so any value will do.
std::uint64_t resolve_epc(const BenchConfig& c, const std::function<std::uint64_t()>& desk) {
  if (c.epc_limit != 0) return c.epc_limit;
  if (c.mode == enclave::ExecMode::Native) return c.heap_limit;
  return desk();
}

bool shielded(const BenchConfig& c) { return c.fs_shield && c.mode != enclave::ExecMode::Native; }

TopK top4(const float* probs) {
  std::array<int, tensor::kNumClasses> idx{};
  for (int i = 0; i < tensor::kNumClasses; ++i) idx[i] = i;
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return probs[a] > probs[b]; });
  TopK out;
  for (int i = 0; i < 4; ++i) out[i] = {idx[i], probs[idx[i]]};
  return out;
}

int argmax(const float* row, int n) { return static_cast<int>(std::max_element(row, row + n) - row); }

}  // namespace

double BenchReport::throughput() const {
  return total() == 0 ? 0.0 : static_cast<double>(items) * 1000.0 / static_cast<double>(total());
}

std::string csv_header() {
  return "workload,mode,fs_shield,threads,heap_limit,epc_limit,items,total_units,compute_units,paging_units,"
         "transition_units,crypto_units,syscall_units,idle_units,throughput_per_kunit,page_hits,page_misses,"
         "page_evictions,sync_exits,sync_entries,futex_percent,futex_bridge_calls,heap_high_water";
}

std::string csv_row(const BenchReport& r) {
  const auto& l = r.ledger;
  const auto& futex = r.profile.stats(bridge::SyscallClass::Futex);
  std::string s = r.workload + "," + std::string(enclave::to_string(r.mode)) + "," + (r.fs_shield ? "on" : "off");
  for (std::uint64_t v : {std::uint64_t{r.threads}, r.heap_limit, r.epc_limit, r.items, r.total(), l.compute, l.paging,
                          l.transitions, l.crypto, l.syscall, l.idle}) {
    s += "," + std::to_string(v);
  }
  s += "," + fixed(r.throughput());
  for (std::uint64_t v : {r.paging.hits, r.paging.misses, r.paging.evictions, r.transitions.sync_exits,
                          r.transitions.sync_entries}) {
    s += "," + std::to_string(v);
  }
  s += "," + fixed(r.profile.percent(bridge::SyscallClass::Futex), 2);
  s += "," + std::to_string(futex.bridge_calls) + "," + std::to_string(r.heap_high_water);
  return s;
}

std::string render_csv(const std::vector<BenchReport>& reports) {
  std::string out = csv_header() + "\n";
  for (const auto& r : reports) out += csv_row(r) + "\n";
  return out;
}

std::vector<std::string> check_report(const BenchReport& r) {
  std::vector<std::string> problems;
  if (r.items == 0) problems.push_back("no items processed");
  if (r.total() == 0) problems.push_back("no virtual time elapsed");
  const double expect = r.total() ? static_cast<double>(r.items) * 1000.0 / static_cast<double>(r.total()) : 0.0;
  if (r.throughput() != expect) problems.push_back("throughput is not items over total time");
  if (r.mode == enclave::ExecMode::Native) {
    if (r.ledger.paging != 0) problems.push_back("native run charged paging");
    if (r.ledger.transitions != 0) problems.push_back("native run charged transitions");
    if (r.transitions.sync_exits != 0 || r.transitions.sync_entries != 0) problems.push_back("native run left the enclave");
  }
  if (r.mode != enclave::ExecMode::HardwareSim && r.ledger.paging != 0) problems.push_back("paging charged outside hardware-sim");
  if (r.profile.stats(bridge::SyscallClass::Futex).bridge_calls != 0) problems.push_back("futex calls crossed the bridge");
  if (r.heap_high_water > r.heap_limit) problems.push_back("heap high water above the limit");
  return problems;
}

std::string Workspace::model_path(bool shielded) const {
  return (stdfs::path(dir) / (shielded ? "secure" : "plain") / "model.tscg").string();
}

std::string Workspace::data_path(bool shielded) const {
  return (stdfs::path(dir) / (shielded ? "secure" : "plain") / "data.bin").string();
}

std::vector<fs::PathPolicy> Workspace::policies() const {
  return {{(stdfs::path(dir) / "secure").string(), fs::ShieldMode::EncryptAuth}};
}

void prepare_workspace(const Workspace& ws, const crypto::SymmetricKey& key, ByteSpan frozen_model, ByteSpan records) {
  stdfs::create_directories(stdfs::path(ws.dir) / "secure");
  stdfs::create_directories(stdfs::path(ws.dir) / "plain");
  fs::PosixHostIo io;
  fs::FileShield sh(io, ws.policies(), nullptr, key);
  for (bool s : {true, false}) {
    sh.write_file(ws.model_path(s), frozen_model);
    sh.write_file(ws.data_path(s), records);
  }
}

void prepare_default_workspace(const Workspace& ws, const crypto::SymmetricKey& key, std::uint64_t seed,
                               std::size_t records) {
  tensor::CifarModelOptions m;
  m.batch = 1;
  m.augment = false;
  m.seed = seed;
  tensor::Session s(tensor::build_cifar_model(m));
  s.run_init();
  tensor::SyntheticOptions d;
  d.count = records;
  d.seed = seed;
  prepare_workspace(ws, key, tensor::export_frozen(s.frozen_graph()), tensor::encode_records(tensor::synthetic_records(d)));
}

std::uint64_t desk_epc(std::uint64_t working_set, std::uint64_t page_size) {
  const auto pages = static_cast<std::uint64_t>(std::ceil(static_cast<double>(working_set) / kDeskRatio / page_size));
  return std::max<std::uint64_t>(pages, 1) * page_size;
}

std::uint64_t classify_desk_epc(const Workspace& ws, const BenchConfig& config) {
  ClassifyOptions dry;
  dry.config.mode = enclave::ExecMode::Native;
  dry.config.fs_shield = config.fs_shield;
  dry.config.heap_limit = config.heap_limit;
  dry.config.costs = config.costs;
  dry.config.fs_key = config.fs_key;
  return desk_epc(run_classify(ws, dry).report.heap_high_water, config.costs.page_size);
}

ClassifyResult run_classify(const Workspace& ws, const ClassifyOptions& o) {
  if (o.images == 0 || o.batch <= 0) raise(Errc::InvalidArgument, "classify needs images > 0 and batch > 0");
  const BenchConfig& c = o.config;
  const std::uint64_t epc = resolve_epc(c, [&] {
    ClassifyOptions dry = o;
    dry.config.mode = enclave::ExecMode::Native;
    return desk_epc(run_classify(ws, dry).report.heap_high_water, c.costs.page_size);
  });
  const bool sh = shielded(c);
  runtime::Runtime rt(as_bytes(kCodeImage), enclave_config(c, epc), c.costs);
  ClassifyResult res;
  rt.run_main([&] {
    runtime::BridgeHostIo io(rt.bridge(), rt.enclave());
    fs::FileShield shield(io, sh ? ws.policies() : std::vector<fs::PathPolicy>{}, &rt.enclave());
    tensor::EnclaveExecContext ctx(rt.enclave());
    tensor::Session s(tensor::import_frozen(shield.read_file(ws.model_path(sh))), {c.threads, &ctx});
    s.bind_reader(tensor::cifar::kReader,
                  std::make_shared<tensor::FileRecordSource>(shield.open(ws.data_path(sh)), true));
    s.start_queue_runner(tensor::cifar::kEnqueue);
    const std::string dequeue = std::string(tensor::cifar::kDequeue) + ":0";
    for (std::size_t done = 0; done < o.images;) {
      const auto n = std::min<std::size_t>(static_cast<std::size_t>(o.batch), o.images - done);
      std::vector<Tensor> images;
      for (std::size_t i = 0; i < n; ++i) images.push_back(s.run({dequeue})[0]);
      Tensor input = images[0];
      if (n > 1) {
        tensor::Exec ex;
        tensor::Frame f(ex);
        std::vector<const Tensor*> ptrs;
        for (auto& im : images) ptrs.push_back(&im);
        // Drop the leading 1 of each dequeued (1,24,24,3) batch.
        input = tensor::ops::stack(f, ptrs);
        input.shape.erase(input.shape.begin() + 1);
        input.addr = tensor::kUntracked;
      }
      auto out = s.run({tensor::cifar::kLogits, tensor::cifar::kProbs}, {{tensor::cifar::kInput, input}});
      for (std::size_t i = 0; i < n; ++i) res.top.push_back(top4(out[1].ptr() + i * tensor::kNumClasses));
      res.logits.push_back(std::move(out[0]));
      done += n;
    }
    s.shutdown();
  });
  res.report = make_report("classify", c, sh, epc, o.images, rt.enclave());
  return res;
}

TrainResult run_train(const Workspace& ws, const TrainOptions& o) {
  if (o.steps <= 0 || o.batch <= 0) raise(Errc::InvalidArgument, "train needs steps > 0 and batch > 0");
  const BenchConfig& c = o.config;
  const std::uint64_t epc = resolve_epc(c, [&] { return classify_desk_epc(ws, c); });
  const bool sh = shielded(c);
  tensor::CifarModelOptions m;
  m.batch = o.batch;
  m.learning_rate = o.learning_rate;
  m.augment = o.augment;
  m.seed = o.seed;
  runtime::Runtime rt(as_bytes(kCodeImage), enclave_config(c, epc), c.costs);
  TrainResult res;
  std::vector<double> accuracy;
  rt.run_main([&] {
    auto& e = rt.enclave();
    runtime::BridgeHostIo io(rt.bridge(), e);
    fs::FileShield shield(io, sh ? ws.policies() : std::vector<fs::PathPolicy>{}, &e);
    tensor::EnclaveExecContext ctx(e);
    tensor::Session s(tensor::build_cifar_model(m), {c.threads, &ctx});
    s.run_init();
    s.bind_reader(tensor::cifar::kReader,
                  std::make_shared<tensor::FileRecordSource>(shield.open(ws.data_path(sh)), true));
    s.start_queue_runner(tensor::cifar::kEnqueue);
    const std::string dq = tensor::cifar::kDequeue;
    for (int step = 0; step < o.steps; ++step) {
      const std::uint64_t t0 = e.now();
      auto batch = s.run({dq + ":0", dq + ":1"});
      auto out = s.run({tensor::cifar::kTrainOp, tensor::cifar::kLogits},
                       {{tensor::cifar::kInput, batch[0]}, {tensor::cifar::kLabels, batch[1]}});
      res.step_latency.push_back(e.now() - t0);
      res.losses.push_back(out[0].data[0]);
      int correct = 0;
      for (std::int64_t i = 0; i < o.batch; ++i) {
        correct += argmax(out[1].ptr() + i * tensor::kNumClasses, tensor::kNumClasses) ==
                   static_cast<int>(batch[1].data[i]);
      }
      accuracy.push_back(static_cast<double>(correct) / static_cast<double>(o.batch));
    }
    res.params = s.checkpoint();
    s.shutdown();
  });
  res.report = make_report("train", c, sh, epc, static_cast<std::uint64_t>(o.steps) * o.batch, rt.enclave());
  res.final_loss = res.losses.back();
  const std::size_t tail = std::min<std::size_t>(10, accuracy.size());
  double sum = 0.0;
  for (std::size_t i = accuracy.size() - tail; i < accuracy.size(); ++i) sum += accuracy[i];
  res.batch_accuracy = sum / static_cast<double>(tail);
  return res;
}

std::string render_series_csv(const TrainResult& r) {
  std::string out = "step,latency_units,loss\n";
  for (std::size_t i = 0; i < r.step_latency.size(); ++i) {
    out += std::to_string(i + 1) + "," + std::to_string(r.step_latency[i]) + "," + fixed(r.losses[i]) + "\n";
  }
  return out;
}

double evaluate(const tensor::Checkpoint& params, const std::vector<tensor::Record>& records) {
  if (records.empty()) return 0.0;
  tensor::CifarModelOptions m;
  m.augment = false;
  tensor::Session s(tensor::build_cifar_model(m));
  s.restore(params);
  constexpr std::size_t kChunk = 100;
  std::size_t correct = 0;
  for (std::size_t begin = 0; begin < records.size(); begin += kChunk) {
    const std::size_t n = std::min(kChunk, records.size() - begin);
    Tensor input({static_cast<std::int64_t>(n), 24, 24, 3});
    const std::size_t per = 24 * 24 * 3;
    for (std::size_t i = 0; i < n; ++i) {
      Tensor img = tensor::crop_image(tensor::record_image(records[begin + i]), 4, 4, 24, 24);
      std::copy(img.data.begin(), img.data.end(), input.data.begin() + i * per);
    }
    Tensor logits = s.run({tensor::cifar::kLogits}, {{tensor::cifar::kInput, input}})[0];
    for (std::size_t i = 0; i < n; ++i) {
      correct += argmax(logits.ptr() + i * tensor::kNumClasses, tensor::kNumClasses) == records[begin + i].label;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(records.size());
}

SweepPoint sweep_point(const SweepOptions& o, std::uint64_t working_set) {
  if (working_set == 0 || o.passes <= 0) raise(Errc::InvalidArgument, "sweep needs a working set and passes");
  enclave::EnclaveConfig cfg;
  cfg.mode = enclave::ExecMode::HardwareSim;
  cfg.epc_limit = o.epc_limit;
  cfg.heap_limit = std::max(cfg.heap_limit, working_set + o.costs.page_size);
  auto e = enclave::Enclave::create(as_bytes(kCodeImage), cfg, o.costs);
  const std::uint64_t page = o.costs.page_size;
  const std::uint64_t pages = (working_set + page - 1) / page;
  const std::uint64_t base = e->allocate(pages * page);
  auto scan = [&] {
    for (std::uint64_t p = 0; p < pages; ++p) e->mem_access(base + p * page, 1, enclave::AccessKind::Read);
  };
  scan();
  const auto before = e->paging_counters();
  const std::uint64_t cost_before = e->ledger().paging;
  for (int i = 0; i < o.passes; ++i) scan();
  const auto after = e->paging_counters();
  SweepPoint pt;
  pt.working_set = working_set;
  pt.accesses = after.accesses() - before.accesses();
  pt.misses = after.misses - before.misses;
  pt.mean_cost = static_cast<double>(e->ledger().paging - cost_before) / static_cast<double>(pt.accesses);
  return pt;
}

std::vector<SweepPoint> epc_sweep(const SweepOptions& o) {
  if (o.from == 0 || o.to < o.from || o.points < 1) raise(Errc::InvalidArgument, "bad sweep range");
  std::vector<SweepPoint> out;
  for (int i = 0; i < o.points; ++i) {
    const double t = o.points == 1 ? 0.0 : static_cast<double>(i) / (o.points - 1);
    const double ws = static_cast<double>(o.from) * std::pow(static_cast<double>(o.to) / o.from, t);
    out.push_back(sweep_point(o, static_cast<std::uint64_t>(std::llround(ws))));
  }
  return out;
}

std::string render_sweep_csv(const std::vector<SweepPoint>& points) {
  std::string out = "working_set_bytes,accesses,misses,mean_cost_units\n";
  for (const auto& p : points) {
    out += std::to_string(p.working_set) + "," + std::to_string(p.accesses) + "," + std::to_string(p.misses) + "," +
           fixed(p.mean_cost, 3) + "\n";
  }
  return out;
}

}  // namespace shieldrun::bench
