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
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "shieldrun/bridge/profile.hpp"
#include "shieldrun/common/crypto.hpp"
#include "shieldrun/enclave/enclave.hpp"
#include "shieldrun/fs/policy.hpp"
#include "shieldrun/tensor/records.hpp"
#include "shieldrun/tensor/session.hpp"

namespace shieldrun::bench {

// One bench run. Time is virtual cost units.
struct BenchReport {
  std::string workload;
  enclave::ExecMode mode = enclave::ExecMode::HardwareSim;
  bool fs_shield = false;  // whether file I/O actually went through the shield
  unsigned threads = 1;
  std::uint64_t heap_limit = 0;
  std::uint64_t epc_limit = 0;
  std::uint64_t items = 0;
  enclave::CostLedger ledger;
  enclave::PagingCounters paging;
  enclave::TransitionCounter transitions;
  bridge::SyscallProfile profile;
  std::uint64_t heap_high_water = 0;

  std::uint64_t total() const { return ledger.total(); }
  // Items per thousand units.
  double throughput() const;
};

std::string csv_header();
std::string csv_row(const BenchReport& r);
std::string render_csv(const std::vector<BenchReport>& reports);

// Problems with a report's internal consistency; empty when fine.
std::vector<std::string> check_report(const BenchReport& r);

// Model and dataset files. Shielded copies live under dir/secure, plain
// ones under dir/plain.
struct Workspace {
  std::string dir;

  std::string model_path(bool shielded) const;
  std::string data_path(bool shielded) const;
  std::vector<fs::PathPolicy> policies() const;
};

// Writes the frozen model and the record file in both forms.
void prepare_workspace(const Workspace& ws, const crypto::SymmetricKey& key, ByteSpan frozen_model,
                       ByteSpan records);
// Frozen classify model with initialized weights (center crop, no
// augmentation) and the synthetic record set.
void prepare_default_workspace(const Workspace& ws, const crypto::SymmetricKey& key, std::uint64_t seed = 1,
                               std::size_t records = 2000);

struct BenchConfig {
  enclave::ExecMode mode = enclave::ExecMode::HardwareSim;
  bool fs_shield = true;
  unsigned threads = 4;
  std::uint64_t heap_limit = 256 * enclave::MiB;
  // Zero picks the desk EPC: the native working set divided by kDeskRatio.
  std::uint64_t epc_limit = 0;
  enclave::CostModel costs;
  crypto::SymmetricKey fs_key;
};

// Working set over EPC of the reference classification setup (330 MB over a
// 90 MB EPC).
inline constexpr double kDeskRatio = 3.6;
std::uint64_t desk_epc(std::uint64_t working_set, std::uint64_t page_size = 4096);

using TopK = std::array<std::pair<int, float>, 4>;

struct ClassifyOptions {
  BenchConfig config;
  std::size_t images = 100;
  std::int64_t batch = 1;
};

struct ClassifyResult {
  BenchReport report;
  std::vector<tensor::Tensor> logits;  // one (batch, 10) tensor per step
  std::vector<TopK> top;               // per image
};

// Resolves a zero epc_limit from a native dry run.
ClassifyResult run_classify(const Workspace& ws, const ClassifyOptions& options);
// Desk EPC of the default classify workload (ClassifyOptions defaults with
// the given files, key and costs).
std::uint64_t classify_desk_epc(const Workspace& ws, const BenchConfig& config);

struct TrainOptions {
  BenchConfig config;
  int steps = 100;
  std::int64_t batch = 128;
  double learning_rate = 0.05;
  bool augment = true;
  std::uint64_t seed = 1;
};

struct TrainResult {
  BenchReport report;
  std::vector<std::uint64_t> step_latency;
  std::vector<float> losses;
  float final_loss = 0.0f;
  // Prediction accuracy on the last (up to ten) training batches.
  double batch_accuracy = 0.0;
  tensor::Checkpoint params;
};

// A zero epc_limit means classify_desk_epc, so that training runs against
// the EPC the classify calibration used.
TrainResult run_train(const Workspace& ws, const TrainOptions& options);
std::string render_series_csv(const TrainResult& r);

// Accuracy of trained parameters on center-cropped records, outside any
// enclave.
double evaluate(const tensor::Checkpoint& params, const std::vector<tensor::Record>& records);

struct SweepOptions {
  std::uint64_t epc_limit = 8 * enclave::MiB;
  std::uint64_t from = 2 * enclave::MiB;
  std::uint64_t to = 32 * enclave::MiB;
  int points = 9;  // geometric steps, both ends included
  int passes = 4;  // measured passes after one warm-up pass
  enclave::CostModel costs;
};

struct SweepPoint {
  std::uint64_t working_set = 0;
  std::uint64_t accesses = 0;
  std::uint64_t misses = 0;
  double mean_cost = 0.0;  // paging units per page access
};

// Cyclic page-by-page scans of a working set in a hardware-sim enclave.
std::vector<SweepPoint> epc_sweep(const SweepOptions& options);
SweepPoint sweep_point(const SweepOptions& options, std::uint64_t working_set);
std::string render_sweep_csv(const std::vector<SweepPoint>& points);

}  // namespace shieldrun::bench
