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
#include <exception>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "shieldrun/sched/scheduler.hpp"
#include "shieldrun/tensor/tensor.hpp"

namespace shieldrun::enclave {
class Enclave;
}

namespace shieldrun::tensor {

// Where kernels report memory traffic and arithmetic. The base class
// ignores everything.
class ExecContext {
 public:
  virtual ~ExecContext() = default;
  virtual std::uint64_t allocate(std::uint64_t bytes) { return kUntracked; }
  virtual void release(std::uint64_t addr) {}
  virtual void touch(std::uint64_t addr, std::uint64_t bytes, bool write) {}
  virtual void compute(std::uint64_t macs) {}
};

ExecContext& null_context();

// Tensors live in the enclave heap; touches go through its paging model and
// arithmetic advances its clock.
class EnclaveExecContext : public ExecContext {
 public:
  explicit EnclaveExecContext(enclave::Enclave& e) : enclave_(e) {}
  std::uint64_t allocate(std::uint64_t bytes) override;
  void release(std::uint64_t addr) override;
  void touch(std::uint64_t addr, std::uint64_t bytes, bool write) override;
  void compute(std::uint64_t macs) override;

 private:
  enclave::Enclave& enclave_;
};

// A heap-tracked float buffer that outlives single runs.
struct Buffer {
  std::vector<float> data;
  std::uint64_t addr = kUntracked;
};

// Kernel execution state shared by the runs of one session: the context,
// per-worker scratch and gradient buffers, and the worker pool. Kernels see
// one worker per batch chunk; with a scheduler, workers 1..n-1 are helper
// green threads, otherwise chunks run one after another on the caller.
class Exec {
 public:
  explicit Exec(ExecContext& ctx = null_context(), unsigned workers = 1);
  ~Exec();
  Exec(const Exec&) = delete;
  Exec& operator=(const Exec&) = delete;

  ExecContext& ctx() { return ctx_; }
  unsigned workers() const { return workers_; }

  // Splits [0, n) into up to workers() contiguous chunks. fn(worker, begin,
  // end) runs once per non-empty chunk; chunk w always goes to worker w.
  void parallel_for(int n, const std::function<void(unsigned, int, int)>& fn);

  // Scratch of at least `floats` for `worker`, retained across calls.
  Buffer& scratch(unsigned worker, std::size_t floats);
  // Persistent per-worker buffer of `floats`, keyed by name.
  Buffer& partial(unsigned worker, const std::string& key, std::size_t floats);

  // Helpers park until work arrives; stop() wakes and joins them so their
  // waits are accounted. Must be called from the thread that started them.
  void start_helpers();
  void stop();
  bool helpers_running() const { return !helpers_.empty(); }

 private:
  struct Task {
    const std::function<void(unsigned, int, int)>* fn = nullptr;
    int begin = 0;
    int end = 0;
    bool pending = false;
  };
  void helper_loop(unsigned worker);
  void grow(Buffer& b, std::size_t floats);

  ExecContext& ctx_;
  unsigned workers_;
  std::vector<Buffer> scratch_;
  std::map<std::string, std::vector<Buffer>> partials_;

  std::mutex mu_;
  sched::GreenCondition work_cv_;
  sched::GreenCondition done_cv_;
  std::vector<Task> tasks_;
  std::vector<sched::Tid> helpers_;
  sched::Scheduler* sched_ = nullptr;
  int outstanding_ = 0;
  bool stopping_ = false;
  bool busy_ = false;
  std::exception_ptr error_;
};

// Allocations made during one session run, released together at the end.
class Frame {
 public:
  explicit Frame(Exec& exec) : exec_(exec) {}
  ~Frame();
  Frame(const Frame&) = delete;
  Frame& operator=(const Frame&) = delete;

  Exec& exec() { return exec_; }
  ExecContext& ctx() { return exec_.ctx(); }

  // New heap-tracked tensor.
  Tensor make(Shape shape, float fill = 0.0f);
  // Places an existing tensor in the heap (for feeds and copies); the copy
  // in is charged as a write.
  void adopt(Tensor& t);

 private:
  Exec& exec_;
  std::vector<std::uint64_t> allocs_;
};

// Touch helpers. A slice of `t` is [begin, begin + count) elements.
void touch_all(ExecContext& ctx, const Tensor& t, bool write);
void touch_slice(ExecContext& ctx, const Tensor& t, std::int64_t begin, std::int64_t count, bool write);
void touch_buffer(ExecContext& ctx, const Buffer& b, std::size_t floats, bool write);

}  // namespace shieldrun::tensor
