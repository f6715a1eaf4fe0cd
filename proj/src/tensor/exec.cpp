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

#include "shieldrun/tensor/exec.hpp"

#include <algorithm>

#include "shieldrun/enclave/enclave.hpp"

namespace shieldrun::tensor {

ExecContext& null_context() {
  static ExecContext ctx;
  return ctx;
}

std::uint64_t EnclaveExecContext::allocate(std::uint64_t bytes) { return enclave_.allocate(bytes); }

void EnclaveExecContext::release(std::uint64_t addr) {
  if (addr != kUntracked) enclave_.release(addr);
}

void EnclaveExecContext::touch(std::uint64_t addr, std::uint64_t bytes, bool write) {
  if (addr == kUntracked || bytes == 0) return;
  enclave_.mem_access(addr, bytes, write ? enclave::AccessKind::Write : enclave::AccessKind::Read);
}

void EnclaveExecContext::compute(std::uint64_t macs) { enclave_.charge_compute(macs); }

Exec::Exec(ExecContext& ctx, unsigned workers)
    : ctx_(ctx), workers_(std::max(1u, workers)), scratch_(workers_), tasks_(workers_) {}

Exec::~Exec() {
  if (!helpers_.empty() && sched::Scheduler::current() == sched_) stop();
  for (auto& b : scratch_) ctx_.release(b.addr);
  for (auto& [key, bufs] : partials_) {
    for (auto& b : bufs) ctx_.release(b.addr);
  }
}

void Exec::grow(Buffer& b, std::size_t floats) {
  if (b.data.size() >= floats) return;
  ctx_.release(b.addr);
  b.data.assign(floats, 0.0f);
  b.addr = ctx_.allocate(floats * sizeof(float));
}

Buffer& Exec::scratch(unsigned worker, std::size_t floats) {
  Buffer& b = scratch_.at(worker);
  grow(b, floats);
  return b;
}

Buffer& Exec::partial(unsigned worker, const std::string& key, std::size_t floats) {
  auto& bufs = partials_[key];
  if (bufs.size() < workers_) bufs.resize(workers_);
  Buffer& b = bufs.at(worker);
  grow(b, floats);
  return b;
}

void Exec::start_helpers() {
  if (workers_ == 1 || !helpers_.empty() || !sched::Scheduler::in_green_thread()) return;
  sched_ = sched::Scheduler::current();
  stopping_ = false;
  for (unsigned w = 1; w < workers_; ++w) {
    helpers_.push_back(sched_->spawn([this, w] { helper_loop(w); }));
  }
}

void Exec::stop() {
  if (helpers_.empty()) return;
  {
    std::lock_guard lk(mu_);
    stopping_ = true;
  }
  work_cv_.notify_all();
  for (auto tid : helpers_) sched_->join(tid);
  helpers_.clear();
}

void Exec::helper_loop(unsigned worker) {
  std::unique_lock lk(mu_);
  for (;;) {
    while (!tasks_[worker].pending && !stopping_) work_cv_.wait(lk);
    if (!tasks_[worker].pending) return;
    Task t = tasks_[worker];
    lk.unlock();
    std::exception_ptr err;
    try {
      (*t.fn)(worker, t.begin, t.end);
    } catch (...) {
      err = std::current_exception();
    }
    lk.lock();
    tasks_[worker].pending = false;
    if (err && !error_) error_ = err;
    if (--outstanding_ == 0) done_cv_.notify_all();
  }
}

void Exec::parallel_for(int n, const std::function<void(unsigned, int, int)>& fn) {
  if (n <= 0) return;
  const unsigned chunks = std::min<unsigned>(workers_, static_cast<unsigned>(n));
  auto bounds = [&](unsigned w) {
    int begin = static_cast<int>(static_cast<std::int64_t>(n) * w / chunks);
    int end = static_cast<int>(static_cast<std::int64_t>(n) * (w + 1) / chunks);
    return std::pair{begin, end};
  };
  const bool pooled = !helpers_.empty() && !busy_ && sched::Scheduler::current() == sched_;
  if (!pooled || chunks == 1) {
    for (unsigned w = 0; w < chunks; ++w) {
      auto [b, e] = bounds(w);
      fn(w, b, e);
    }
    return;
  }
  {
    std::lock_guard lk(mu_);
    busy_ = true;
    error_ = nullptr;
    for (unsigned w = 1; w < chunks; ++w) {
      auto [b, e] = bounds(w);
      tasks_[w] = Task{&fn, b, e, true};
      ++outstanding_;
    }
  }
  work_cv_.notify_all();
  std::exception_ptr mine;
  try {
    auto [b, e] = bounds(0);
    fn(0, b, e);
  } catch (...) {
    mine = std::current_exception();
  }
  std::unique_lock lk(mu_);
  while (outstanding_ > 0) done_cv_.wait(lk);
  busy_ = false;
  auto err = mine ? mine : error_;
  error_ = nullptr;
  lk.unlock();
  if (err) std::rethrow_exception(err);
}

Frame::~Frame() {
  for (auto a : allocs_) exec_.ctx().release(a);
}

Tensor Frame::make(Shape shape, float fill) {
  Tensor t(std::move(shape), fill);
  t.addr = exec_.ctx().allocate(t.bytes());
  if (t.addr != kUntracked) allocs_.push_back(t.addr);
  return t;
}

void Frame::adopt(Tensor& t) {
  t.addr = exec_.ctx().allocate(t.bytes());
  if (t.addr != kUntracked) allocs_.push_back(t.addr);
  touch_all(exec_.ctx(), t, true);
}

void touch_all(ExecContext& ctx, const Tensor& t, bool write) { ctx.touch(t.addr, t.bytes(), write); }

void touch_slice(ExecContext& ctx, const Tensor& t, std::int64_t begin, std::int64_t count, bool write) {
  if (t.addr == kUntracked) return;
  ctx.touch(t.addr + static_cast<std::uint64_t>(begin) * sizeof(float),
            static_cast<std::uint64_t>(count) * sizeof(float), write);
}

void touch_buffer(ExecContext& ctx, const Buffer& b, std::size_t floats, bool write) {
  ctx.touch(b.addr, floats * sizeof(float), write);
}

}  // namespace shieldrun::tensor
