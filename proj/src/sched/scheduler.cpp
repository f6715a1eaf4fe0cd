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

#include "shieldrun/sched/scheduler.hpp"

#include <ucontext.h>

#include <algorithm>
#include <thread>

#include "shieldrun/common/error.hpp"

namespace shieldrun::sched {

namespace {

constexpr LockId kJoinBit = LockId{1} << 63;

LockId join_lock(Tid tid) { return kJoinBit | tid; }

}  // namespace

struct Scheduler::GreenThread {
  Scheduler* owner = nullptr;
  Tid tid = 0;
  ThreadState state = ThreadState::Runnable;
  std::function<void()> entry;
  ucontext_t ctx{};
  std::unique_ptr<char[]> stack;
  ucontext_t* worker_ctx = nullptr;

  // Set by the green thread before switching out, applied by the worker.
  Action action = Action::None;
  LockId lock = 0;
  TicketId ticket = 0;
  std::uint64_t ready_at = 0;

  std::uint64_t blocked_since = 0;
  std::exception_ptr error;
};

namespace {

// Fibers may resume on a different OS thread, so the thread-local slot is
// only ever touched through these out-of-line accessors; the compiler must
// not cache its address across a context switch.
thread_local void* tls_current = nullptr;

[[gnu::noinline]] void* get_current() {
  asm volatile("" ::: "memory");
  return tls_current;
}

[[gnu::noinline]] void set_current(void* t) {
  asm volatile("" ::: "memory");
  tls_current = t;
}

}  // namespace

IdleDecision idle_policy(std::uint64_t expected_wait, std::uint64_t cost_per_transition) {
  return expected_wait < 2 * cost_per_transition ? IdleDecision::SpinInside
                                                 : IdleDecision::ExitOutside;
}

Scheduler::Scheduler(SchedulerOptions options, SchedulerHooks* hooks)
    : options_(options), hooks_(hooks ? hooks : &default_hooks_) {
  if (options_.runtime_threads == 0 || options_.tcs_count == 0) {
    raise(Errc::ConfigInvalid, "scheduler needs at least one runtime thread and one TCS");
  }
  if (options_.runtime_threads > options_.tcs_count) {
    raise(Errc::ConfigInvalid, "runtime threads (" + std::to_string(options_.runtime_threads) +
                                   ") exceed thread control structures (" +
                                   std::to_string(options_.tcs_count) + ")");
  }
  if (options_.stack_size < 32 * 1024) options_.stack_size = 32 * 1024;
}

Scheduler::~Scheduler() = default;

Tid Scheduler::spawn(std::function<void()> entry) {
  auto t = std::make_unique<GreenThread>();
  t->owner = this;
  t->entry = std::move(entry);
  t->stack.reset(new char[options_.stack_size]);
  if (getcontext(&t->ctx) != 0) raise(Errc::IoError, "getcontext failed");
  t->ctx.uc_stack.ss_sp = t->stack.get();
  t->ctx.uc_stack.ss_size = options_.stack_size;
  t->ctx.uc_link = nullptr;
  auto raw = reinterpret_cast<std::uintptr_t>(t.get());
  makecontext(&t->ctx, reinterpret_cast<void (*)()>(&Scheduler::trampoline), 2,
              static_cast<unsigned>(raw >> 32), static_cast<unsigned>(raw & 0xffffffffu));

  std::lock_guard lk(mu_);
  Tid tid = next_tid_++;
  t->tid = tid;
  GreenThread* p = t.get();
  threads_.emplace(tid, std::move(t));
  ++live_;
  make_runnable_locked(p);
  cv_.notify_all();
  return tid;
}

void Scheduler::trampoline(unsigned hi, unsigned lo) {
  auto* t = reinterpret_cast<GreenThread*>((static_cast<std::uintptr_t>(hi) << 32) | lo);
  try {
    t->entry();
  } catch (...) {
    t->error = std::current_exception();
  }
  t->entry = nullptr;
  t->action = Action::Finish;
  t->owner->switch_out(t);
  std::abort();  // a finished thread is never resumed
}

void Scheduler::switch_out(GreenThread* self) {
  swapcontext(&self->ctx, self->worker_ctx);
}

Scheduler* Scheduler::current() {
  auto* t = static_cast<GreenThread*>(get_current());
  return t ? t->owner : nullptr;
}

Tid Scheduler::current_tid() {
  auto* t = static_cast<GreenThread*>(get_current());
  return t ? t->tid : 0;
}

bool Scheduler::in_green_thread() { return get_current() != nullptr; }

Scheduler::GreenThread* Scheduler::self_or_throw(const char* what) {
  auto* t = static_cast<GreenThread*>(get_current());
  if (!t || t->owner != this) {
    raise(Errc::SchedulerMisuse, std::string(what) + " called outside a green thread");
  }
  return t;
}

void Scheduler::yield_now() {
  GreenThread* t = self_or_throw("yield_now");
  t->action = Action::Yield;
  switch_out(t);
}

void Scheduler::block_on(LockId lock) {
  GreenThread* t = self_or_throw("block_on");
  {
    std::lock_guard lk(mu_);
    if (wake_tokens_.erase(lock) > 0) return;
  }
  t->action = Action::Block;
  t->lock = lock;
  switch_out(t);
}

void Scheduler::block_on_ticket(TicketId ticket, std::uint64_t ready_at) {
  GreenThread* t = self_or_throw("block_on_ticket");
  t->action = Action::Ticket;
  t->ticket = ticket;
  t->ready_at = ready_at;
  switch_out(t);
}

void Scheduler::sleep_until(std::uint64_t deadline) {
  GreenThread* t = self_or_throw("sleep_until");
  t->action = Action::Ticket;
  t->ticket = 0;
  t->ready_at = deadline;
  switch_out(t);
}

void Scheduler::join(Tid tid) {
  GreenThread* self = self_or_throw("join");
  for (;;) {
    {
      std::lock_guard lk(mu_);
      auto it = threads_.find(tid);
      if (it == threads_.end()) raise(Errc::InvalidArgument, "join of unknown thread");
      if (it->second->state == ThreadState::Finished) return;
    }
    self->action = Action::Block;
    self->lock = join_lock(tid);
    switch_out(self);
  }
}

void Scheduler::make_runnable_locked(GreenThread* t) {
  t->state = ThreadState::Runnable;
  run_queue_.push_back(t);
}

bool Scheduler::wake_one_locked(LockId lock) {
  auto it = wait_queues_.find(lock);
  if (it == wait_queues_.end() || it->second.empty()) return false;
  Tid tid = it->second.front();
  it->second.pop_front();
  if (it->second.empty()) wait_queues_.erase(it);
  GreenThread* t = threads_.at(tid).get();
  std::uint64_t now = hooks_->now();
  hooks_->lock_waited(lock, now - std::min(now, t->blocked_since));
  make_runnable_locked(t);
  return true;
}

void Scheduler::wake(LockId lock) {
  std::lock_guard lk(mu_);
  if (!wake_one_locked(lock)) wake_tokens_.insert(lock);
  cv_.notify_all();
}

void Scheduler::wake_all(LockId lock) {
  std::lock_guard lk(mu_);
  bool any = false;
  while (wake_one_locked(lock)) any = true;
  if (!any) wake_tokens_.insert(lock);
  cv_.notify_all();
}

void Scheduler::ticket_ready(TicketId ticket) {
  std::lock_guard lk(mu_);
  auto it = ticket_index_.find(ticket);
  if (it != ticket_index_.end()) {
    timed_.at(it->second).physical = true;
  } else {
    early_ready_.insert(ticket);
  }
  cv_.notify_all();
}

void Scheduler::add_poller(std::function<void()> poller) {
  std::lock_guard lk(mu_);
  pollers_.push_back(std::move(poller));
}

void Scheduler::notify() {
  std::lock_guard lk(mu_);
  poll_needed_ = true;
  cv_.notify_all();
}

void Scheduler::hold() {
  std::lock_guard lk(mu_);
  ++holds_;
}

void Scheduler::release() {
  std::lock_guard lk(mu_);
  if (holds_ > 0) --holds_;
  cv_.notify_all();
}

LockId Scheduler::new_lock_id() {
  std::lock_guard lk(mu_);
  return next_lock_++;
}

ThreadState Scheduler::state(Tid tid) const {
  std::lock_guard lk(mu_);
  auto it = threads_.find(tid);
  if (it == threads_.end()) raise(Errc::InvalidArgument, "unknown thread " + std::to_string(tid));
  return it->second->state;
}

std::size_t Scheduler::max_running() const {
  std::lock_guard lk(mu_);
  return max_running_;
}

std::size_t Scheduler::live_threads() const {
  std::lock_guard lk(mu_);
  return live_;
}

std::uint64_t Scheduler::context_switches() const {
  std::lock_guard lk(mu_);
  return switches_;
}

void Scheduler::apply_action(GreenThread* t) {
  Action a = t->action;
  t->action = Action::None;
  switch (a) {
    case Action::None:
    case Action::Yield:
      make_runnable_locked(t);
      break;
    case Action::Block: {
      bool ready = wake_tokens_.erase(t->lock) > 0;
      if (!ready && (t->lock & kJoinBit)) {
        auto it = threads_.find(t->lock & ~kJoinBit);
        ready = it != threads_.end() && it->second->state == ThreadState::Finished;
      }
      if (ready) {
        make_runnable_locked(t);
      } else {
        t->state = ThreadState::Blocked;
        t->blocked_since = hooks_->now();
        wait_queues_[t->lock].push_back(t->tid);
      }
      break;
    }
    case Action::Ticket: {
      t->state = ThreadState::Blocked;
      TimedKey key{t->ready_at, timed_seq_++};
      bool physical = t->ticket == 0 || early_ready_.erase(t->ticket) > 0;
      timed_.emplace(key, TimedWait{t->tid, t->ticket, physical});
      if (t->ticket != 0) ticket_index_[t->ticket] = key;
      break;
    }
    case Action::Finish: {
      t->state = ThreadState::Finished;
      t->stack.reset();
      --live_;
      if (t->error && !first_error_) first_error_ = t->error;
      while (wake_one_locked(join_lock(t->tid))) {
      }
      break;
    }
  }
}

void Scheduler::run_pollers(std::unique_lock<std::mutex>& lk) {
  poll_needed_ = false;
  auto pollers = pollers_;
  lk.unlock();
  for (auto& p : pollers) p();
  lk.lock();
}

Scheduler::GreenThread* Scheduler::pick_next(std::unique_lock<std::mutex>& lk) {
  for (;;) {
    if (stop_) return nullptr;
    if (!pollers_.empty()) run_pollers(lk);
    if (stop_) return nullptr;

    // Release due timed waits strictly in (ready_at, arrival) order; a due
    // ticket whose response has not physically arrived holds back everything
    // behind it so that the schedule only depends on virtual time.
    bool held_back = false;
    std::uint64_t now = hooks_->now();
    while (!timed_.empty()) {
      auto it = timed_.begin();
      if (it->first.ready_at > now) break;
      if (!it->second.physical) {
        held_back = true;
        break;
      }
      GreenThread* t = threads_.at(it->second.tid).get();
      if (it->second.ticket != 0) ticket_index_.erase(it->second.ticket);
      timed_.erase(it);
      make_runnable_locked(t);
    }

    auto wait = [&] {
      if (!poll_needed_) cv_.wait(lk);
    };

    if (held_back) {
      wait();
      continue;
    }
    if (!run_queue_.empty()) {
      GreenThread* t = run_queue_.front();
      run_queue_.pop_front();
      return t;
    }
    if (live_ == 0) return nullptr;
    if (running_ > 0) {
      wait();
      continue;
    }
    if (!timed_.empty()) {
      std::uint64_t target = timed_.begin()->first.ready_at;
      std::uint64_t gap = target - now;
      hooks_->idle(gap, idle_policy(gap, hooks_->cost_per_transition()));
      if (hooks_->now() < target) {
        raise(Errc::SchedulerMisuse, "scheduler hooks did not advance virtual time while idle");
      }
      continue;
    }
    if (holds_ > 0) {
      wait();
      continue;
    }
    return nullptr;
  }
}

void Scheduler::worker_loop(unsigned index) {
  hooks_->runtime_thread_started(index);
  ucontext_t worker_ctx;
  std::unique_lock lk(mu_);
  for (;;) {
    GreenThread* t = pick_next(lk);
    if (!t) break;
    t->state = ThreadState::Running;
    ++running_;
    max_running_ = std::max(max_running_, running_);
    ++switches_;
    t->worker_ctx = &worker_ctx;
    lk.unlock();
    set_current(t);
    swapcontext(&worker_ctx, &t->ctx);
    set_current(nullptr);
    lk.lock();
    --running_;
    apply_action(t);
    cv_.notify_all();
  }
  stop_ = true;
  cv_.notify_all();
  lk.unlock();
  hooks_->runtime_thread_stopped(index);
}

RunResult Scheduler::run() {
  if (in_green_thread()) raise(Errc::SchedulerMisuse, "run() called from a green thread");
  {
    std::lock_guard lk(mu_);
    if (running_loop_) raise(Errc::SchedulerMisuse, "scheduler is already running");
    running_loop_ = true;
    stop_ = false;
    first_error_ = nullptr;
  }
  std::vector<std::thread> extra;
  std::exception_ptr hook_error;
  try {
    for (unsigned i = 1; i < options_.runtime_threads; ++i) {
      extra.emplace_back([this, i] { worker_loop(i); });
    }
    worker_loop(0);
  } catch (...) {
    hook_error = std::current_exception();
    std::lock_guard lk(mu_);
    stop_ = true;
    cv_.notify_all();
  }
  for (auto& th : extra) th.join();

  RunResult result;
  std::exception_ptr err;
  {
    std::lock_guard lk(mu_);
    running_loop_ = false;
    for (const auto& [tid, t] : threads_) {
      if (t->state == ThreadState::Finished) ++result.finished;
      if (t->state == ThreadState::Blocked) result.blocked.push_back(tid);
    }
    std::sort(result.blocked.begin(), result.blocked.end());
    err = first_error_;
  }
  if (hook_error) std::rethrow_exception(hook_error);
  if (err) std::rethrow_exception(err);
  return result;
}

void GreenCondition::wait(std::unique_lock<std::mutex>& lk) {
  if (!Scheduler::in_green_thread()) {
    cv_.wait(lk);
    return;
  }
  Scheduler* s = Scheduler::current();
  LockId lock;
  {
    std::lock_guard g(mu_);
    if (sched_ != s) {
      sched_ = s;
      lock_ = s->new_lock_id();
    }
    lock = lock_;
  }
  lk.unlock();
  s->block_on(lock);
  lk.lock();
}

void GreenCondition::notify_all() {
  Scheduler* s;
  LockId lock;
  {
    std::lock_guard g(mu_);
    s = sched_;
    lock = lock_;
  }
  cv_.notify_all();
  if (s) s->wake_all(lock);
}

}  // namespace shieldrun::sched
