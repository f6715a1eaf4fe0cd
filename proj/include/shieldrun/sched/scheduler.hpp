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

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <exception>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace shieldrun::sched {

using Tid = std::uint64_t;
using LockId = std::uint64_t;
using TicketId = std::uint64_t;

enum class ThreadState { Runnable, Running, Blocked, Finished };

enum class IdleDecision { SpinInside, ExitOutside };

// With nothing runnable, wait inside the enclave when the expected wait is
// shorter than an exit+entry round trip; otherwise leave. A wait of exactly
// 2 * cost_per_transition exits.
IdleDecision idle_policy(std::uint64_t expected_wait, std::uint64_t cost_per_transition);

// Accounting and virtual time supplied by the host runtime. The defaults
// keep a private clock that only idle periods advance.
class SchedulerHooks {
 public:
  virtual ~SchedulerHooks() = default;
  virtual std::uint64_t now() { return clock_; }
  // Called with nothing runnable: virtual time must advance by `wait`.
  virtual void idle(std::uint64_t wait, IdleDecision decision) { clock_ += wait; }
  virtual void lock_waited(LockId lock, std::uint64_t duration) {}
  virtual std::uint64_t cost_per_transition() { return 5000; }
  virtual void runtime_thread_started(unsigned index) {}
  virtual void runtime_thread_stopped(unsigned index) {}

 private:
  std::uint64_t clock_ = 0;
};

struct SchedulerOptions {
  // Runtime (OS) threads multiplexing the green threads. 1 is fully
  // deterministic. Must not exceed tcs_count.
  unsigned runtime_threads = 1;
  unsigned tcs_count = 4;
  std::size_t stack_size = 256 * 1024;
};

struct RunResult {
  std::size_t finished = 0;
  // Threads still parked on a lock when no further progress was possible.
  std::vector<Tid> blocked;
};

class Scheduler {
 public:
  explicit Scheduler(SchedulerOptions options = {}, SchedulerHooks* hooks = nullptr);
  ~Scheduler();

  Scheduler(const Scheduler&) = delete;
  Scheduler& operator=(const Scheduler&) = delete;

  // Callable before run() and from inside green threads.
  Tid spawn(std::function<void()> entry);

  // Runs until every thread finished or no progress is possible. Rethrows
  // the first exception that escaped a green thread.
  RunResult run();

  // --- inside a green thread ---------------------------------------------
  static Scheduler* current();
  static Tid current_tid();
  static bool in_green_thread();

  void yield_now();
  // Parks until wake(lock). A pending wake token is consumed instead of
  // parking. Callers re-check their condition after returning.
  void block_on(LockId lock);
  // Parks until `ticket` is both delivered (ticket_ready) and virtual time
  // has reached `ready_at`.
  void block_on_ticket(TicketId ticket, std::uint64_t ready_at);
  void sleep_until(std::uint64_t deadline);
  void join(Tid tid);

  // --- any thread ----------------------------------------------------------
  // Moves the FIFO head of `lock` to runnable. With no waiter a sticky
  // one-shot token is left behind.
  void wake(LockId lock);
  void wake_all(LockId lock);
  // Marks a ticket as physically delivered.
  void ticket_ready(TicketId ticket);
  // Pollers run on a runtime thread at every scheduling decision (used by
  // the syscall bridge to drain its response queue inside the enclave).
  void add_poller(std::function<void()> poller);
  void notify();
  // While held, an idle scheduler waits for external wakes instead of
  // reporting quiescence.
  void hold();
  void release();

  LockId new_lock_id();

  ThreadState state(Tid tid) const;
  std::size_t max_running() const;
  std::size_t live_threads() const;
  std::uint64_t context_switches() const;
  const SchedulerOptions& options() const { return options_; }
  SchedulerHooks& hooks() { return *hooks_; }

 private:
  struct GreenThread;
  enum class Action { None, Yield, Block, Ticket, Finish };

  struct TimedKey {
    std::uint64_t ready_at;
    std::uint64_t seq;
    bool operator<(const TimedKey& o) const {
      return ready_at != o.ready_at ? ready_at < o.ready_at : seq < o.seq;
    }
  };
  struct TimedWait {
    Tid tid;
    TicketId ticket;
    bool physical;  // false until delivered
  };

  static void trampoline(unsigned hi, unsigned lo);
  void switch_out(GreenThread* self);
  void worker_loop(unsigned index);
  GreenThread* pick_next(std::unique_lock<std::mutex>& lk);
  void apply_action(GreenThread* t);
  void make_runnable_locked(GreenThread* t);
  bool wake_one_locked(LockId lock);
  void run_pollers(std::unique_lock<std::mutex>& lk);
  GreenThread* self_or_throw(const char* what);

  SchedulerOptions options_;
  SchedulerHooks default_hooks_;
  SchedulerHooks* hooks_;

  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::unordered_map<Tid, std::unique_ptr<GreenThread>> threads_;
  std::deque<GreenThread*> run_queue_;
  std::unordered_map<LockId, std::deque<Tid>> wait_queues_;
  std::unordered_set<LockId> wake_tokens_;
  std::map<TimedKey, TimedWait> timed_;
  std::unordered_map<TicketId, TimedKey> ticket_index_;
  std::unordered_set<TicketId> early_ready_;
  std::vector<std::function<void()>> pollers_;
  Tid next_tid_ = 1;
  LockId next_lock_ = 1;
  std::uint64_t timed_seq_ = 0;
  std::size_t live_ = 0;
  std::size_t running_ = 0;
  std::size_t max_running_ = 0;
  std::uint64_t switches_ = 0;
  int holds_ = 0;
  bool running_loop_ = false;
  bool stop_ = false;
  bool poll_needed_ = false;
  std::exception_ptr first_error_;
};

// Condition variable usable from green threads and OS threads alike. Green
// waiters park in their scheduler (the wait is reported as a lock wait),
// others block on a std::condition_variable. Wakeups may be spurious.
class GreenCondition {
 public:
  void wait(std::unique_lock<std::mutex>& lk);
  void notify_all();

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  Scheduler* sched_ = nullptr;
  LockId lock_ = 0;
};

}  // namespace shieldrun::sched
