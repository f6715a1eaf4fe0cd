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

#include <atomic>
#include <memory>
#include <random>
#include <vector>

#include "shieldrun/sched/scheduler.hpp"

namespace shieldrun::testing {

// Counting semaphore on scheduler wait queues.
struct GreenSemaphore {
  sched::Scheduler& s;
  sched::LockId lock;
  std::atomic<long> count{0};

  explicit GreenSemaphore(sched::Scheduler& sch) : s(sch), lock(sch.new_lock_id()) {}

  void acquire() {
    for (;;) {
      long c = count.load();
      while (c > 0) {
        if (count.compare_exchange_weak(c, c - 1)) return;
      }
      s.block_on(lock);
    }
  }
  void release_one() {
    count.fetch_add(1);
    s.wake(lock);
  }
};

struct ScheduleOutcome {
  std::size_t spawned = 0;
  std::size_t finished = 0;
  std::size_t blocked_left = 0;
  std::size_t max_running = 0;
};

// Random producer/consumer schedule: every acquire is matched by a release
// from another thread, so a scheduler without lost wakeups finishes all
// threads.
inline ScheduleOutcome run_random_schedule(std::uint64_t seed, unsigned tcs,
                                           unsigned runtime_threads) {
  std::mt19937_64 rng(seed);
  sched::SchedulerOptions opt;
  opt.tcs_count = tcs;
  opt.runtime_threads = runtime_threads;
  opt.stack_size = 64 * 1024;
  sched::Scheduler s(opt);

  std::size_t sems_n = 1 + rng() % 3;
  std::vector<std::unique_ptr<GreenSemaphore>> sems;
  for (std::size_t i = 0; i < sems_n; ++i) sems.push_back(std::make_unique<GreenSemaphore>(s));

  // ops: >=0 acquire sem, -1 yield, -(2+k) release sem k
  std::size_t producers = 1 + rng() % 3;
  std::size_t consumers = 1 + rng() % 4;
  std::vector<std::vector<int>> prod_ops(producers), cons_ops(consumers);
  for (auto& ops : cons_ops) {
    std::size_t n = rng() % 6;
    for (std::size_t i = 0; i < n; ++i) {
      int sem = static_cast<int>(rng() % sems_n);
      ops.push_back(sem);
      prod_ops[rng() % producers].push_back(-(2 + sem));
      if (rng() % 2) ops.push_back(-1);
    }
  }
  for (auto& ops : prod_ops) {
    std::shuffle(ops.begin(), ops.end(), rng);
    std::size_t yields = rng() % 4;
    for (std::size_t i = 0; i < yields; ++i) ops.insert(ops.begin() + rng() % (ops.size() + 1), -1);
  }

  auto body = [&s, &sems](std::vector<int> ops) {
    return [&s, &sems, ops = std::move(ops)] {
      for (int op : ops) {
        if (op >= 0) {
          sems[op]->acquire();
        } else if (op == -1) {
          s.yield_now();
        } else {
          sems[-op - 2]->release_one();
        }
      }
    };
  };

  ScheduleOutcome out;
  bool nested = rng() % 2;
  std::vector<std::vector<int>> all;
  for (auto& o : cons_ops) all.push_back(o);
  for (auto& o : prod_ops) all.push_back(o);
  std::shuffle(all.begin(), all.end(), rng);
  out.spawned = all.size() + (nested ? 1 : 0);
  if (nested) {
    // A parent spawns half the workers from inside a green thread and joins them.
    std::size_t half = all.size() / 2;
    std::vector<std::vector<int>> inner(all.begin(), all.begin() + half);
    all.erase(all.begin(), all.begin() + half);
    out.spawned = all.size() + inner.size() + 1;
    s.spawn([&s, inner, body] {
      std::vector<sched::Tid> kids;
      for (auto& o : inner) kids.push_back(s.spawn(body(o)));
      for (auto k : kids) s.join(k);
    });
  }
  for (auto& o : all) s.spawn(body(o));
  auto r = s.run();
  out.finished = r.finished;
  out.blocked_left = r.blocked.size();
  out.max_running = s.max_running();
  return out;
}

}  // namespace shieldrun::testing
