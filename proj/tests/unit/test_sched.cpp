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

#include <atomic>
#include <string>
#include <vector>

#include "doctest.h"
#include "sched_workload.hpp"
#include "shieldrun/common/error.hpp"
#include "shieldrun/sched/scheduler.hpp"

using namespace shieldrun;
using namespace shieldrun::sched;

TEST_CASE("M:N: ten threads on four TCS all complete") {
  SchedulerOptions o;
  o.tcs_count = 4;
  o.runtime_threads = 4;
  Scheduler s(o);
  std::atomic<int> done{0};
  for (int i = 0; i < 10; ++i) {
    s.spawn([&] {
      for (int k = 0; k < 5; ++k) s.yield_now();
      ++done;
    });
  }
  auto r = s.run();
  CHECK(done == 10);
  CHECK(r.finished == 10);
  CHECK(r.blocked.empty());
  CHECK(s.max_running() <= 4);
}

TEST_CASE("runtime threads may not exceed TCS count") {
  SchedulerOptions o;
  o.tcs_count = 2;
  o.runtime_threads = 3;
  CHECK_THROWS_AS(Scheduler{o}, Error);
}

TEST_CASE("immediately finishing thread is joinable") {
  Scheduler s;
  Tid t = s.spawn([] {});
  bool joined = false;
  s.spawn([&] {
    s.join(t);
    joined = true;
  });
  s.run();
  CHECK(s.state(t) == ThreadState::Finished);
  CHECK(joined);
}

TEST_CASE("spawn from inside a green thread") {
  Scheduler s;
  std::vector<std::string> log;
  s.spawn([&] {
    Tid child = s.spawn([&] { log.push_back("child"); });
    CHECK(s.state(child) == ThreadState::Runnable);
    s.join(child);
    log.push_back("parent");
  });
  s.run();
  CHECK(log == std::vector<std::string>{"child", "parent"});
}

TEST_CASE("round robin yields interleave strictly") {
  Scheduler s;
  std::string trace;
  for (char c : {'A', 'B'}) {
    s.spawn([&, c] {
      for (int i = 0; i < 6; ++i) {
        trace.push_back(c);
        s.yield_now();
      }
    });
  }
  s.run();
  CHECK(trace == "ABABABABABAB");
}

TEST_CASE("wake makes the blocked thread runnable before the waker's next yield returns") {
  Scheduler s;
  LockId L = s.new_lock_id();
  std::vector<std::string> log;
  s.spawn([&] {
    log.push_back("T1 block");
    s.block_on(L);
    log.push_back("T1 resumed");
  });
  s.spawn([&] {
    log.push_back("T2 wake");
    s.wake(L);
    s.yield_now();
    log.push_back("T2 after yield");
  });
  s.run();
  CHECK(log == std::vector<std::string>{"T1 block", "T2 wake", "T1 resumed", "T2 after yield"});
}

TEST_CASE("wake on an empty queue changes no thread state and is not lost") {
  Scheduler s;
  LockId L = s.new_lock_id();
  Tid sleeper = 0;
  bool passed = false;
  s.spawn([&] {
    sleeper = s.spawn([&] {
      s.block_on(L);  // consumes the earlier wake
      passed = true;
    });
    ThreadState before = s.state(sleeper);
    s.wake(L);
    CHECK(s.state(sleeper) == before);
  });
  auto r = s.run();
  CHECK(passed);
  CHECK(r.blocked.empty());
}

TEST_CASE("wake of an unknown lock is a no-op from outside") {
  Scheduler s;
  s.wake(987654);
  s.wake_all(987655);
  auto r = s.run();
  CHECK(r.finished == 0);
}

TEST_CASE("wake_all releases every waiter in FIFO order") {
  Scheduler s;
  LockId L = s.new_lock_id();
  std::string order;
  for (char c : {'a', 'b', 'c'}) {
    s.spawn([&, c] {
      s.block_on(L);
      order.push_back(c);
    });
  }
  s.spawn([&] { s.wake_all(L); });
  s.run();
  CHECK(order == "abc");
}

TEST_CASE("idle policy threshold") {
  CHECK(idle_policy(0, 5000) == IdleDecision::SpinInside);
  CHECK(idle_policy(9999, 5000) == IdleDecision::SpinInside);
  CHECK(idle_policy(10000, 5000) == IdleDecision::ExitOutside);
  CHECK(idle_policy(50000, 5000) == IdleDecision::ExitOutside);
}

TEST_CASE("sleepers wake in deadline order and idle advances virtual time") {
  struct Hooks : SchedulerHooks {
    std::uint64_t clock = 0;
    std::vector<IdleDecision> decisions;
    std::uint64_t now() override { return clock; }
    void idle(std::uint64_t wait, IdleDecision d) override {
      clock += wait;
      decisions.push_back(d);
    }
  } hooks;
  Scheduler s({}, &hooks);
  std::vector<int> order;
  for (int d : {30000, 100, 7000}) {
    s.spawn([&, d] {
      s.sleep_until(static_cast<std::uint64_t>(d));
      order.push_back(d);
    });
  }
  s.run();
  CHECK(order == std::vector<int>{100, 7000, 30000});
  CHECK(hooks.clock == 30000);
  REQUIRE(hooks.decisions.size() == 3);
  CHECK(hooks.decisions[0] == IdleDecision::SpinInside);
  CHECK(hooks.decisions[1] == IdleDecision::SpinInside);
  CHECK(hooks.decisions[2] == IdleDecision::ExitOutside);
}

TEST_CASE("ticket waits need delivery and virtual time") {
  Scheduler s;
  bool resumed = false;
  s.spawn([&] {
    s.block_on_ticket(42, 500);
    resumed = true;
  });
  s.spawn([&] { s.ticket_ready(42); });
  s.run();
  CHECK(resumed);
  CHECK(s.hooks().now() == 500);
}

TEST_CASE("lock wait time is reported") {
  struct Hooks : SchedulerHooks {
    std::uint64_t clock = 0;
    std::uint64_t waited = 0;
    std::uint64_t now() override { return clock; }
    void idle(std::uint64_t wait, IdleDecision) override { clock += wait; }
    void lock_waited(LockId, std::uint64_t d) override { waited += d; }
  } hooks;
  Scheduler s({}, &hooks);
  LockId L = s.new_lock_id();
  s.spawn([&] { s.block_on(L); });
  s.spawn([&] {
    s.sleep_until(1234);
    s.wake(L);
  });
  s.run();
  CHECK(hooks.waited == 1234);
}

TEST_CASE("blocked threads are reported at quiescence") {
  Scheduler s;
  LockId L = s.new_lock_id();
  Tid t = s.spawn([&] { s.block_on(L); });
  auto r = s.run();
  CHECK(r.blocked == std::vector<Tid>{t});
  s.wake(L);
  r = s.run();
  CHECK(r.blocked.empty());
  CHECK(s.state(t) == ThreadState::Finished);
}

TEST_CASE("exceptions escaping a green thread are rethrown by run") {
  Scheduler s;
  s.spawn([] { raise(Errc::ShapeMismatch, "boom"); });
  try {
    s.run();
    FAIL("expected rethrow");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::ShapeMismatch);
  }
}

TEST_CASE("green-only calls outside a green thread are misuse") {
  Scheduler s;
  CHECK_THROWS_AS(s.yield_now(), Error);
  CHECK_FALSE(Scheduler::in_green_thread());
}

TEST_CASE("property: randomized schedules finish without lost wakeups") {
  for (std::uint64_t seed = 1; seed <= 300; ++seed) {
    unsigned tcs = 1 + seed % 4;
    unsigned rt = 1 + (seed / 4) % tcs;
    auto out = testing::run_random_schedule(seed, tcs, rt);
    INFO("seed " << seed);
    CHECK(out.finished == out.spawned);
    CHECK(out.blocked_left == 0);
    CHECK(out.max_running <= tcs);
  }
}
