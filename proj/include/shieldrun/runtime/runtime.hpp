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

#include <functional>
#include <memory>

#include "shieldrun/bridge/bridge.hpp"
#include "shieldrun/enclave/enclave.hpp"
#include "shieldrun/sched/scheduler.hpp"

namespace shieldrun::runtime {

struct RuntimeOptions {
  unsigned runtime_threads = 1;
  std::size_t green_stack_size = 512 * 1024;
  bridge::BridgeOptions bridge;
  // Defaults to PosixHost.
  std::unique_ptr<bridge::HostBackend> host;
};

// Scheduler hooks that account idle periods and lock waits on the enclave.
class EnclaveHooks : public sched::SchedulerHooks {
 public:
  explicit EnclaveHooks(enclave::Enclave& e) : enclave_(e) {}
  std::uint64_t now() override;
  void idle(std::uint64_t wait, sched::IdleDecision decision) override;
  void lock_waited(sched::LockId lock, std::uint64_t duration) override;
  std::uint64_t cost_per_transition() override;
  void runtime_thread_started(unsigned index) override;
  void runtime_thread_stopped(unsigned index) override;

 private:
  enclave::Enclave& enclave_;
  std::mutex mu_;
  std::vector<std::uint32_t> slots_;
};

// One enclave with its scheduler and syscall bridge. In native mode the
// bridge runs synchronously and no transitions are counted.
class Runtime {
 public:
  Runtime(ByteSpan code_image, enclave::EnclaveConfig config, enclave::CostModel costs = {},
          RuntimeOptions options = {});
  ~Runtime();

  enclave::Enclave& enclave() { return *enclave_; }
  sched::Scheduler& scheduler() { return *scheduler_; }
  bridge::SyscallBridge& bridge() { return *bridge_; }

  // Spawns `main` as a green thread and runs the scheduler until quiescent.
  sched::RunResult run_main(std::function<void()> main);

 private:
  std::unique_ptr<enclave::Enclave> enclave_;
  std::unique_ptr<EnclaveHooks> hooks_;
  std::unique_ptr<sched::Scheduler> scheduler_;
  std::unique_ptr<bridge::SyscallBridge> bridge_;
};

}  // namespace shieldrun::runtime
