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

#include "shieldrun/runtime/runtime.hpp"

namespace shieldrun::runtime {

using bridge::SyscallClass;

std::uint64_t EnclaveHooks::now() { return enclave_.now(); }

void EnclaveHooks::idle(std::uint64_t wait, sched::IdleDecision decision) {
  enclave_.charge_idle(wait);
  if (decision == sched::IdleDecision::SpinInside || enclave_.mode() == enclave::ExecMode::Native) {
    enclave_.record_syscall(SyscallClass::Spinlock, wait, false);
  } else {
    enclave_.record_syscall(SyscallClass::Nanosleep, wait, false);
    enclave_.charge_transition_pair();
  }
}

void EnclaveHooks::lock_waited(sched::LockId, std::uint64_t duration) {
  enclave_.record_syscall(SyscallClass::Futex, duration, false);
}

std::uint64_t EnclaveHooks::cost_per_transition() { return enclave_.costs().cost_per_transition; }

void EnclaveHooks::runtime_thread_started(unsigned index) {
  std::uint32_t slot = enclave_.acquire_tcs();
  {
    std::lock_guard lk(mu_);
    if (slots_.size() <= index) slots_.resize(index + 1);
    slots_[index] = slot;
  }
  if (enclave_.mode() != enclave::ExecMode::Native) enclave_.record_entry();
}

void EnclaveHooks::runtime_thread_stopped(unsigned index) {
  if (enclave_.mode() != enclave::ExecMode::Native) enclave_.record_exit();
  std::uint32_t slot;
  {
    std::lock_guard lk(mu_);
    slot = slots_.at(index);
  }
  enclave_.release_tcs(slot);
}

Runtime::Runtime(ByteSpan code_image, enclave::EnclaveConfig config, enclave::CostModel costs,
                 RuntimeOptions options) {
  enclave_ = enclave::Enclave::create(code_image, std::move(config), costs);
  hooks_ = std::make_unique<EnclaveHooks>(*enclave_);
  sched::SchedulerOptions so;
  so.runtime_threads = options.runtime_threads;
  so.tcs_count = enclave_->config().tcs_count;
  so.stack_size = options.green_stack_size;
  scheduler_ = std::make_unique<sched::Scheduler>(so, hooks_.get());
  if (enclave_->mode() == enclave::ExecMode::Native) options.bridge.synchronous = true;
  auto host = options.host ? std::move(options.host) : std::make_unique<bridge::PosixHost>();
  bridge_ = std::make_unique<bridge::SyscallBridge>(*enclave_, scheduler_.get(), std::move(host),
                                                    options.bridge);
}

Runtime::~Runtime() {
  // Workers reference the scheduler, so the bridge goes first.
  bridge_.reset();
  scheduler_.reset();
}

sched::RunResult Runtime::run_main(std::function<void()> main) {
  scheduler_->spawn(std::move(main));
  return scheduler_->run();
}

}  // namespace shieldrun::runtime
