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

namespace shieldrun::enclave {

// Virtual-time cost constants, in abstract units. Nothing here sleeps; every
// cost is added to the enclave's virtual clock.
struct CostModel {
  std::uint64_t page_size = 4096;
  std::uint64_t cost_hit = 1;
  std::uint64_t cost_miss = 1000;
  std::uint64_t cost_per_transition = 5000;

  // One unit of compute per this many multiply-accumulates.
  std::uint64_t macs_per_unit = 32;
  // AEAD work: one unit per this many bytes sealed or opened.
  std::uint64_t crypto_bytes_per_unit = 64;
  // Host-side service time of a bridged syscall: base + bytes / divisor.
  std::uint64_t syscall_base = 2000;
  std::uint64_t syscall_bytes_per_unit = 16;
};

}  // namespace shieldrun::enclave
