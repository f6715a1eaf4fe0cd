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
#include <string_view>

namespace shieldrun::bridge {

enum class SyscallClass : std::uint8_t {
  Read,
  Write,
  Open,
  Close,
  Nanosleep,
  SchedYield,
  Munmap,
  Brk,
  Rename,
  // Serviced inside the enclave, never crosses the bridge.
  Futex,
  Spinlock,
};

inline constexpr std::size_t kSyscallClassCount = 11;

std::string_view to_string(SyscallClass cls);
bool crosses_bridge(SyscallClass cls);

struct ClassStats {
  std::uint64_t time = 0;          // virtual units
  std::uint64_t calls = 0;
  std::uint64_t bridge_calls = 0;  // requests that went through the queue
  std::uint64_t bridge_time = 0;
};

// Per-class accounting of the time an enclave spent in syscalls and
// in-enclave lock waits. Futex time is the virtual time green threads spent
// parked in scheduler wait queues; spinlock time is idle spinning inside the
// enclave.
class SyscallProfile {
 public:
  void record(SyscallClass cls, std::uint64_t time, bool via_bridge);

  const ClassStats& stats(SyscallClass cls) const { return stats_[static_cast<std::size_t>(cls)]; }
  std::uint64_t total_time() const;
  std::uint64_t bridge_time() const;
  double percent(SyscallClass cls) const;

  // Aligned text table: class, time, calls, percent.
  std::string render_table() const;
  // `class,time_units,percent` with a header line.
  std::string render_csv() const;

 private:
  std::array<ClassStats, kSyscallClassCount> stats_{};
};

}  // namespace shieldrun::bridge
