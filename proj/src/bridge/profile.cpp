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

#include "shieldrun/bridge/profile.hpp"

#include <cstdio>

namespace shieldrun::bridge {

std::string_view to_string(SyscallClass cls) {
  switch (cls) {
    case SyscallClass::Read: return "read";
    case SyscallClass::Write: return "write";
    case SyscallClass::Open: return "open";
    case SyscallClass::Close: return "close";
    case SyscallClass::Nanosleep: return "nanosleep";
    case SyscallClass::SchedYield: return "sched_yield";
    case SyscallClass::Munmap: return "munmap";
    case SyscallClass::Brk: return "brk";
    case SyscallClass::Rename: return "rename";
    case SyscallClass::Futex: return "futex";
    case SyscallClass::Spinlock: return "spinlock";
  }
  return "?";
}

bool crosses_bridge(SyscallClass cls) {
  return cls != SyscallClass::Futex && cls != SyscallClass::Spinlock;
}

void SyscallProfile::record(SyscallClass cls, std::uint64_t time, bool via_bridge) {
  ClassStats& s = stats_[static_cast<std::size_t>(cls)];
  s.time += time;
  ++s.calls;
  if (via_bridge) {
    ++s.bridge_calls;
    s.bridge_time += time;
  }
}

std::uint64_t SyscallProfile::total_time() const {
  std::uint64_t t = 0;
  for (const auto& s : stats_) t += s.time;
  return t;
}

std::uint64_t SyscallProfile::bridge_time() const {
  std::uint64_t t = 0;
  for (const auto& s : stats_) t += s.bridge_time;
  return t;
}

double SyscallProfile::percent(SyscallClass cls) const {
  std::uint64_t total = total_time();
  if (total == 0) return 0.0;
  return 100.0 * static_cast<double>(stats(cls).time) / static_cast<double>(total);
}

std::string SyscallProfile::render_table() const {
  std::string out;
  char line[128];
  std::snprintf(line, sizeof(line), "%-12s %16s %10s %9s\n", "syscall", "time", "calls", "time(%)");
  out += line;
  for (std::size_t i = 0; i < kSyscallClassCount; ++i) {
    auto cls = static_cast<SyscallClass>(i);
    const ClassStats& s = stats_[i];
    std::snprintf(line, sizeof(line), "%-12s %16llu %10llu %9.2f\n",
                  std::string(to_string(cls)).c_str(), static_cast<unsigned long long>(s.time),
                  static_cast<unsigned long long>(s.calls), percent(cls));
    out += line;
  }
  return out;
}

std::string SyscallProfile::render_csv() const {
  std::string out = "class,time_units,percent\n";
  char line[128];
  for (std::size_t i = 0; i < kSyscallClassCount; ++i) {
    auto cls = static_cast<SyscallClass>(i);
    std::snprintf(line, sizeof(line), "%s,%llu,%.4f\n", std::string(to_string(cls)).c_str(),
                  static_cast<unsigned long long>(stats_[i].time), percent(cls));
    out += line;
  }
  return out;
}

}  // namespace shieldrun::bridge
