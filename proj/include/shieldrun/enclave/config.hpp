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
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "shieldrun/common/crypto.hpp"
#include "shieldrun/fs/policy.hpp"

namespace shieldrun::enclave {

inline constexpr std::uint64_t KiB = 1024;
inline constexpr std::uint64_t MiB = 1024 * KiB;
inline constexpr std::uint64_t GiB = 1024 * MiB;

// native:        no shields, no paging or transition costs
// simulation:    shields apply, paging and transition costs are zero
// hardware-sim:  shields and every cost apply
enum class ExecMode { Native, Simulation, HardwareSim };

std::string_view to_string(ExecMode mode);
ExecMode parse_mode(std::string_view text);  // ModeUnknown on failure

struct EnclaveConfig {
  std::uint64_t heap_limit = 256 * MiB;
  std::uint64_t stack_limit = 8 * MiB;
  std::uint64_t epc_limit = 90 * MiB;
  std::uint32_t tcs_count = 4;
  ExecMode mode = ExecMode::HardwareSim;
  std::vector<fs::PathPolicy> shield_policies;

  // Secrets. Never part of the measured canonical form.
  std::optional<crypto::SymmetricKey> fs_key;
  std::optional<crypto::SigningKeyPair> tls_identity;

  // Raises ConfigInvalid when a limit is zero.
  void validate() const;

  // Sorted `key=value` lines with secrets left out entirely.
  std::string canonical() const;

  bool shields_active() const { return mode != ExecMode::Native; }
};

// Parses sizes such as "4096", "64K", "220M", "2G" (binary multiples).
std::uint64_t parse_size(std::string_view text);

// Reads TS_HEAP, TS_STACK, TS_EPC, TS_TCS and TS_MODE. Unset variables keep
// the EnclaveConfig defaults.
EnclaveConfig read_env_config(const std::map<std::string, std::string>& env);
// Same, from the process environment.
EnclaveConfig read_process_env_config();

}  // namespace shieldrun::enclave
