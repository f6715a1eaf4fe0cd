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

#include "shieldrun/enclave/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <limits>

#include "shieldrun/common/error.hpp"

namespace shieldrun::enclave {

std::string_view to_string(ExecMode mode) {
  switch (mode) {
    case ExecMode::Native: return "native";
    case ExecMode::Simulation: return "simulation";
    case ExecMode::HardwareSim: return "hardware-sim";
  }
  return "?";
}

ExecMode parse_mode(std::string_view text) {
  if (text == "native") return ExecMode::Native;
  if (text == "simulation") return ExecMode::Simulation;
  if (text == "hardware-sim") return ExecMode::HardwareSim;
  raise(Errc::ModeUnknown, "unknown mode '" + std::string(text) + "'");
}

void EnclaveConfig::validate() const {
  if (heap_limit == 0) raise(Errc::ConfigInvalid, "heap_limit must be positive");
  if (stack_limit == 0) raise(Errc::ConfigInvalid, "stack_limit must be positive");
  if (epc_limit == 0) raise(Errc::ConfigInvalid, "epc_limit must be positive");
  if (tcs_count == 0) raise(Errc::ConfigInvalid, "tcs_count must be at least 1");
}

std::string EnclaveConfig::canonical() const {
  std::vector<std::pair<std::string, std::string>> kv;
  kv.emplace_back("epc_limit", std::to_string(epc_limit));
  kv.emplace_back("heap_limit", std::to_string(heap_limit));
  kv.emplace_back("mode", std::string(to_string(mode)));
  kv.emplace_back("stack_limit", std::to_string(stack_limit));
  kv.emplace_back("tcs_count", std::to_string(tcs_count));
  for (std::size_t i = 0; i < shield_policies.size(); ++i) {
    char key[32];
    std::snprintf(key, sizeof(key), "shield_policy.%04zu", i);
    kv.emplace_back(key, shield_policies[i].prefix + "\t" +
                             std::string(fs::to_string(shield_policies[i].mode)));
  }
  std::sort(kv.begin(), kv.end());
  std::string out;
  for (const auto& [k, v] : kv) {
    out += k;
    out += '=';
    out += v;
    out += '\n';
  }
  return out;
}

std::uint64_t parse_size(std::string_view text) {
  if (text.empty()) raise(Errc::ParseError, "empty size");
  std::uint64_t multiplier = 1;
  char suffix = text.back();
  if (!std::isdigit(static_cast<unsigned char>(suffix))) {
    switch (std::toupper(static_cast<unsigned char>(suffix))) {
      case 'K': multiplier = KiB; break;
      case 'M': multiplier = MiB; break;
      case 'G': multiplier = GiB; break;
      default: raise(Errc::ParseError, "bad size suffix in '" + std::string(text) + "'");
    }
    text.remove_suffix(1);
  }
  if (text.empty()) raise(Errc::ParseError, "size has no digits");
  std::uint64_t value = 0;
  for (char c : text) {
    if (!std::isdigit(static_cast<unsigned char>(c))) {
      raise(Errc::ParseError, "malformed size '" + std::string(text) + "'");
    }
    std::uint64_t digit = static_cast<std::uint64_t>(c - '0');
    if (value > (std::numeric_limits<std::uint64_t>::max() - digit) / 10) {
      raise(Errc::ParseError, "size overflows");
    }
    value = value * 10 + digit;
  }
  if (value > std::numeric_limits<std::uint64_t>::max() / multiplier) {
    raise(Errc::ParseError, "size overflows");
  }
  return value * multiplier;
}

EnclaveConfig read_env_config(const std::map<std::string, std::string>& env) {
  EnclaveConfig cfg;
  auto lookup = [&](const char* name) -> const std::string* {
    auto it = env.find(name);
    return it == env.end() ? nullptr : &it->second;
  };
  if (auto* v = lookup("TS_HEAP")) cfg.heap_limit = parse_size(*v);
  if (auto* v = lookup("TS_STACK")) cfg.stack_limit = parse_size(*v);
  if (auto* v = lookup("TS_EPC")) cfg.epc_limit = parse_size(*v);
  if (auto* v = lookup("TS_TCS")) {
    std::uint64_t tcs = parse_size(*v);
    if (tcs > 1024) raise(Errc::ParseError, "TS_TCS out of range");
    cfg.tcs_count = static_cast<std::uint32_t>(tcs);
  }
  if (auto* v = lookup("TS_MODE")) cfg.mode = parse_mode(*v);
  return cfg;
}

EnclaveConfig read_process_env_config() {
  std::map<std::string, std::string> env;
  for (const char* name : {"TS_HEAP", "TS_STACK", "TS_EPC", "TS_TCS", "TS_MODE"}) {
    if (const char* v = std::getenv(name)) env[name] = v;
  }
  return read_env_config(env);
}

}  // namespace shieldrun::enclave
