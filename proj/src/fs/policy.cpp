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

#include "shieldrun/fs/policy.hpp"

#include "shieldrun/common/error.hpp"

namespace shieldrun::fs {

std::string_view to_string(ShieldMode mode) {
  switch (mode) {
    case ShieldMode::EncryptAuth: return "EncryptAuth";
    case ShieldMode::AuthOnly: return "AuthOnly";
    case ShieldMode::Passthrough: return "Passthrough";
  }
  return "?";
}

ShieldMode parse_shield_mode(std::string_view text) {
  if (text == "EncryptAuth") return ShieldMode::EncryptAuth;
  if (text == "AuthOnly") return ShieldMode::AuthOnly;
  if (text == "Passthrough") return ShieldMode::Passthrough;
  raise(Errc::ParseError, "unknown shield mode '" + std::string(text) + "'");
}

namespace {
bool prefix_matches(std::string_view prefix, std::string_view path) {
  if (prefix.empty()) return true;
  if (path.substr(0, prefix.size()) != prefix) return false;
  if (path.size() == prefix.size() || prefix.back() == '/') return true;
  return path[prefix.size()] == '/';
}
}  // namespace

ShieldMode policy_for(const std::vector<PathPolicy>& policies, std::string_view path) {
  const PathPolicy* best = nullptr;
  for (const auto& p : policies) {
    if (!prefix_matches(p.prefix, path)) continue;
    if (best == nullptr || p.prefix.size() > best->prefix.size()) best = &p;
  }
  return best ? best->mode : ShieldMode::Passthrough;
}

std::vector<PathPolicy> parse_policy_file(std::string_view text) {
  std::vector<PathPolicy> out;
  std::size_t line_no = 0;
  while (!text.empty()) {
    std::size_t nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty() || line.front() == '#') continue;
    std::size_t tab = line.find('\t');
    if (tab == std::string_view::npos) {
      raise(Errc::ParseError, "policy line " + std::to_string(line_no) + " lacks a TAB separator");
    }
    out.push_back({std::string(line.substr(0, tab)), parse_shield_mode(line.substr(tab + 1))});
  }
  return out;
}

std::string format_policy_file(const std::vector<PathPolicy>& policies) {
  std::string out;
  for (const auto& p : policies) {
    out += p.prefix;
    out += '\t';
    out += to_string(p.mode);
    out += '\n';
  }
  return out;
}

}  // namespace shieldrun::fs
