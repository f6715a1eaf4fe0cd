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
#include <string>
#include <string_view>
#include <vector>

namespace shieldrun::fs {

enum class ShieldMode : std::uint8_t {
  EncryptAuth = 1,
  AuthOnly = 2,
  Passthrough = 3,
};

std::string_view to_string(ShieldMode mode);
// Accepts the names above (case-sensitive). Raises ParseError otherwise.
ShieldMode parse_shield_mode(std::string_view text);

struct PathPolicy {
  std::string prefix;
  ShieldMode mode = ShieldMode::Passthrough;

  bool operator==(const PathPolicy&) const = default;
};

// Longest matching prefix wins; Passthrough when nothing matches. A prefix
// matches on whole path components, so "/secure" covers "/secure/a" but not
// "/secureX".
ShieldMode policy_for(const std::vector<PathPolicy>& policies, std::string_view path);

// Policy file: one `prefix<TAB>mode` per line; blank lines and lines
// starting with '#' are ignored.
std::vector<PathPolicy> parse_policy_file(std::string_view text);
std::string format_policy_file(const std::vector<PathPolicy>& policies);

}  // namespace shieldrun::fs
