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

#include "shieldrun/common/bytes.hpp"
#include "shieldrun/tensor/graph.hpp"
#include "shieldrun/tensor/session.hpp"

namespace shieldrun::tensor {

// Frozen graph, little-endian throughout:
//   "TSCG" | version u32 (1) | node_count u32 | nodes
//   node = name | op | input_count u32 | inputs | attr_count u32 | attrs
//   attr = key | tag u8 | value
//     1 int     i64
//     2 float   f64
//     3 string  str
//     4 ints    count u32, i64 each
//     5 strings count u32, str each
//     6 tensor  rank u32, dims i64 each, f32 each
//   str = length u32 | bytes
// Attributes are written in key order, nodes in graph order.
inline constexpr std::uint32_t kFrozenVersion = 1;
// Checkpoint:
//   "TSCK" | version u32 (1) | count u32 |
//   per variable: name_len u32 | name | rank u32 | dims i64 | f32 values
inline constexpr std::uint32_t kCheckpointVersion = 1;

Bytes export_frozen(const Graph& graph);
// Folds the checkpoint into the matching variable nodes as "value".
Bytes export_frozen(const Graph& graph, const Checkpoint& ckpt);
// CorruptFile on any structural problem, FormatVersionUnknown on a version
// other than 1.
Graph import_frozen(ByteSpan file);

Bytes save_checkpoint(const Checkpoint& ckpt);
Checkpoint load_checkpoint(ByteSpan file);

}  // namespace shieldrun::tensor
