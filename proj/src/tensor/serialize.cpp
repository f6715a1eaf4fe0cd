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

#include "shieldrun/tensor/serialize.hpp"

#include <bit>
#include <cstring>

namespace shieldrun::tensor {

namespace {

constexpr std::uint8_t kInt = 1, kFloat = 2, kString = 3, kInts = 4, kStrings = 5, kTensor = 6;

void write_tensor(ByteWriter& w, const Tensor& t) {
  w.u32_le(static_cast<std::uint32_t>(t.rank()));
  for (auto d : t.shape) w.i64_le(d);
  for (float v : t.data) w.f32_le(v);
}

Tensor read_tensor(ByteReader& r) {
  const std::uint32_t rank = r.u32_le();
  if (rank > 8) raise(Errc::CorruptFile, "tensor rank " + std::to_string(rank));
  Shape shape(rank);
  std::uint64_t n = 1;
  for (auto& d : shape) {
    d = r.i64_le();
    if (d <= 0 || static_cast<std::uint64_t>(d) > r.remaining()) raise(Errc::CorruptFile, "bad tensor dimension");
    n *= static_cast<std::uint64_t>(d);
    if (n > r.remaining() / 4) raise(Errc::CorruptFile, "tensor data truncated");
  }
  Tensor t(shape);
  ByteSpan raw = r.bytes(t.data.size() * 4);
  for (std::size_t i = 0; i < t.data.size(); ++i) {
    std::uint32_t bits = static_cast<std::uint32_t>(raw[4 * i]) | static_cast<std::uint32_t>(raw[4 * i + 1]) << 8 |
                         static_cast<std::uint32_t>(raw[4 * i + 2]) << 16 | static_cast<std::uint32_t>(raw[4 * i + 3]) << 24;
    t.data[i] = std::bit_cast<float>(bits);
  }
  return t;
}

std::uint32_t read_count(ByteReader& r, std::size_t min_item_bytes) {
  const std::uint32_t n = r.u32_le();
  if (static_cast<std::uint64_t>(n) * min_item_bytes > r.remaining()) raise(Errc::CorruptFile, "count exceeds file size");
  return n;
}

void check_header(ByteReader& r, std::string_view magic, std::uint32_t version) {
  ByteSpan m = r.bytes(4);
  if (std::memcmp(m.data(), magic.data(), 4) != 0) raise(Errc::CorruptFile, "bad magic, expected " + std::string(magic));
  const std::uint32_t v = r.u32_le();
  if (v != version) raise(Errc::FormatVersionUnknown, std::string(magic) + " version " + std::to_string(v));
}

void write_attr(ByteWriter& w, const AttrValue& v) {
  std::visit(
      [&](const auto& x) {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, std::int64_t>) {
          w.u8(kInt);
          w.i64_le(x);
        } else if constexpr (std::is_same_v<T, double>) {
          w.u8(kFloat);
          w.u64_le(std::bit_cast<std::uint64_t>(x));
        } else if constexpr (std::is_same_v<T, std::string>) {
          w.u8(kString);
          w.str_le(x);
        } else if constexpr (std::is_same_v<T, std::vector<std::int64_t>>) {
          w.u8(kInts);
          w.u32_le(static_cast<std::uint32_t>(x.size()));
          for (auto i : x) w.i64_le(i);
        } else if constexpr (std::is_same_v<T, std::vector<std::string>>) {
          w.u8(kStrings);
          w.u32_le(static_cast<std::uint32_t>(x.size()));
          for (const auto& s : x) w.str_le(s);
        } else {
          w.u8(kTensor);
          write_tensor(w, x);
        }
      },
      v);
}

AttrValue read_attr(ByteReader& r) {
  switch (r.u8()) {
    case kInt:
      return r.i64_le();
    case kFloat:
      return std::bit_cast<double>(r.u64_le());
    case kString:
      return r.str_le();
    case kInts: {
      std::vector<std::int64_t> v(read_count(r, 8));
      for (auto& i : v) i = r.i64_le();
      return v;
    }
    case kStrings: {
      std::vector<std::string> v(read_count(r, 4));
      for (auto& s : v) s = r.str_le();
      return v;
    }
    case kTensor:
      return read_tensor(r);
    default:
      raise(Errc::CorruptFile, "unknown attribute tag");
  }
}

}  // namespace

Bytes export_frozen(const Graph& graph) {
  ByteWriter w;
  w.bytes(as_bytes("TSCG"));
  w.u32_le(kFrozenVersion);
  w.u32_le(static_cast<std::uint32_t>(graph.nodes().size()));
  for (const auto& n : graph.nodes()) {
    w.str_le(n.name);
    w.str_le(to_string(n.op));
    w.u32_le(static_cast<std::uint32_t>(n.inputs.size()));
    for (const auto& in : n.inputs) w.str_le(in);
    w.u32_le(static_cast<std::uint32_t>(n.attrs.size()));
    for (const auto& [key, value] : n.attrs) {
      w.str_le(key);
      write_attr(w, value);
    }
  }
  return std::move(w).take();
}

Bytes export_frozen(const Graph& graph, const Checkpoint& ckpt) {
  Graph g = graph;
  for (const auto& [name, value] : ckpt) {
    const Node* n = g.find(name);
    if (!n || n->op != OpKind::Variable) raise(Errc::UnknownNode, "checkpoint entry " + name + " is not a variable");
    Tensor v = value;
    v.addr = kUntracked;
    g.mutable_at(name).attrs["value"] = std::move(v);
  }
  return export_frozen(g);
}

Graph import_frozen(ByteSpan file) {
  ByteReader r(file, Errc::CorruptFile);
  check_header(r, "TSCG", kFrozenVersion);
  Graph g;
  try {
    const std::uint32_t count = read_count(r, 16);
    for (std::uint32_t i = 0; i < count; ++i) {
      Node n;
      n.name = r.str_le();
      n.op = parse_op(r.str_le());
      n.inputs.resize(read_count(r, 4));
      for (auto& in : n.inputs) in = r.str_le();
      const std::uint32_t attrs = read_count(r, 5);
      for (std::uint32_t a = 0; a < attrs; ++a) {
        std::string key = r.str_le();
        n.attrs[key] = read_attr(r);
      }
      if (n.attrs.size() != attrs) raise(Errc::CorruptFile, "duplicate attribute in " + n.name);
      g.add(std::move(n));
    }
    if (!r.done()) raise(Errc::CorruptFile, std::to_string(r.remaining()) + " trailing bytes");
    g.validate();
  } catch (const Error& e) {
    if (e.code() == Errc::CorruptFile) throw;
    raise(Errc::CorruptFile, std::string("frozen graph: ") + e.what());
  }
  return g;
}

Bytes save_checkpoint(const Checkpoint& ckpt) {
  ByteWriter w;
  w.bytes(as_bytes("TSCK"));
  w.u32_le(kCheckpointVersion);
  w.u32_le(static_cast<std::uint32_t>(ckpt.size()));
  for (const auto& [name, t] : ckpt) {
    w.str_le(name);
    write_tensor(w, t);
  }
  return std::move(w).take();
}

Checkpoint load_checkpoint(ByteSpan file) {
  ByteReader r(file, Errc::CorruptFile);
  check_header(r, "TSCK", kCheckpointVersion);
  Checkpoint ckpt;
  const std::uint32_t count = read_count(r, 8);
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.str_le();
    if (ckpt.count(name)) raise(Errc::CorruptFile, "duplicate checkpoint entry " + name);
    ckpt[name] = read_tensor(r);
  }
  if (!r.done()) raise(Errc::CorruptFile, std::to_string(r.remaining()) + " trailing bytes");
  return ckpt;
}

}  // namespace shieldrun::tensor
