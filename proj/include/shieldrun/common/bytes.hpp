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

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "shieldrun/common/error.hpp"

namespace shieldrun {

using Bytes = std::vector<std::uint8_t>;
using ByteSpan = std::span<const std::uint8_t>;
using MutableByteSpan = std::span<std::uint8_t>;

inline ByteSpan as_bytes(std::string_view s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

std::string to_hex(ByteSpan bytes);
// Throws ParseError on odd length or non-hex characters.
Bytes from_hex(std::string_view hex);

// Append-only encoder. Integer width and byte order are explicit at every
// call site because the on-disk formats are little-endian and the wire
// formats are big-endian.
class ByteWriter {
 public:
  ByteWriter() = default;

  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u16_be(std::uint16_t v);
  void u32_be(std::uint32_t v);
  void u64_be(std::uint64_t v);
  void u32_le(std::uint32_t v);
  void u64_le(std::uint64_t v);
  void i64_le(std::int64_t v) { u64_le(static_cast<std::uint64_t>(v)); }
  void f32_le(float v);
  void bytes(ByteSpan b) { buf_.insert(buf_.end(), b.begin(), b.end()); }
  void str_le(std::string_view s);  // u32 length + bytes
  void zeros(std::size_t n) { buf_.insert(buf_.end(), n, 0); }

  std::size_t size() const { return buf_.size(); }
  const Bytes& data() const& { return buf_; }
  Bytes take() && { return std::move(buf_); }

 private:
  Bytes buf_;
};

// Bounds-checked decoder. Running past the end raises `underrun_code`, so
// each format chooses how truncation is reported (CorruptFile, TamperDetected,
// ProtocolError, ...).
class ByteReader {
 public:
  explicit ByteReader(ByteSpan data, Errc underrun_code = Errc::CorruptFile)
      : data_(data), underrun_(underrun_code) {}

  std::uint8_t u8();
  std::uint16_t u16_be();
  std::uint32_t u32_be();
  std::uint64_t u64_be();
  std::uint32_t u32_le();
  std::uint64_t u64_le();
  std::int64_t i64_le() { return static_cast<std::int64_t>(u64_le()); }
  float f32_le();
  ByteSpan bytes(std::size_t n);
  std::string str_le(std::size_t max_len = 1 << 20);

  std::size_t remaining() const { return data_.size() - pos_; }
  std::size_t position() const { return pos_; }
  bool done() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t n);

  ByteSpan data_;
  std::size_t pos_ = 0;
  Errc underrun_;
};

}  // namespace shieldrun
