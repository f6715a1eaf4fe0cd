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
#include <memory>
#include <optional>
#include <vector>

#include "shieldrun/common/bytes.hpp"
#include "shieldrun/fs/shield.hpp"
#include "shieldrun/tensor/tensor.hpp"

namespace shieldrun::tensor {

// CIFAR-10 binary layout: one label byte, then 1024 red, 1024 green and
// 1024 blue bytes of a 32x32 image in row-major order.
inline constexpr int kImageSide = 32;
inline constexpr std::size_t kPixelBytes = 3072;
inline constexpr std::size_t kRecordBytes = 1 + kPixelBytes;
inline constexpr int kNumClasses = 10;

struct Record {
  std::uint8_t label = 0;
  std::array<std::uint8_t, kPixelBytes> pixels{};
};

// (32,32,3) with bytes scaled to [0,1].
Tensor record_image(const Record& r);
Bytes encode_records(const std::vector<Record>& records);

class RecordSource {
 public:
  virtual ~RecordSource() = default;
  // nullopt at the end of the input.
  virtual std::optional<Record> next() = 0;
};

// Sequential buffered reader over a (possibly shielded) file. A trailing
// partial record raises RecordTruncated, a label above 9 LabelOutOfRange.
// With `loop` the file is read again from the start at its end.
class FileRecordSource : public RecordSource {
 public:
  explicit FileRecordSource(std::unique_ptr<fs::ShieldedFile> file, bool loop = false,
                            std::size_t block = 64 * 1024);
  std::optional<Record> next() override;
  std::uint64_t records_read() const { return count_; }

 private:
  bool fill();

  std::unique_ptr<fs::ShieldedFile> file_;
  bool loop_;
  std::size_t block_;
  Bytes buf_;
  std::size_t pos_ = 0;
  std::uint64_t offset_ = 0;
  std::uint64_t count_ = 0;
};

class VectorRecordSource : public RecordSource {
 public:
  explicit VectorRecordSource(std::vector<Record> records) : records_(std::move(records)) {}
  std::optional<Record> next() override;

 private:
  std::vector<Record> records_;
  std::size_t at_ = 0;
};

// Desk-scale CIFAR-like data. Class k has hue k / 2 of five evenly spaced
// hues and stripes running horizontally (k even) or vertically (k odd),
// with random stripe period, phase, brightness and pixel noise.
struct SyntheticOptions {
  std::size_t count = 2000;
  std::uint64_t seed = 1;
  double noise = 0.08;
};
std::vector<Record> synthetic_records(const SyntheticOptions& options = {});

}  // namespace shieldrun::tensor
