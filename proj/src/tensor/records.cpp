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

#include "shieldrun/tensor/records.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace shieldrun::tensor {

Tensor record_image(const Record& r) {
  Tensor img({kImageSide, kImageSide, 3});
  constexpr int plane = kImageSide * kImageSide;
  for (int c = 0; c < 3; ++c) {
    for (int i = 0; i < plane; ++i) img.data[static_cast<std::size_t>(i) * 3 + c] = r.pixels[c * plane + i] / 255.0f;
  }
  return img;
}

Bytes encode_records(const std::vector<Record>& records) {
  Bytes out;
  out.reserve(records.size() * kRecordBytes);
  for (const auto& r : records) {
    out.push_back(r.label);
    out.insert(out.end(), r.pixels.begin(), r.pixels.end());
  }
  return out;
}

FileRecordSource::FileRecordSource(std::unique_ptr<fs::ShieldedFile> file, bool loop, std::size_t block)
    : file_(std::move(file)), loop_(loop), block_(std::max(block, kRecordBytes)) {}

bool FileRecordSource::fill() {
  buf_.erase(buf_.begin(), buf_.begin() + static_cast<std::ptrdiff_t>(pos_));
  pos_ = 0;
  Bytes more = file_->read(offset_, block_);
  offset_ += more.size();
  buf_.insert(buf_.end(), more.begin(), more.end());
  return !more.empty();
}

std::optional<Record> FileRecordSource::next() {
  bool rewound = false;
  while (buf_.size() - pos_ < kRecordBytes) {
    if (fill()) continue;
    if (buf_.size() - pos_ > 0) {
      raise(Errc::RecordTruncated, std::to_string(buf_.size() - pos_) + " trailing bytes after record " +
                                       std::to_string(count_));
    }
    if (!loop_ || rewound || count_ == 0) return std::nullopt;
    offset_ = 0;
    rewound = true;
  }
  Record r;
  r.label = buf_[pos_];
  if (r.label >= kNumClasses) {
    raise(Errc::LabelOutOfRange, "record " + std::to_string(count_) + " has label " + std::to_string(r.label));
  }
  std::copy_n(buf_.begin() + static_cast<std::ptrdiff_t>(pos_ + 1), kPixelBytes, r.pixels.begin());
  pos_ += kRecordBytes;
  ++count_;
  return r;
}

std::optional<Record> VectorRecordSource::next() {
  if (at_ >= records_.size()) return std::nullopt;
  return records_[at_++];
}

namespace {

std::array<float, 3> hue_rgb(double hue) {
  // HSV to RGB with saturation 0.8 and value 0.85.
  const double s = 0.8, v = 0.85;
  const double h = std::fmod(hue, 1.0) * 6.0;
  const int i = static_cast<int>(h);
  const double f = h - i;
  const double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
  switch (i % 6) {
    case 0: return {float(v), float(t), float(p)};
    case 1: return {float(q), float(v), float(p)};
    case 2: return {float(p), float(v), float(t)};
    case 3: return {float(p), float(q), float(v)};
    case 4: return {float(t), float(p), float(v)};
    default: return {float(v), float(p), float(q)};
  }
}

}  // namespace

std::vector<Record> synthetic_records(const SyntheticOptions& options) {
  std::mt19937_64 rng(options.seed);
  std::uniform_int_distribution<int> klass(0, kNumClasses - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, options.noise);
  constexpr int plane = kImageSide * kImageSide;
  std::vector<Record> out(options.count);
  for (auto& r : out) {
    const int k = klass(rng);
    r.label = static_cast<std::uint8_t>(k);
    const auto color = hue_rgb((k / 2) / 5.0 + 0.04 * (unit(rng) - 0.5));
    const bool vertical = k % 2 == 1;
    const double period = 4.0 + 4.0 * unit(rng);
    const double phase = unit(rng) * 2 * std::numbers::pi;
    const double gain = 0.8 + 0.3 * unit(rng);
    for (int y = 0; y < kImageSide; ++y) {
      for (int x = 0; x < kImageSide; ++x) {
        const double pos = vertical ? x : y;
        const double stripe = 0.5 + 0.5 * std::sin(2 * std::numbers::pi * pos / period + phase);
        const double shade = gain * (0.35 + 0.65 * stripe);
        for (int c = 0; c < 3; ++c) {
          const double v = std::clamp(color[c] * shade + noise(rng), 0.0, 1.0);
          r.pixels[c * plane + y * kImageSide + x] = static_cast<std::uint8_t>(std::lround(v * 255.0));
        }
      }
    }
  }
  return out;
}

}  // namespace shieldrun::tensor
