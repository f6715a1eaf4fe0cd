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

#include "shieldrun/tensor/image.hpp"

#include <algorithm>

namespace shieldrun::tensor {

namespace {

void expect_image(const Tensor& img, const char* what) {
  if (img.rank() != 3) raise(Errc::ShapeMismatch, std::string(what) + " expects (H,W,C), got " + shape_str(img.shape));
}

float clamp01(float v) { return std::min(1.0f, std::max(0.0f, v)); }

}  // namespace

Tensor crop_image(const Tensor& img, int oy, int ox, int h, int w) {
  expect_image(img, "crop");
  const std::int64_t H = img.dim(0), W = img.dim(1), C = img.dim(2);
  if (oy < 0 || ox < 0 || h <= 0 || w <= 0 || oy + h > H || ox + w > W) {
    raise(Errc::ShapeMismatch, "crop window outside " + shape_str(img.shape));
  }
  Tensor out({h, w, C});
  for (int y = 0; y < h; ++y) {
    const float* src = img.ptr() + ((oy + y) * W + ox) * C;
    std::copy(src, src + w * C, out.ptr() + static_cast<std::size_t>(y) * w * C);
  }
  return out;
}

Tensor flip_image(const Tensor& img) {
  expect_image(img, "flip");
  const std::int64_t H = img.dim(0), W = img.dim(1), C = img.dim(2);
  Tensor out(img.shape);
  for (std::int64_t y = 0; y < H; ++y) {
    for (std::int64_t x = 0; x < W; ++x) {
      const float* src = img.ptr() + (y * W + (W - 1 - x)) * C;
      std::copy(src, src + C, out.ptr() + (y * W + x) * C);
    }
  }
  return out;
}

Tensor adjust_brightness(const Tensor& img, float delta) {
  expect_image(img, "brightness");
  Tensor out(img.shape);
  for (std::size_t i = 0; i < img.data.size(); ++i) out.data[i] = clamp01(img.data[i] + delta);
  return out;
}

Tensor adjust_saturation(const Tensor& img, float scale) {
  expect_image(img, "saturation");
  if (img.dim(2) != 3) raise(Errc::ShapeMismatch, "saturation needs 3 channels, got " + shape_str(img.shape));
  Tensor out(img.shape);
  const std::size_t pixels = img.data.size() / 3;
  for (std::size_t p = 0; p < pixels; ++p) {
    const float* in = img.ptr() + 3 * p;
    // Luma in double so that a gray pixel maps to itself exactly.
    const float y = static_cast<float>(0.299 * in[0] + 0.587 * in[1] + 0.114 * in[2]);
    for (int c = 0; c < 3; ++c) out.data[3 * p + c] = clamp01(y + scale * (in[c] - y));
  }
  return out;
}

int uniform_int(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

float uniform_float(std::mt19937_64& rng, float lo, float hi) {
  return std::uniform_real_distribution<float>(lo, hi)(rng);
}

bool bernoulli(std::mt19937_64& rng, double p) { return std::bernoulli_distribution(p)(rng); }

AugmentParams draw_augment(std::mt19937_64& rng, int height, int width, const AugmentRanges& r) {
  AugmentParams p;
  p.oy = uniform_int(rng, 0, height - r.crop_h);
  p.ox = uniform_int(rng, 0, width - r.crop_w);
  p.flip = bernoulli(rng, r.flip_probability);
  p.brightness = uniform_float(rng, -r.max_brightness_delta, r.max_brightness_delta);
  p.saturation = uniform_float(rng, r.saturation_lower, r.saturation_upper);
  return p;
}

Tensor apply_augment(const Tensor& img, const AugmentParams& p, const AugmentRanges& r) {
  Tensor out = crop_image(img, p.oy, p.ox, r.crop_h, r.crop_w);
  if (p.flip) out = flip_image(out);
  out = adjust_brightness(out, p.brightness);
  return adjust_saturation(out, p.saturation);
}

Tensor augment(const Tensor& img, std::mt19937_64& rng, const AugmentRanges& r) {
  expect_image(img, "augment");
  return apply_augment(img, draw_augment(rng, img.dim(0), img.dim(1), r), r);
}

}  // namespace shieldrun::tensor
