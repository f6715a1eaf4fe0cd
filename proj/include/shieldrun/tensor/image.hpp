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

#include <random>

#include "shieldrun/tensor/tensor.hpp"

namespace shieldrun::tensor {

// Single images are (H,W,C) with values in [0,1].
Tensor crop_image(const Tensor& img, int oy, int ox, int h, int w);
// Mirrors left and right.
Tensor flip_image(const Tensor& img);
// clamp(x + delta, 0, 1)
Tensor adjust_brightness(const Tensor& img, float delta);
// Per pixel Y = 0.299 R + 0.587 G + 0.114 B, out = clamp(Y + scale (p - Y), 0, 1).
// Needs three channels.
Tensor adjust_saturation(const Tensor& img, float scale);

struct AugmentRanges {
  int crop_h = 24;
  int crop_w = 24;
  double flip_probability = 0.5;
  float max_brightness_delta = 0.25f;
  float saturation_lower = 0.6f;
  float saturation_upper = 1.4f;
};

struct AugmentParams {
  int oy = 0;
  int ox = 0;
  bool flip = false;
  float brightness = 0.0f;
  float saturation = 1.0f;
};

// Draws in a fixed order: origin y, origin x, flip, brightness, saturation.
AugmentParams draw_augment(std::mt19937_64& rng, int height, int width, const AugmentRanges& r = {});
// crop, flip, brightness, saturation
Tensor apply_augment(const Tensor& img, const AugmentParams& p, const AugmentRanges& r = {});
Tensor augment(const Tensor& img, std::mt19937_64& rng, const AugmentRanges& r = {});

// Uniform draws shared with the graph ops so both follow one convention.
int uniform_int(std::mt19937_64& rng, int lo, int hi);  // inclusive
float uniform_float(std::mt19937_64& rng, float lo, float hi);
bool bernoulli(std::mt19937_64& rng, double p);

}  // namespace shieldrun::tensor
