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
#include <initializer_list>
#include <string>
#include <vector>

#include "shieldrun/common/error.hpp"

namespace shieldrun::tensor {

using Shape = std::vector<std::int64_t>;

std::int64_t num_elements(const Shape& shape);
std::string shape_str(const Shape& shape);

inline constexpr std::uint64_t kUntracked = ~std::uint64_t{0};

// Row-major float32 array. `addr` is where the value lives in the
// simulated enclave heap; it takes no part in equality.
struct Tensor {
  Shape shape;
  std::vector<float> data;
  std::uint64_t addr = kUntracked;

  Tensor() = default;
  explicit Tensor(Shape s, float fill = 0.0f);
  Tensor(Shape s, std::vector<float> values);  // ShapeMismatch on a size mismatch
  static Tensor scalar(float v) { return Tensor({1}, {v}); }

  std::int64_t size() const { return static_cast<std::int64_t>(data.size()); }
  std::int64_t dim(std::size_t i) const { return shape.at(i); }
  std::size_t rank() const { return shape.size(); }
  std::uint64_t bytes() const { return data.size() * sizeof(float); }
  float* ptr() { return data.data(); }
  const float* ptr() const { return data.data(); }

  // Bitwise equality of shape and values.
  bool same_as(const Tensor& other) const;
  bool all_finite() const;

  friend bool operator==(const Tensor& a, const Tensor& b) { return a.same_as(b); }
};

// Raises ShapeMismatch with `what` when the shapes differ.
void expect_shape(const Tensor& t, const Shape& shape, const std::string& what);

}  // namespace shieldrun::tensor
