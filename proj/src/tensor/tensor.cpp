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

#include "shieldrun/tensor/tensor.hpp"

#include <cmath>
#include <cstring>

namespace shieldrun::tensor {

std::int64_t num_elements(const Shape& shape) {
  std::int64_t n = 1;
  for (auto d : shape) {
    if (d <= 0) raise(Errc::ShapeMismatch, "dimensions must be positive, got " + shape_str(shape));
    n *= d;
  }
  return n;
}

std::string shape_str(const Shape& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + ")";
}

Tensor::Tensor(Shape s, float fill) : shape(std::move(s)) {
  data.assign(static_cast<std::size_t>(num_elements(shape)), fill);
}

Tensor::Tensor(Shape s, std::vector<float> values) : shape(std::move(s)), data(std::move(values)) {
  if (static_cast<std::int64_t>(data.size()) != num_elements(shape)) {
    raise(Errc::ShapeMismatch, std::to_string(data.size()) + " values for shape " + shape_str(shape));
  }
}

bool Tensor::same_as(const Tensor& other) const {
  return shape == other.shape && data.size() == other.data.size() &&
         (data.empty() || std::memcmp(data.data(), other.data.data(), bytes()) == 0);
}

bool Tensor::all_finite() const {
  for (float v : data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void expect_shape(const Tensor& t, const Shape& shape, const std::string& what) {
  if (t.shape != shape) {
    raise(Errc::ShapeMismatch, what + ": expected " + shape_str(shape) + ", got " + shape_str(t.shape));
  }
}

}  // namespace shieldrun::tensor
