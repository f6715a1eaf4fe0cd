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
#include <vector>

#include "shieldrun/tensor/exec.hpp"
#include "shieldrun/tensor/tensor.hpp"

namespace shieldrun::tensor::ops {

// Kernels allocate their results in the frame and report one trace per
// sample (leading dimension): the sample's input and output slices plus
// every shared operand such as weights and worker scratch, as an executor
// that processes one sample at a time would touch them. Backward functions
// fill only the gradients whose pointer is non-null. `key` names the
// per-worker partial gradient buffers.

// a (M,K) x b (K,N) -> (M,N)
Tensor matmul(Frame& f, const Tensor& a, const Tensor& b);
void matmul_backward(Frame& f, const Tensor& a, const Tensor& b, const Tensor& dy, Tensor* da,
                     Tensor* db, const std::string& key = "matmul");

// Same shapes, or b equal to the trailing dimensions of a (bias).
Tensor add(Frame& f, const Tensor& a, const Tensor& b);
void add_backward(Frame& f, const Tensor& a, const Tensor& b, const Tensor& dy, Tensor* da, Tensor* db);

// x (N,H,W,C), w (KH,KW,C,O) -> (N,H,W,O); stride 1, SAME zero padding.
Tensor conv2d(Frame& f, const Tensor& x, const Tensor& w);
void conv2d_backward(Frame& f, const Tensor& x, const Tensor& w, const Tensor& dy, Tensor* dx,
                     Tensor* dw, const std::string& key = "conv2d");

// x (N,H,W,C) with even H and W -> (N,H/2,W/2,C). The gradient goes to the
// first maximum of each window in row-major order.
Tensor maxpool2x2(Frame& f, const Tensor& x);
Tensor maxpool2x2_backward(Frame& f, const Tensor& x, const Tensor& dy);

Tensor relu(Frame& f, const Tensor& x);
Tensor relu_backward(Frame& f, const Tensor& y, const Tensor& dy);

// Row-wise over (B,C).
Tensor softmax(Frame& f, const Tensor& x);
Tensor softmax_backward(Frame& f, const Tensor& y, const Tensor& dy);

// Mean cross-entropy of softmax(logits (B,C)) against class ids (B) stored
// as floats; returns shape {1}. LabelOutOfRange for ids outside [0, C).
Tensor softmax_xent(Frame& f, const Tensor& logits, const Tensor& labels);
Tensor softmax_xent_backward(Frame& f, const Tensor& logits, const Tensor& labels, const Tensor& dloss);

// One dimension may be -1.
Shape resolve_shape(const Shape& x, const std::vector<std::int64_t>& spec);
Tensor reshape(Frame& f, const Tensor& x, const std::vector<std::int64_t>& spec);

// var -= lr * grad
void sgd_update(Frame& f, Tensor& var, const Tensor& grad, float lr);

// Stacks equally shaped tensors along a new leading dimension.
Tensor stack(Frame& f, const std::vector<const Tensor*>& items);

}  // namespace shieldrun::tensor::ops
