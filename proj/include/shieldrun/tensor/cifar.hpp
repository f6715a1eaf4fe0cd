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

#include "shieldrun/tensor/graph.hpp"

namespace shieldrun::tensor {

// Interface names of the model graph.
namespace cifar {
inline constexpr const char* kInput = "input";        // (B,24,24,3) placeholder
inline constexpr const char* kLabels = "labels";      // (B) placeholder, class ids
inline constexpr const char* kLogits = "logits";
inline constexpr const char* kProbs = "probs";
inline constexpr const char* kLoss = "loss";
inline constexpr const char* kTrainOp = "train_op";
inline constexpr const char* kReader = "reader";
inline constexpr const char* kEnqueue = "enqueue";
inline constexpr const char* kDequeue = "dequeue";    // :0 images, :1 labels
inline constexpr const char* kQueue = "input_queue";
}  // namespace cifar

struct CifarModelOptions {
  std::int64_t batch = 128;
  double learning_rate = 0.05;
  // Random crop, flip, brightness and saturation; otherwise a center crop.
  bool augment = true;
  std::uint64_t seed = 0;
  std::int64_t queue_capacity = 512;
  int conv1 = 64;
  int conv2 = 64;
  int dense1 = 384;
  int dense2 = 192;
};

// conv 5x5 + relu + maxpool, twice, then dense + relu, dense + relu, dense
// to ten logits with a softmax head and a cross-entropy loss trained by
// sgd_apply. The input pipeline reads records, preprocesses them and feeds
// a FIFO queue; the training loop dequeues batches and feeds them to the
// input placeholders.
Graph build_cifar_model(const CifarModelOptions& options = {});

std::vector<std::string> variable_names(const Graph& graph);
std::int64_t parameter_count(const Graph& graph, const std::string& prefix = "");

}  // namespace shieldrun::tensor
