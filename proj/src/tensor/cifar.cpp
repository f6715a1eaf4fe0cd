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

#include "shieldrun/tensor/cifar.hpp"

#include "shieldrun/tensor/session.hpp"

namespace shieldrun::tensor {

namespace {

class Builder {
 public:
  Builder(Graph& g, std::uint64_t seed) : g_(g), seed_(seed) {}

  std::string var(const std::string& name, Shape shape, bool weights) {
    Attrs a{{"shape", std::vector<std::int64_t>(shape.begin(), shape.end())}};
    if (weights) {
      a["init"] = std::string("truncated_normal");
      a["stddev"] = 0.05;
      a["seed"] = static_cast<std::int64_t>((name_seed(name) ^ seed_) >> 1);
    } else {
      a["init"] = std::string("zeros");
    }
    g_.add(name, OpKind::Variable, {}, std::move(a));
    vars_.push_back(name);
    return name;
  }

  std::string conv(const std::string& scope, const std::string& x, int in, int out) {
    auto w = var(scope + "/weights", {5, 5, in, out}, true);
    auto b = var(scope + "/biases", {out}, false);
    g_.add(scope + "/conv", OpKind::Conv2D, {x, w});
    g_.add(scope + "/add", OpKind::Add, {scope + "/conv", b});
    g_.add(scope, OpKind::Relu, {scope + "/add"});
    return scope;
  }

  std::string dense(const std::string& scope, const std::string& x, int in, int out, bool relu) {
    auto w = var(scope + "/weights", {in, out}, true);
    auto b = var(scope + "/biases", {out}, false);
    g_.add(scope + "/matmul", OpKind::MatMul, {x, w});
    const std::string sum = relu ? scope + "/add" : scope;
    g_.add(sum, OpKind::Add, {scope + "/matmul", b});
    if (relu) g_.add(scope, OpKind::Relu, {sum});
    return scope;
  }

  std::int64_t seed_for(const std::string& name) const {
    return static_cast<std::int64_t>((name_seed(name) ^ seed_) >> 1);
  }

  const std::vector<std::string>& vars() const { return vars_; }

 private:
  Graph& g_;
  std::uint64_t seed_;
  std::vector<std::string> vars_;
};

}  // namespace

Graph build_cifar_model(const CifarModelOptions& o) {
  Graph g;
  Builder b(g, o.seed);

  // Input pipeline.
  g.add(cifar::kReader, OpKind::RecordReader);
  std::string image;
  if (o.augment) {
    g.add("crop", OpKind::Crop, {std::string(cifar::kReader) + ":1"},
          {{"size", std::vector<std::int64_t>{24, 24}}, {"seed", b.seed_for("crop")}});
    g.add("flip", OpKind::Flip, {"crop"}, {{"probability", 0.5}, {"seed", b.seed_for("flip")}});
    g.add("brightness", OpKind::Brightness, {"flip"}, {{"max_delta", 0.25}, {"seed", b.seed_for("brightness")}});
    g.add("saturation", OpKind::Saturation, {"brightness"},
          {{"lower", 0.6}, {"upper", 1.4}, {"seed", b.seed_for("saturation")}});
    image = "saturation";
  } else {
    g.add("crop", OpKind::Crop, {std::string(cifar::kReader) + ":1"},
          {{"size", std::vector<std::int64_t>{24, 24}}, {"offset", std::vector<std::int64_t>{4, 4}}});
    image = "crop";
  }
  g.add(cifar::kEnqueue, OpKind::FifoQueue, {image, std::string(cifar::kReader) + ":0"},
        {{"queue", std::string(cifar::kQueue)}, {"action", std::string("enqueue")}, {"capacity", o.queue_capacity}});
  g.add(cifar::kDequeue, OpKind::FifoQueue, {},
        {{"queue", std::string(cifar::kQueue)}, {"action", std::string("dequeue")}, {"capacity", o.queue_capacity},
         {"batch", o.batch}});

  // Model.
  g.add(cifar::kInput, OpKind::Placeholder, {}, {{"shape", std::vector<std::int64_t>{-1, 24, 24, 3}}});
  g.add(cifar::kLabels, OpKind::Placeholder, {}, {{"shape", std::vector<std::int64_t>{-1}}});
  b.conv("conv1", cifar::kInput, 3, o.conv1);
  g.add("pool1", OpKind::MaxPool2x2, {"conv1"});
  b.conv("conv2", "pool1", o.conv1, o.conv2);
  g.add("pool2", OpKind::MaxPool2x2, {"conv2"});
  const std::int64_t flat = 6 * 6 * o.conv2;
  g.add("flatten", OpKind::Reshape, {"pool2"}, {{"shape", std::vector<std::int64_t>{-1, flat}}});
  b.dense("dense1", "flatten", static_cast<int>(flat), o.dense1, true);
  b.dense("dense2", "dense1", o.dense1, o.dense2, true);
  b.dense(cifar::kLogits, "dense2", o.dense2, 10, false);
  g.add(cifar::kProbs, OpKind::Softmax, {cifar::kLogits});
  g.add(cifar::kLoss, OpKind::SoftmaxXentLoss, {cifar::kLogits, cifar::kLabels});
  g.add(cifar::kTrainOp, OpKind::SgdApply, {cifar::kLoss}, {{"lr", o.learning_rate}, {"vars", b.vars()}});
  g.validate();
  return g;
}

std::vector<std::string> variable_names(const Graph& graph) {
  std::vector<std::string> out;
  for (const auto& n : graph.nodes()) {
    if (n.op == OpKind::Variable) out.push_back(n.name);
  }
  return out;
}

std::int64_t parameter_count(const Graph& graph, const std::string& prefix) {
  std::int64_t total = 0;
  for (const auto& n : graph.nodes()) {
    if (n.op != OpKind::Variable || n.name.rfind(prefix, 0) != 0) continue;
    const auto& s = n.get_ints("shape");
    total += num_elements(Shape(s.begin(), s.end()));
  }
  return total;
}

}  // namespace shieldrun::tensor
