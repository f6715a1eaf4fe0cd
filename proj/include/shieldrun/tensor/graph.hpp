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
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "shieldrun/tensor/tensor.hpp"

namespace shieldrun::tensor {

enum class OpKind : std::uint8_t {
  Const,
  Variable,
  Placeholder,
  MatMul,
  Add,
  Conv2D,
  MaxPool2x2,
  Relu,
  Softmax,
  SoftmaxXentLoss,
  SgdApply,
  Reshape,
  Crop,
  Flip,
  Brightness,
  Saturation,
  RecordReader,
  FifoQueue,
};

std::string_view to_string(OpKind op);
// InvalidArgument for an unknown name.
OpKind parse_op(std::string_view name);

using AttrValue = std::variant<std::int64_t, double, std::string, std::vector<std::int64_t>,
                               std::vector<std::string>, Tensor>;
using Attrs = std::map<std::string, AttrValue>;

struct Node {
  std::string name;
  OpKind op = OpKind::Const;
  // "node" or "node:i" for the i-th output of a multi-output node.
  std::vector<std::string> inputs;
  Attrs attrs;

  bool has(const std::string& key) const { return attrs.count(key) != 0; }
  // Typed lookups raise InvalidArgument when the key is missing or has
  // another type. An int attribute is accepted where a float is asked for.
  std::int64_t get_int(const std::string& key) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  double get_float(const std::string& key) const;
  double get_float(const std::string& key, double fallback) const;
  const std::string& get_string(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  const std::vector<std::int64_t>& get_ints(const std::string& key) const;
  const std::vector<std::string>& get_strings(const std::string& key) const;
  const Tensor& get_tensor(const std::string& key) const;

  bool operator==(const Node&) const = default;
};

// Outputs of a node: two for record_reader (label, image) and for a
// dequeueing fifo_queue (images, labels), one otherwise.
int output_count(const Node& node);

struct NodeRef {
  std::string node;
  int index = 0;
};
NodeRef parse_ref(std::string_view ref);
std::string ref_key(const NodeRef& ref);

class Graph {
 public:
  // InvalidArgument on a duplicate name.
  Node& add(Node node);
  Node& add(std::string name, OpKind op, std::vector<std::string> inputs = {}, Attrs attrs = {});

  const std::vector<Node>& nodes() const { return nodes_; }
  const Node* find(std::string_view name) const;
  // UnknownNode when absent.
  const Node& at(std::string_view name) const;
  Node& mutable_at(std::string_view name);
  bool contains(std::string_view name) const { return find(name) != nullptr; }

  // Every input resolves to an existing output (UnknownNode), arities match
  // the op (InvalidArgument) and the graph is acyclic (InvalidArgument).
  void validate() const;

  // The nodes needed to produce `fetches`, each after its inputs. The order
  // follows input order depth first, so it does not depend on the order in
  // which nodes were added.
  std::vector<const Node*> order_for(const std::vector<std::string>& fetches) const;

  // Node-set equality, insensitive to insertion order.
  bool operator==(const Graph& other) const;

 private:
  std::vector<Node> nodes_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

}  // namespace shieldrun::tensor
