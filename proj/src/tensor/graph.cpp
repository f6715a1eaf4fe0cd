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

#include "shieldrun/tensor/graph.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <functional>

namespace shieldrun::tensor {

namespace {

constexpr std::array<std::string_view, 18> kOpNames = {
    "const",   "variable", "placeholder",       "matmul",    "add",  "conv2d",
    "maxpool2x2", "relu",  "softmax",           "softmax_xent_loss", "sgd_apply", "reshape",
    "crop",    "flip",     "brightness",        "saturation", "record_reader", "fifo_queue",
};

template <typename T>
const T& typed(const Node& n, const std::string& key, const char* type) {
  auto it = n.attrs.find(key);
  if (it == n.attrs.end()) raise(Errc::InvalidArgument, n.name + ": missing attribute '" + key + "'");
  const T* v = std::get_if<T>(&it->second);
  if (!v) raise(Errc::InvalidArgument, n.name + ": attribute '" + key + "' is not " + type);
  return *v;
}

}  // namespace

std::string_view to_string(OpKind op) { return kOpNames.at(static_cast<std::size_t>(op)); }

OpKind parse_op(std::string_view name) {
  for (std::size_t i = 0; i < kOpNames.size(); ++i) {
    if (kOpNames[i] == name) return static_cast<OpKind>(i);
  }
  raise(Errc::InvalidArgument, "unknown op '" + std::string(name) + "'");
}

std::int64_t Node::get_int(const std::string& key) const {
  return typed<std::int64_t>(*this, key, "an int");
}

std::int64_t Node::get_int(const std::string& key, std::int64_t fallback) const {
  return has(key) ? get_int(key) : fallback;
}

double Node::get_float(const std::string& key) const {
  auto it = attrs.find(key);
  if (it != attrs.end()) {
    if (auto* i = std::get_if<std::int64_t>(&it->second)) return static_cast<double>(*i);
  }
  return typed<double>(*this, key, "a float");
}

double Node::get_float(const std::string& key, double fallback) const {
  return has(key) ? get_float(key) : fallback;
}

const std::string& Node::get_string(const std::string& key) const {
  return typed<std::string>(*this, key, "a string");
}

std::string Node::get_string(const std::string& key, const std::string& fallback) const {
  return has(key) ? get_string(key) : fallback;
}

const std::vector<std::int64_t>& Node::get_ints(const std::string& key) const {
  return typed<std::vector<std::int64_t>>(*this, key, "an int list");
}

const std::vector<std::string>& Node::get_strings(const std::string& key) const {
  return typed<std::vector<std::string>>(*this, key, "a string list");
}

const Tensor& Node::get_tensor(const std::string& key) const {
  return typed<Tensor>(*this, key, "a tensor");
}

int output_count(const Node& node) {
  if (node.op == OpKind::RecordReader) return 2;
  if (node.op == OpKind::FifoQueue && node.get_string("action", "") == "dequeue") return 2;
  return 1;
}

NodeRef parse_ref(std::string_view ref) {
  auto colon = ref.rfind(':');
  if (colon == std::string_view::npos) return {std::string(ref), 0};
  NodeRef r{std::string(ref.substr(0, colon)), 0};
  auto digits = ref.substr(colon + 1);
  auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), r.index);
  if (ec != std::errc() || p != digits.data() + digits.size() || digits.empty() || r.index < 0) {
    raise(Errc::UnknownNode, "bad node reference '" + std::string(ref) + "'");
  }
  return r;
}

std::string ref_key(const NodeRef& ref) { return ref.node + ":" + std::to_string(ref.index); }

Node& Graph::add(Node node) {
  if (node.name.empty() || node.name.find(':') != std::string::npos) {
    raise(Errc::InvalidArgument, "invalid node name '" + node.name + "'");
  }
  if (index_.count(node.name)) raise(Errc::InvalidArgument, "duplicate node '" + node.name + "'");
  index_.emplace(node.name, nodes_.size());
  nodes_.push_back(std::move(node));
  return nodes_.back();
}

Node& Graph::add(std::string name, OpKind op, std::vector<std::string> inputs, Attrs attrs) {
  return add(Node{std::move(name), op, std::move(inputs), std::move(attrs)});
}

const Node* Graph::find(std::string_view name) const {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : &nodes_[it->second];
}

const Node& Graph::at(std::string_view name) const {
  const Node* n = find(name);
  if (!n) raise(Errc::UnknownNode, "no node named '" + std::string(name) + "'");
  return *n;
}

Node& Graph::mutable_at(std::string_view name) { return const_cast<Node&>(at(name)); }

void Graph::validate() const {
  for (const auto& n : nodes_) {
    std::size_t want;
    bool exact = true;
    switch (n.op) {
      case OpKind::Const:
      case OpKind::Variable:
      case OpKind::Placeholder:
      case OpKind::RecordReader:
        want = 0;
        break;
      case OpKind::MatMul:
      case OpKind::Add:
      case OpKind::Conv2D:
      case OpKind::SoftmaxXentLoss:
        want = 2;
        break;
      case OpKind::FifoQueue:
        want = n.get_string("action") == "enqueue" ? 1 : 0;
        exact = want == 0;
        break;
      default:
        want = 1;
    }
    if (exact ? n.inputs.size() != want : n.inputs.size() < want) {
      raise(Errc::InvalidArgument, n.name + ": " + std::string(to_string(n.op)) + " takes " +
                                       std::to_string(want) + " inputs, got " +
                                       std::to_string(n.inputs.size()));
    }
    for (const auto& in : n.inputs) {
      NodeRef r = parse_ref(in);
      const Node& src = at(r.node);
      if (r.index >= output_count(src)) raise(Errc::UnknownNode, n.name + ": no output " + in);
    }
    if (n.op == OpKind::SgdApply) {
      for (const auto& v : n.get_strings("vars")) {
        if (at(v).op != OpKind::Variable) raise(Errc::InvalidArgument, n.name + ": " + v + " is not a variable");
      }
    }
  }
  std::vector<std::string> all;
  for (const auto& n : nodes_) all.push_back(n.name);
  order_for(all);
}

std::vector<const Node*> Graph::order_for(const std::vector<std::string>& fetches) const {
  // 0 unvisited, 1 on the stack, 2 done
  std::map<const Node*, int> state;
  std::vector<const Node*> out;
  std::function<void(const Node*)> visit = [&](const Node* n) {
    int& s = state[n];
    if (s == 2) return;
    if (s == 1) raise(Errc::InvalidArgument, "cycle through node '" + n->name + "'");
    s = 1;
    for (const auto& in : n->inputs) visit(&at(parse_ref(in).node));
    state[n] = 2;
    out.push_back(n);
  };
  for (const auto& f : fetches) visit(&at(parse_ref(f).node));
  return out;
}

bool Graph::operator==(const Graph& other) const {
  if (nodes_.size() != other.nodes_.size()) return false;
  for (const auto& n : nodes_) {
    const Node* m = other.find(n.name);
    if (!m || !(*m == n)) return false;
  }
  return true;
}

}  // namespace shieldrun::tensor
