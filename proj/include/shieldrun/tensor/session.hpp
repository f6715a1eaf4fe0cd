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

#include <deque>
#include <exception>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <string>
#include <vector>

#include "shieldrun/sched/scheduler.hpp"
#include "shieldrun/tensor/exec.hpp"
#include "shieldrun/tensor/graph.hpp"
#include "shieldrun/tensor/records.hpp"

namespace shieldrun::tensor {

using Feeds = std::map<std::string, Tensor>;
using Checkpoint = std::map<std::string, Tensor>;

// Bounded FIFO of tensor tuples. Both ends block through GreenCondition, so
// green threads park in their scheduler. Elements occupy heap memory while
// queued.
class FifoQueue {
 public:
  FifoQueue(std::size_t capacity, ExecContext& ctx);
  ~FifoQueue();

  // EndOfInput once closed.
  void enqueue(std::vector<Tensor> item);
  // Waits for n elements. After close: EndOfInput, or the error the queue
  // was closed with.
  std::vector<std::vector<Tensor>> dequeue(std::size_t n);
  void close(std::exception_ptr error = nullptr);

  std::size_t size();
  std::size_t capacity() const { return capacity_; }
  bool closed();

 private:
  std::size_t capacity_;
  ExecContext& ctx_;
  std::mutex mu_;
  sched::GreenCondition not_full_;
  sched::GreenCondition not_empty_;
  std::deque<std::vector<Tensor>> items_;
  bool closed_ = false;
  std::exception_ptr error_;
};

struct SessionOptions {
  // Kernel workers; with a scheduler, threads - 1 helper green threads.
  unsigned threads = 1;
  // Defaults to null_context().
  ExecContext* ctx = nullptr;
};

class Session {
 public:
  // Validates the graph. Constants and variables carrying a "value"
  // attribute are loaded immediately.
  explicit Session(Graph graph, SessionOptions options = {});
  ~Session();
  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  const Graph& graph() const { return graph_; }
  Exec& exec() { return *exec_; }

  // Evaluates the fetched outputs ("node" or "node:i"). Only placeholders
  // can be fed. Errors: UnknownNode, MissingFeed, ShapeMismatch, NonFinite.
  std::vector<Tensor> run(const std::vector<std::string>& fetches, const Feeds& feeds = {});

  // Initializes every variable: its "value" when folded, otherwise from its
  // init attributes (truncated normal with "stddev" and "seed", "zeros").
  void run_init();
  bool initialized(const std::string& variable) const;
  Tensor variable(const std::string& name) const;
  void assign(const std::string& name, const Tensor& value);

  Checkpoint checkpoint() const;
  // UnknownNode for a name that is not a variable, ShapeMismatch on shape.
  void restore(const Checkpoint& ckpt);
  // The graph with current variable values folded in.
  Graph frozen_graph() const;

  // Source for a record_reader node.
  void bind_reader(const std::string& node, std::shared_ptr<RecordSource> source);
  // Spawns a green thread that evaluates `enqueue_node` until its reader
  // runs dry (the queue stays open, consumers block) or fails (the queue
  // is closed with the error).
  sched::Tid start_queue_runner(const std::string& enqueue_node);
  FifoQueue& queue(const std::string& name);
  // Closes the queues and joins queue runners and kernel helpers. Call
  // from the green thread that created the session.
  void shutdown();

 private:
  struct RunState;
  const Tensor& input(RunState& st, const std::string& ref);
  void eval(RunState& st, const Node& n, const Feeds& feeds);
  void eval_image(RunState& st, const Node& n);
  void train(RunState& st, const Node& n);
  std::mt19937_64& rng_for(const Node& n);
  void load_param(const std::string& name, const Tensor& value);

  Graph graph_;
  SessionOptions options_;
  std::unique_ptr<Exec> exec_;
  mutable std::mutex mu_;
  std::map<std::string, Tensor> params_;
  std::map<std::string, std::mt19937_64> rngs_;
  std::map<std::string, std::shared_ptr<RecordSource>> readers_;
  std::map<std::string, std::unique_ptr<FifoQueue>> queues_;
  std::vector<sched::Tid> runners_;
  sched::Scheduler* sched_ = nullptr;
};

// Truncated normal (redrawn beyond two standard deviations), the variable
// initializer.
Tensor truncated_normal(const Shape& shape, double stddev, std::uint64_t seed);
std::uint64_t name_seed(std::string_view name);

}  // namespace shieldrun::tensor
