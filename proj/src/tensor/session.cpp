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

#include "shieldrun/tensor/session.hpp"

#include <set>

#include "shieldrun/tensor/image.hpp"
#include "shieldrun/tensor/ops.hpp"

namespace shieldrun::tensor {

// ---------------------------------------------------------------- FifoQueue

FifoQueue::FifoQueue(std::size_t capacity, ExecContext& ctx) : capacity_(capacity), ctx_(ctx) {
  if (capacity == 0) raise(Errc::InvalidArgument, "queue capacity must be positive");
}

FifoQueue::~FifoQueue() {
  for (auto& item : items_) {
    for (auto& t : item) ctx_.release(t.addr);
  }
}

void FifoQueue::enqueue(std::vector<Tensor> item) {
  std::unique_lock lk(mu_);
  while (items_.size() >= capacity_ && !closed_) not_full_.wait(lk);
  if (closed_) raise(Errc::EndOfInput, "queue closed");
  for (auto& t : item) {
    t.addr = ctx_.allocate(t.bytes());
    touch_all(ctx_, t, true);
  }
  items_.push_back(std::move(item));
  lk.unlock();
  not_empty_.notify_all();
}

std::vector<std::vector<Tensor>> FifoQueue::dequeue(std::size_t n) {
  if (n == 0 || n > capacity_) raise(Errc::InvalidArgument, "dequeue of " + std::to_string(n) + " from a queue of capacity " + std::to_string(capacity_));
  std::unique_lock lk(mu_);
  while (items_.size() < n && !closed_) not_empty_.wait(lk);
  if (items_.size() < n) {
    if (error_) std::rethrow_exception(error_);
    raise(Errc::EndOfInput, "queue closed");
  }
  std::vector<std::vector<Tensor>> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& t : items_.front()) {
      touch_all(ctx_, t, false);
      ctx_.release(t.addr);
      t.addr = kUntracked;
    }
    out.push_back(std::move(items_.front()));
    items_.pop_front();
  }
  lk.unlock();
  not_full_.notify_all();
  return out;
}

void FifoQueue::close(std::exception_ptr error) {
  {
    std::lock_guard lk(mu_);
    if (!closed_) error_ = error;
    closed_ = true;
  }
  not_full_.notify_all();
  not_empty_.notify_all();
}

std::size_t FifoQueue::size() {
  std::lock_guard lk(mu_);
  return items_.size();
}

bool FifoQueue::closed() {
  std::lock_guard lk(mu_);
  return closed_;
}

// ------------------------------------------------------------------ helpers

std::uint64_t name_seed(std::string_view name) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : name) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

Tensor truncated_normal(const Shape& shape, double stddev, std::uint64_t seed) {
  Tensor t(shape);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, stddev);
  for (auto& v : t.data) {
    double x;
    do {
      x = dist(rng);
    } while (std::abs(x) > 2.0 * stddev);
    v = static_cast<float>(x);
  }
  return t;
}

namespace {

bool differentiable(OpKind op) {
  switch (op) {
    case OpKind::MatMul:
    case OpKind::Add:
    case OpKind::Conv2D:
    case OpKind::MaxPool2x2:
    case OpKind::Relu:
    case OpKind::Softmax:
    case OpKind::SoftmaxXentLoss:
    case OpKind::Reshape:
      return true;
    default:
      return false;
  }
}

Tensor untracked(const Tensor& t) {
  Tensor c = t;
  c.addr = kUntracked;
  return c;
}

}  // namespace

// ------------------------------------------------------------------ Session

struct Session::RunState {
  explicit RunState(Exec& e) : frame(e) {}
  Frame frame;
  std::map<std::string, std::vector<Tensor>> out;
};

Session::Session(Graph graph, SessionOptions options) : graph_(std::move(graph)), options_(options) {
  graph_.validate();
  ExecContext& ctx = options_.ctx ? *options_.ctx : null_context();
  exec_ = std::make_unique<Exec>(ctx, options_.threads);
  for (const auto& n : graph_.nodes()) {
    if (n.op == OpKind::Const) load_param(n.name, n.get_tensor("value"));
    if (n.op == OpKind::Variable && n.has("value")) load_param(n.name, n.get_tensor("value"));
    if (n.op == OpKind::FifoQueue) {
      const auto& q = n.get_string("queue");
      if (!queues_.count(q)) {
        queues_[q] = std::make_unique<FifoQueue>(static_cast<std::size_t>(n.get_int("capacity", 512)), ctx);
      }
    }
  }
  if (sched::Scheduler::in_green_thread()) {
    sched_ = sched::Scheduler::current();
    exec_->start_helpers();
  }
}

Session::~Session() {
  if (sched_ && sched::Scheduler::current() == sched_) shutdown();
  queues_.clear();
  for (auto& [name, t] : params_) exec_->ctx().release(t.addr);
}

void Session::load_param(const std::string& name, const Tensor& value) {
  ExecContext& ctx = exec_->ctx();
  std::lock_guard lk(mu_);
  auto it = params_.find(name);
  if (it != params_.end()) {
    if (it->second.shape != value.shape) ctx.release(it->second.addr);
    else {
      it->second.data = value.data;
      touch_all(ctx, it->second, true);
      return;
    }
  }
  Tensor t = untracked(value);
  t.addr = ctx.allocate(t.bytes());
  touch_all(ctx, t, true);
  params_[name] = std::move(t);
}

void Session::run_init() {
  for (const auto& n : graph_.nodes()) {
    if (n.op != OpKind::Variable) continue;
    if (n.has("value")) {
      load_param(n.name, n.get_tensor("value"));
      continue;
    }
    const Shape shape(n.get_ints("shape").begin(), n.get_ints("shape").end());
    const std::string init = n.get_string("init", "zeros");
    if (init == "zeros") {
      load_param(n.name, Tensor(shape, 0.0f));
    } else if (init == "truncated_normal") {
      const auto seed = static_cast<std::uint64_t>(n.get_int("seed", static_cast<std::int64_t>(name_seed(n.name))));
      load_param(n.name, truncated_normal(shape, n.get_float("stddev"), seed));
    } else {
      raise(Errc::InvalidArgument, n.name + ": unknown initializer '" + init + "'");
    }
  }
}

bool Session::initialized(const std::string& variable) const {
  std::lock_guard lk(mu_);
  return params_.count(variable) != 0;
}

Tensor Session::variable(const std::string& name) const {
  if (graph_.at(name).op != OpKind::Variable) raise(Errc::InvalidArgument, name + " is not a variable");
  std::lock_guard lk(mu_);
  auto it = params_.find(name);
  if (it == params_.end()) raise(Errc::InvalidArgument, "variable " + name + " is not initialized");
  return untracked(it->second);
}

void Session::assign(const std::string& name, const Tensor& value) {
  const Node& n = graph_.at(name);
  if (n.op != OpKind::Variable) raise(Errc::UnknownNode, name + " is not a variable");
  if (n.has("shape")) {
    const Shape shape(n.get_ints("shape").begin(), n.get_ints("shape").end());
    expect_shape(value, shape, "assign " + name);
  }
  load_param(name, value);
}

Checkpoint Session::checkpoint() const {
  Checkpoint ckpt;
  std::lock_guard lk(mu_);
  for (const auto& n : graph_.nodes()) {
    if (n.op != OpKind::Variable) continue;
    auto it = params_.find(n.name);
    if (it != params_.end()) ckpt[n.name] = untracked(it->second);
  }
  return ckpt;
}

void Session::restore(const Checkpoint& ckpt) {
  for (const auto& [name, value] : ckpt) {
    const Node* n = graph_.find(name);
    if (!n || n->op != OpKind::Variable) raise(Errc::UnknownNode, "checkpoint entry " + name + " is not a variable");
  }
  for (const auto& [name, value] : ckpt) assign(name, value);
}

Graph Session::frozen_graph() const {
  Graph g = graph_;
  std::lock_guard lk(mu_);
  for (const auto& n : graph_.nodes()) {
    if (n.op != OpKind::Variable) continue;
    auto it = params_.find(n.name);
    if (it != params_.end()) g.mutable_at(n.name).attrs["value"] = untracked(it->second);
  }
  return g;
}

void Session::bind_reader(const std::string& node, std::shared_ptr<RecordSource> source) {
  if (graph_.at(node).op != OpKind::RecordReader) raise(Errc::InvalidArgument, node + " is not a record_reader");
  std::lock_guard lk(mu_);
  readers_[node] = std::move(source);
}

FifoQueue& Session::queue(const std::string& name) {
  auto it = queues_.find(name);
  if (it == queues_.end()) raise(Errc::UnknownNode, "no queue named " + name);
  return *it->second;
}

sched::Tid Session::start_queue_runner(const std::string& enqueue_node) {
  const Node& n = graph_.at(enqueue_node);
  if (n.op != OpKind::FifoQueue || n.get_string("action") != "enqueue") {
    raise(Errc::InvalidArgument, enqueue_node + " is not an enqueue node");
  }
  if (!sched_ || sched::Scheduler::current() != sched_) {
    raise(Errc::SchedulerMisuse, "queue runners start from the session's green thread");
  }
  FifoQueue* q = &queue(n.get_string("queue"));
  auto tid = sched_->spawn([this, enqueue_node, q] {
    try {
      for (;;) run({enqueue_node});
    } catch (const Error& e) {
      if (e.code() != Errc::EndOfInput) q->close(std::current_exception());
    } catch (...) {
      q->close(std::current_exception());
    }
  });
  runners_.push_back(tid);
  return tid;
}

void Session::shutdown() {
  for (auto& [name, q] : queues_) q->close();
  if (sched_ && sched::Scheduler::current() == sched_) {
    for (auto tid : runners_) sched_->join(tid);
    runners_.clear();
    exec_->stop();
  }
}

std::mt19937_64& Session::rng_for(const Node& n) {
  std::lock_guard lk(mu_);
  auto it = rngs_.find(n.name);
  if (it == rngs_.end()) {
    const auto seed = static_cast<std::uint64_t>(n.get_int("seed", static_cast<std::int64_t>(name_seed(n.name))));
    it = rngs_.emplace(n.name, std::mt19937_64(seed)).first;
  }
  return it->second;
}

const Tensor& Session::input(RunState& st, const std::string& ref) {
  const NodeRef r = parse_ref(ref);
  const Node& n = graph_.at(r.node);
  if (n.op == OpKind::Const || n.op == OpKind::Variable) {
    std::lock_guard lk(mu_);
    auto it = params_.find(n.name);
    if (it == params_.end()) raise(Errc::InvalidArgument, "variable " + n.name + " is not initialized");
    return it->second;
  }
  auto it = st.out.find(r.node);
  if (it == st.out.end() || r.index >= static_cast<int>(it->second.size())) {
    raise(Errc::UnknownNode, "no value for " + ref);
  }
  return it->second[r.index];
}

std::vector<Tensor> Session::run(const std::vector<std::string>& fetches, const Feeds& feeds) {
  for (const auto& [name, t] : feeds) {
    if (graph_.at(name).op != OpKind::Placeholder) raise(Errc::InvalidArgument, "only placeholders can be fed, not " + name);
  }
  for (const auto& f : fetches) {
    const NodeRef r = parse_ref(f);
    if (r.index >= output_count(graph_.at(r.node))) raise(Errc::UnknownNode, "no output " + f);
  }
  RunState st(*exec_);
  for (const Node* n : graph_.order_for(fetches)) eval(st, *n, feeds);
  std::vector<Tensor> results;
  results.reserve(fetches.size());
  for (const auto& f : fetches) results.push_back(untracked(input(st, f)));
  return results;
}

void Session::eval(RunState& st, const Node& n, const Feeds& feeds) {
  Frame& f = st.frame;
  auto in = [&](std::size_t i) -> const Tensor& { return input(st, n.inputs.at(i)); };
  std::vector<Tensor> outs;
  switch (n.op) {
    case OpKind::Const:
    case OpKind::Variable:
      return;
    case OpKind::Placeholder: {
      auto it = feeds.find(n.name);
      if (it == feeds.end()) raise(Errc::MissingFeed, "placeholder " + n.name + " was not fed");
      if (n.has("shape")) {
        const auto& want = n.get_ints("shape");
        const Shape& got = it->second.shape;
        bool ok = want.size() == got.size();
        for (std::size_t i = 0; ok && i < want.size(); ++i) ok = want[i] == -1 || want[i] == got[i];
        if (!ok) raise(Errc::ShapeMismatch, n.name + ": fed " + shape_str(got) + " for " + shape_str(want));
      }
      Tensor t = untracked(it->second);
      f.adopt(t);
      outs.push_back(std::move(t));
      break;
    }
    case OpKind::MatMul:
      outs.push_back(ops::matmul(f, in(0), in(1)));
      break;
    case OpKind::Add:
      outs.push_back(ops::add(f, in(0), in(1)));
      break;
    case OpKind::Conv2D:
      outs.push_back(ops::conv2d(f, in(0), in(1)));
      break;
    case OpKind::MaxPool2x2:
      outs.push_back(ops::maxpool2x2(f, in(0)));
      break;
    case OpKind::Relu:
      outs.push_back(ops::relu(f, in(0)));
      break;
    case OpKind::Softmax:
      outs.push_back(ops::softmax(f, in(0)));
      break;
    case OpKind::SoftmaxXentLoss:
      outs.push_back(ops::softmax_xent(f, in(0), in(1)));
      break;
    case OpKind::Reshape:
      outs.push_back(ops::reshape(f, in(0), n.get_ints("shape")));
      break;
    case OpKind::SgdApply:
      train(st, n);
      return;
    case OpKind::Crop:
    case OpKind::Flip:
    case OpKind::Brightness:
    case OpKind::Saturation:
      eval_image(st, n);
      return;
    case OpKind::RecordReader: {
      std::shared_ptr<RecordSource> src;
      {
        std::lock_guard lk(mu_);
        auto it = readers_.find(n.name);
        if (it == readers_.end()) raise(Errc::InvalidArgument, "no source bound to " + n.name);
        src = it->second;
      }
      auto rec = src->next();
      if (!rec) raise(Errc::EndOfInput, n.name + " has no more records");
      Tensor label = f.make({1}, static_cast<float>(rec->label));
      touch_all(f.ctx(), label, true);
      Tensor img = record_image(*rec);
      f.adopt(img);
      f.ctx().compute(img.data.size());
      outs.push_back(std::move(label));
      outs.push_back(std::move(img));
      break;
    }
    case OpKind::FifoQueue: {
      FifoQueue& q = queue(n.get_string("queue"));
      if (n.get_string("action") == "enqueue") {
        std::vector<Tensor> item;
        for (std::size_t i = 0; i < n.inputs.size(); ++i) item.push_back(untracked(in(i)));
        q.enqueue(std::move(item));
        outs.push_back(f.make({1}, static_cast<float>(q.size())));
      } else if (n.get_string("action") == "dequeue") {
        auto items = q.dequeue(static_cast<std::size_t>(n.get_int("batch")));
        for (std::size_t c = 0; c < 2; ++c) {
          std::vector<const Tensor*> parts;
          for (const auto& item : items) {
            if (item.size() <= c) raise(Errc::ShapeMismatch, n.name + ": queue elements have " + std::to_string(item.size()) + " components");
            parts.push_back(&item[c]);
          }
          Tensor t = ops::stack(f, parts);
          if (t.rank() == 2 && t.dim(1) == 1) t.shape = {t.dim(0)};
          outs.push_back(std::move(t));
        }
      } else {
        raise(Errc::InvalidArgument, n.name + ": unknown queue action");
      }
      break;
    }
  }
  for (const auto& t : outs) {
    if (!t.all_finite()) raise(Errc::NonFinite, n.name + " produced a non-finite value");
  }
  st.out[n.name] = std::move(outs);
}

void Session::eval_image(RunState& st, const Node& n) {
  const Tensor& x = input(st, n.inputs.at(0));
  if (x.rank() != 3 && x.rank() != 4) raise(Errc::ShapeMismatch, n.name + ": expects an image or a batch, got " + shape_str(x.shape));
  const bool batched = x.rank() == 4;
  const std::int64_t count = batched ? x.dim(0) : 1;
  const Shape img_shape(x.shape.end() - 3, x.shape.end());
  const std::size_t per = static_cast<std::size_t>(num_elements(img_shape));
  std::vector<Tensor> results;
  for (std::int64_t i = 0; i < count; ++i) {
    Tensor img(img_shape, std::vector<float>(x.data.begin() + i * per, x.data.begin() + (i + 1) * per));
    switch (n.op) {
      case OpKind::Crop: {
        const auto& size = n.get_ints("size");
        if (size.size() != 2) raise(Errc::InvalidArgument, n.name + ": size must be [h, w]");
        int oy, ox;
        if (n.has("offset")) {
          oy = static_cast<int>(n.get_ints("offset").at(0));
          ox = static_cast<int>(n.get_ints("offset").at(1));
        } else {
          auto& rng = rng_for(n);
          oy = uniform_int(rng, 0, static_cast<int>(img.dim(0) - size[0]));
          ox = uniform_int(rng, 0, static_cast<int>(img.dim(1) - size[1]));
        }
        img = crop_image(img, oy, ox, static_cast<int>(size[0]), static_cast<int>(size[1]));
        break;
      }
      case OpKind::Flip:
        if (bernoulli(rng_for(n), n.get_float("probability", 0.5))) img = flip_image(img);
        break;
      case OpKind::Brightness: {
        float delta;
        if (n.has("delta")) {
          delta = static_cast<float>(n.get_float("delta"));
        } else {
          const float m = static_cast<float>(n.get_float("max_delta", 0.25));
          delta = uniform_float(rng_for(n), -m, m);
        }
        img = adjust_brightness(img, delta);
        break;
      }
      case OpKind::Saturation: {
        float scale;
        if (n.has("scale")) {
          scale = static_cast<float>(n.get_float("scale"));
        } else {
          scale = uniform_float(rng_for(n), static_cast<float>(n.get_float("lower", 0.6)),
                                static_cast<float>(n.get_float("upper", 1.4)));
        }
        img = adjust_saturation(img, scale);
        break;
      }
      default:
        raise(Errc::InvalidArgument, n.name + " is not an image op");
    }
    results.push_back(std::move(img));
  }
  Tensor out;
  if (batched) {
    std::vector<const Tensor*> parts;
    for (const auto& r : results) parts.push_back(&r);
    out = ops::stack(st.frame, parts);
  } else {
    out = std::move(results[0]);
    st.frame.adopt(out);
  }
  touch_all(st.frame.ctx(), x, false);
  st.frame.ctx().compute(x.data.size());
  st.out[n.name] = {std::move(out)};
}

void Session::train(RunState& st, const Node& n) {
  Frame& f = st.frame;
  const std::string& loss_ref = n.inputs.at(0);
  const float lr = static_cast<float>(n.get_float("lr"));
  const auto& vars = n.get_strings("vars");
  const std::set<std::string> var_set(vars.begin(), vars.end());
  const auto order = graph_.order_for({loss_ref});

  std::map<const Node*, bool> needs;
  for (const Node* m : order) {
    bool need = false;
    if (m->op == OpKind::Variable) {
      need = var_set.count(m->name) != 0;
    } else if (differentiable(m->op)) {
      for (std::size_t i = 0; i < m->inputs.size(); ++i) {
        if (m->op == OpKind::SoftmaxXentLoss && i == 1) continue;
        need = need || needs[&graph_.at(parse_ref(m->inputs[i]).node)];
      }
    }
    needs[m] = need;
  }
  auto needs_input = [&](const Node& m, std::size_t i) { return needs[&graph_.at(parse_ref(m.inputs[i]).node)]; };

  std::map<std::string, Tensor> grads;
  auto accumulate = [&](const std::string& ref, Tensor g) {
    const std::string k = ref_key(parse_ref(ref));
    auto it = grads.find(k);
    if (it == grads.end()) grads.emplace(k, std::move(g));
    else it->second = ops::add(f, it->second, g);
  };
  {
    Tensor seed = f.make({1}, 1.0f);
    grads.emplace(ref_key(parse_ref(loss_ref)), std::move(seed));
  }

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const Node& m = **it;
    if (!needs[&m] || m.op == OpKind::Variable) continue;
    auto git = grads.find(m.name + ":0");
    if (git == grads.end()) continue;
    const Tensor& dy = git->second;
    auto in = [&](std::size_t i) -> const Tensor& { return input(st, m.inputs.at(i)); };
    const bool n0 = needs_input(m, 0);
    const bool n1 = m.inputs.size() > 1 && needs_input(m, 1);
    switch (m.op) {
      case OpKind::MatMul: {
        Tensor da, db;
        ops::matmul_backward(f, in(0), in(1), dy, n0 ? &da : nullptr, n1 ? &db : nullptr, m.name);
        if (n0) accumulate(m.inputs[0], std::move(da));
        if (n1) accumulate(m.inputs[1], std::move(db));
        break;
      }
      case OpKind::Add: {
        Tensor da, db;
        ops::add_backward(f, in(0), in(1), dy, n0 ? &da : nullptr, n1 ? &db : nullptr);
        if (n0) accumulate(m.inputs[0], std::move(da));
        if (n1) accumulate(m.inputs[1], std::move(db));
        break;
      }
      case OpKind::Conv2D: {
        Tensor dx, dw;
        ops::conv2d_backward(f, in(0), in(1), dy, n0 ? &dx : nullptr, n1 ? &dw : nullptr, m.name);
        if (n0) accumulate(m.inputs[0], std::move(dx));
        if (n1) accumulate(m.inputs[1], std::move(dw));
        break;
      }
      case OpKind::MaxPool2x2:
        accumulate(m.inputs[0], ops::maxpool2x2_backward(f, in(0), dy));
        break;
      case OpKind::Relu:
        accumulate(m.inputs[0], ops::relu_backward(f, st.out.at(m.name)[0], dy));
        break;
      case OpKind::Softmax:
        accumulate(m.inputs[0], ops::softmax_backward(f, st.out.at(m.name)[0], dy));
        break;
      case OpKind::SoftmaxXentLoss:
        accumulate(m.inputs[0], ops::softmax_xent_backward(f, in(0), in(1), dy));
        break;
      case OpKind::Reshape: {
        Tensor dx = f.make(in(0).shape);
        dx.data = dy.data;
        touch_all(f.ctx(), dy, false);
        touch_all(f.ctx(), dx, true);
        accumulate(m.inputs[0], std::move(dx));
        break;
      }
      default:
        break;
    }
  }

  for (const auto& v : vars) {
    auto git = grads.find(v + ":0");
    if (git == grads.end()) continue;
    if (!git->second.all_finite()) raise(Errc::NonFinite, "gradient of " + v + " is not finite");
    Tensor* var;
    {
      std::lock_guard lk(mu_);
      auto pit = params_.find(v);
      if (pit == params_.end()) raise(Errc::InvalidArgument, "variable " + v + " is not initialized");
      var = &pit->second;
    }
    ops::sgd_update(f, *var, git->second, lr);
    if (!var->all_finite()) raise(Errc::NonFinite, "update of " + v + " is not finite");
  }
  Tensor loss = f.make({1});
  loss.data = input(st, loss_ref).data;
  st.out[n.name] = {std::move(loss)};
}

}  // namespace shieldrun::tensor
