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

#include <cmath>
#include <functional>
#include <numeric>
#include <random>

#include "doctest.h"
#include "shieldrun/enclave/enclave.hpp"
#include "shieldrun/fs/shield.hpp"
#include "shieldrun/runtime/bridge_io.hpp"
#include "shieldrun/runtime/runtime.hpp"
#include "shieldrun/tensor/cifar.hpp"
#include "shieldrun/tensor/gemm.hpp"
#include "shieldrun/tensor/image.hpp"
#include "shieldrun/tensor/ops.hpp"
#include "shieldrun/tensor/records.hpp"
#include "shieldrun/tensor/serialize.hpp"
#include "shieldrun/tensor/session.hpp"
#include "ml_checks.hpp"
#include "test_util.hpp"

using namespace shieldrun;
using namespace shieldrun::tensor;
using namespace testutil;

constexpr int kShapes = 50;
constexpr double kGradTol = 1e-2;

TEST_CASE("run examples: identity matmul, symmetric softmax, maxpool, perfect prediction") {
  Graph g;
  g.add("i2", OpKind::Const, {}, {{"value", Tensor({2, 2}, {1, 0, 0, 1})}});
  g.add("a", OpKind::Placeholder, {}, {{"shape", std::vector<std::int64_t>{2, 2}}});
  g.add("mm", OpKind::MatMul, {"i2", "a"});
  g.add("z", OpKind::Placeholder);
  g.add("sm", OpKind::Softmax, {"z"});
  g.add("img", OpKind::Placeholder);
  g.add("pool", OpKind::MaxPool2x2, {"img"});
  g.add("logits", OpKind::Placeholder);
  g.add("labels", OpKind::Placeholder);
  g.add("xent", OpKind::SoftmaxXentLoss, {"logits", "labels"});
  Session s(g);

  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor a = random_tensor(rng, {2, 2}, -100.0f, 100.0f);
    CHECK(s.run({"mm"}, {{"a", a}})[0].same_as(a));
  }
  auto sm = s.run({"sm"}, {{"z", Tensor({1, 2}, {0.0f, 0.0f})}})[0];
  CHECK(sm.data == std::vector<float>{0.5f, 0.5f});
  auto pooled = s.run({"pool"}, {{"img", Tensor({1, 2, 2, 1}, {1, 2, 3, 4})}})[0];
  CHECK(pooled.shape == Shape{1, 1, 1, 1});
  CHECK(pooled.data[0] == 4.0f);
  auto loss = s.run({"xent"}, {{"logits", Tensor({2, 3}, {100, 0, 0, 0, 0, 100})}, {"labels", Tensor({2}, {0, 2})}})[0];
  CHECK(loss.shape == Shape{1});
  CHECK(loss.data[0] >= 0.0f);
  CHECK(loss.data[0] < 1e-6f);
}

TEST_CASE("sgemm matches the reference on random shapes and transposes") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const int M = pick(rng, 1, 70), N = pick(rng, 1, 80), K = pick(rng, 1, 300);
    const bool ta = rng() & 1, tb = rng() & 1;
    const float beta = (rng() & 1) ? 1.0f : 0.0f;
    Tensor A = random_tensor(rng, {M * K}), B = random_tensor(rng, {K * N}), C0 = random_tensor(rng, {M * N});
    Tensor C = C0, R = C0;
    sgemm(ta, tb, M, N, K, A.ptr(), ta ? M : K, B.ptr(), tb ? K : N, beta, C.ptr(), N);
    sgemm_reference(ta, tb, M, N, K, A.ptr(), ta ? M : K, B.ptr(), tb ? K : N, beta, R.ptr(), N);
    double worst = 0.0;
    for (int i = 0; i < M * N; ++i) worst = std::max(worst, std::abs(double(C.data[i]) - R.data[i]) / (1.0 + std::abs(R.data[i])));
    REQUIRE(worst < 1e-4);
  }
}

TEST_CASE("analytic gradients match central differences on random shapes") {
  for (const auto& r : check_op_gradients(3, kShapes)) {
    INFO(r.op);
    CHECK(r.shapes == kShapes);
    CHECK(r.worst < kGradTol);
  }
}

TEST_CASE("softmax rows sum to one and cross-entropy is non-negative") {
  std::mt19937_64 rng(4);
  Exec ex;
  for (int t = 0; t < 200; ++t) {
    Frame f(ex);
    const auto B = pick(rng, 1, 16), C = pick(rng, 2, 32);
    const float scale = std::pow(10.0f, static_cast<float>(pick(rng, -2, 2)));
    Tensor x = random_tensor(rng, {B, C}, -scale, scale);
    Tensor y = ops::softmax(f, x);
    for (std::int64_t r = 0; r < B; ++r) {
      double sum = 0.0;
      for (std::int64_t c = 0; c < C; ++c) sum += y.data[r * C + c];
      REQUIRE(std::abs(sum - 1.0) <= 1e-6);
    }
    Tensor labels({B});
    for (auto& v : labels.data) v = static_cast<float>(pick(rng, 0, C - 1));
    CHECK(ops::softmax_xent(f, x, labels).data[0] >= 0.0f);
  }
  Frame f(ex);
  CHECK(code_of([&] { ops::softmax_xent(f, Tensor({1, 3}), Tensor({1}, {3.0f})); }) == Errc::LabelOutOfRange);
  CHECK(code_of([&] { ops::softmax_xent(f, Tensor({1, 3}), Tensor({1}, {0.5f})); }) == Errc::LabelOutOfRange);
}

TEST_CASE("dense+softmax separates a linearly separable two-class set") {
  CHECK(separable_training_accuracy(5, 200, 0.1) > 0.95);
}

TEST_CASE("loss does not increase on a fixed batch with a small learning rate") {
  CifarModelOptions o;
  o.batch = 8;
  o.learning_rate = 1e-3;
  Session s(build_cifar_model(o));
  s.run_init();
  std::mt19937_64 rng(6);
  Tensor x = random_tensor(rng, {8, 24, 24, 3}, 0.0f, 1.0f);
  Tensor y({8});
  for (int i = 0; i < 8; ++i) y.data[i] = static_cast<float>(i % 10);
  float prev = std::numeric_limits<float>::infinity();
  for (int step = 0; step < 20; ++step) {
    float loss = s.run({cifar::kTrainOp}, {{cifar::kInput, x}, {cifar::kLabels, y}})[0].data[0];
    CHECK(std::isfinite(loss));
    CHECK(loss <= prev + 1e-6f);
    prev = loss;
  }
}

TEST_CASE("cifar model: interface, parameter count, uniform head, output shape") {
  Graph g = build_cifar_model();
  for (const char* name : {cifar::kInput, cifar::kLabels, cifar::kLoss, cifar::kTrainOp, cifar::kLogits,
                           cifar::kEnqueue, cifar::kDequeue}) {
    CHECK(g.contains(name));
  }
  CHECK(parameter_count(g, "dense") + parameter_count(g, "logits") ==
        2304 * 384 + 384 * 192 + 192 * 10 + 384 + 192 + 10);
  CHECK(parameter_count(g, "conv") == 5 * 5 * 3 * 64 + 64 + 5 * 5 * 64 * 64 + 64);

  Session s(g);
  for (const auto& v : variable_names(g)) {
    const auto& shape = g.at(v).get_ints("shape");
    s.assign(v, Tensor(Shape(shape.begin(), shape.end()), 0.0f));
  }
  auto probs = s.run({cifar::kProbs}, {{cifar::kInput, Tensor({128, 24, 24, 3}, 0.0f)}})[0];
  CHECK(probs.shape == Shape{128, 10});
  for (float p : probs.data) CHECK(std::abs(p - 0.1f) < 1e-6f);
  s.run_init();
  CHECK(s.run({cifar::kLogits}, {{cifar::kInput, Tensor({128, 24, 24, 3}, 0.5f)}})[0].shape == Shape{128, 10});
}

TEST_CASE("augment: deterministic, exact crop, gray fixed point, ranges") {
  std::mt19937_64 rng(7);
  Tensor img = random_tensor(rng, {32, 32, 3}, 0.0f, 1.0f);
  std::mt19937_64 a(42), b(42);
  for (int i = 0; i < 10; ++i) CHECK(augment(img, a).same_as(augment(img, b)));

  Tensor plain = crop_image(img, 0, 0, 24, 24);
  REQUIRE(plain.shape == Shape{24, 24, 3});
  bool exact = true;
  for (int y = 0; y < 24; ++y)
    for (int x = 0; x < 24; ++x)
      for (int c = 0; c < 3; ++c) exact = exact && plain.data[(y * 24 + x) * 3 + c] == img.data[(y * 32 + x) * 3 + c];
  CHECK(exact);

  for (int t = 0; t < 500; ++t) {
    Tensor gray({32, 32, 3});
    for (int p = 0; p < 32 * 32; ++p) {
      const float v = std::uniform_real_distribution<float>(0.0f, 1.0f)(rng);
      for (int c = 0; c < 3; ++c) gray.data[p * 3 + c] = v;
    }
    const float scale = std::uniform_real_distribution<float>(0.0f, 3.0f)(rng);
    REQUIRE(adjust_saturation(gray, scale).same_as(gray));
  }

  for (int t = 0; t < 1000; ++t) {
    auto p = draw_augment(rng, 32, 32);
    REQUIRE((p.oy >= 0 && p.oy <= 8 && p.ox >= 0 && p.ox <= 8));
    REQUIRE(std::abs(p.brightness) <= 0.25f);
    REQUIRE((p.saturation >= 0.6f && p.saturation <= 1.4f));
  }
  Tensor bright = adjust_brightness(img, 0.25f);
  for (float v : bright.data) REQUIRE((v >= 0.0f && v <= 1.0f));
}

TEST_CASE("graph validation and session errors") {
  Graph g;
  g.add("x", OpKind::Placeholder, {}, {{"shape", std::vector<std::int64_t>{-1, 2}}});
  g.add("r", OpKind::Relu, {"x"});
  CHECK(code_of([&] { g.add("r", OpKind::Relu, {"x"}); }) == Errc::InvalidArgument);
  Session s(g);
  CHECK(code_of([&] { s.run({"nope"}); }) == Errc::UnknownNode);
  CHECK(code_of([&] { s.run({"r:1"}, {{"x", Tensor({1, 2})}}); }) == Errc::UnknownNode);
  CHECK(code_of([&] { s.run({"r"}); }) == Errc::MissingFeed);
  CHECK(code_of([&] { s.run({"r"}, {{"x", Tensor({1, 3})}}); }) == Errc::ShapeMismatch);
  CHECK(code_of([&] { s.run({"r"}, {{"x", Tensor({1, 2}, {1.0f, NAN})}}); }) == Errc::NonFinite);
  CHECK(code_of([&] { s.run({"r"}, {{"r", Tensor({1, 2})}}); }) == Errc::InvalidArgument);

  Graph bad;
  bad.add("a", OpKind::Relu, {"b"});
  bad.add("b", OpKind::Relu, {"a"});
  CHECK(code_of([&] { Session s2(bad); }) == Errc::InvalidArgument);
  Graph dangling;
  dangling.add("a", OpKind::Relu, {"ghost"});
  CHECK(code_of([&] { Session s3(dangling); }) == Errc::UnknownNode);

  Graph mm;
  mm.add("a", OpKind::Placeholder);
  mm.add("b", OpKind::Placeholder);
  mm.add("c", OpKind::MatMul, {"a", "b"});
  Session s4(mm);
  CHECK(code_of([&] { s4.run({"c"}, {{"a", Tensor({2, 3})}, {"b", Tensor({2, 3})}}); }) == Errc::ShapeMismatch);
  CHECK(code_of([] { Tensor({2, 0}); }) == Errc::ShapeMismatch);
}

TEST_CASE("results do not depend on node insertion order") {
  CifarModelOptions o;
  o.batch = 4;
  Graph g = build_cifar_model(o);
  Graph reversed;
  for (auto it = g.nodes().rbegin(); it != g.nodes().rend(); ++it) reversed.add(*it);
  CHECK(reversed == g);
  Session a(g), b(reversed);
  a.run_init();
  b.run_init();
  std::mt19937_64 rng(9);
  Tensor x = random_tensor(rng, {4, 24, 24, 3}, 0.0f, 1.0f);
  CHECK(a.run({cifar::kLogits}, {{cifar::kInput, x}})[0].same_as(b.run({cifar::kLogits}, {{cifar::kInput, x}})[0]));
}

TEST_CASE("frozen graph and checkpoint formats") {
  CifarModelOptions o;
  o.batch = 2;
  Graph blank = build_cifar_model(o);
  Session trained(blank);
  trained.run_init();
  std::mt19937_64 rng(10);
  Tensor x = random_tensor(rng, {2, 24, 24, 3}, 0.0f, 1.0f);
  trained.run({cifar::kTrainOp}, {{cifar::kInput, x}, {cifar::kLabels, Tensor({2}, {1.0f, 7.0f})}});

  SUBCASE("export then import is the identity") {
    CHECK(import_frozen(export_frozen(blank)) == blank);
    Graph folded = trained.frozen_graph();
    CHECK(import_frozen(export_frozen(folded)) == folded);
    CHECK(export_frozen(blank, trained.checkpoint()) == export_frozen(folded));
  }
  SUBCASE("imported graph gives bitwise-equal logits") {
    Session imported(import_frozen(export_frozen(trained.frozen_graph())));
    CHECK(imported.run({cifar::kLogits}, {{cifar::kInput, x}})[0].same_as(
        trained.run({cifar::kLogits}, {{cifar::kInput, x}})[0]));
  }
  SUBCASE("blank slate plus init equals the folded import") {
    Session init_src(blank);
    init_src.run_init();
    Session folded(import_frozen(export_frozen(init_src.frozen_graph())));
    Session fresh(import_frozen(export_frozen(blank)));
    CHECK_THROWS_AS(fresh.run({cifar::kLogits}, {{cifar::kInput, x}}), Error);
    fresh.run_init();
    for (const auto& v : variable_names(blank)) CHECK(fresh.variable(v).same_as(folded.variable(v)));
    CHECK(fresh.run({cifar::kLogits}, {{cifar::kInput, x}})[0].same_as(folded.run({cifar::kLogits}, {{cifar::kInput, x}})[0]));
  }
  SUBCASE("checkpoint restore after save is value-identical") {
    Bytes file = save_checkpoint(trained.checkpoint());
    Session other(blank);
    other.restore(load_checkpoint(file));
    for (const auto& [name, t] : trained.checkpoint()) CHECK(other.variable(name).same_as(t));
    CHECK(code_of([&] { other.restore({{"ghost", Tensor({1})}}); }) == Errc::UnknownNode);
    CHECK(code_of([&] { other.restore({{"dense1/biases", Tensor({3})}}); }) == Errc::ShapeMismatch);
  }
  SUBCASE("truncation and bad versions") {
    Graph small;
    small.add("c", OpKind::Const, {}, {{"value", Tensor({2}, {1, 2})}});
    small.add("r", OpKind::Relu, {"c"}, {{"note", std::string("x")}, {"k", std::vector<std::int64_t>{1, 2}}});
    Bytes file = export_frozen(small);
    for (std::size_t len = 0; len < file.size(); ++len) {
      REQUIRE(code_of([&] { import_frozen(ByteSpan(file.data(), len)); }) == Errc::CorruptFile);
    }
    Bytes longer = file;
    longer.push_back(0);
    CHECK(code_of([&] { import_frozen(longer); }) == Errc::CorruptFile);
    Bytes v2 = file;
    v2[4] = 2;
    CHECK(code_of([&] { import_frozen(v2); }) == Errc::FormatVersionUnknown);
    Bytes ck = save_checkpoint(trained.checkpoint());
    CHECK(code_of([&] { load_checkpoint(ByteSpan(ck.data(), ck.size() / 2)); }) == Errc::CorruptFile);
    ck[4] = 9;
    CHECK(code_of([&] { load_checkpoint(ck); }) == Errc::FormatVersionUnknown);
  }
}

namespace {

Graph pipeline_graph(std::int64_t batch, std::int64_t capacity = 512) {
  Graph g;
  g.add("reader", OpKind::RecordReader);
  g.add("crop", OpKind::Crop, {"reader:1"},
        {{"size", std::vector<std::int64_t>{24, 24}}, {"offset", std::vector<std::int64_t>{4, 4}}});
  g.add("enqueue", OpKind::FifoQueue, {"crop", "reader:0"},
        {{"queue", std::string("q")}, {"action", std::string("enqueue")}, {"capacity", capacity}});
  g.add("dequeue", OpKind::FifoQueue, {},
        {{"queue", std::string("q")}, {"action", std::string("dequeue")}, {"batch", batch}});
  return g;
}

enclave::EnclaveConfig small_config(enclave::ExecMode mode = enclave::ExecMode::HardwareSim) {
  enclave::EnclaveConfig c;
  c.heap_limit = 256 * enclave::MiB;
  c.epc_limit = 16 * enclave::MiB;
  c.mode = mode;
  c.fs_key = crypto::SymmetricKey::random();
  return c;
}

}  // namespace

TEST_CASE("record reader feeds the queue from a shielded file") {
  TempDir t("tensor");
  auto records = synthetic_records({.count = 2, .seed = 3});
  const std::string path = t.path("secure/data.bin");

  SUBCASE("two records, then the consumer blocks") {
    runtime::Runtime rt(Bytes{'t'}, small_config());
    std::vector<Tensor> labels;
    bool blocked_seen = false;
    Errc after_close = Errc::InvalidArgument;
    rt.run_main([&] {
      runtime::BridgeHostIo io(rt.bridge(), rt.enclave());
      fs::FileShield sh(io, t.policies(), &rt.enclave());
      sh.write_file(path, encode_records(records));
      Session s(pipeline_graph(1));
      s.bind_reader("reader", std::make_shared<FileRecordSource>(sh.open(path)));
      s.start_queue_runner("enqueue");
      auto* sched = sched::Scheduler::current();
      const auto me = sched::Scheduler::current_tid();
      sched->spawn([&] {
        while (sched->state(me) != sched::ThreadState::Blocked || labels.size() < 2) {
          sched->sleep_until(sched->hooks().now() + 100000);
        }
        blocked_seen = s.queue("q").size() == 0;
        s.queue("q").close();
      });
      try {
        for (;;) labels.push_back(s.run({"dequeue:1"})[0]);
      } catch (const Error& e) {
        after_close = e.code();
      }
      s.shutdown();
    });
    REQUIRE(labels.size() == 2);
    CHECK(labels[0].data[0] == records[0].label);
    CHECK(labels[1].data[0] == records[1].label);
    CHECK(blocked_seen);
    CHECK(after_close == Errc::EndOfInput);
    CHECK(rt.enclave().profile().stats(bridge::SyscallClass::Futex).calls > 0);
  }
  SUBCASE("label 10 and truncated records") {
    auto bad = records;
    bad[1].label = 10;
    std::vector<Errc> codes;
    runtime::Runtime rt(Bytes{'t'}, small_config());
    rt.run_main([&] {
      runtime::BridgeHostIo io(rt.bridge(), rt.enclave());
      fs::FileShield sh(io, t.policies(), &rt.enclave());
      sh.write_file(path, encode_records(bad));
      Session s(pipeline_graph(2));
      s.bind_reader("reader", std::make_shared<FileRecordSource>(sh.open(path)));
      s.start_queue_runner("enqueue");
      codes.push_back(code_of([&] { s.run({"dequeue:0"}); }));
      s.shutdown();

      Bytes cut = encode_records(records);
      cut.resize(cut.size() - 1);
      sh.write_file(path, cut);
      FileRecordSource src(sh.open(path));
      CHECK(src.next().has_value());
      codes.push_back(code_of([&] { src.next(); }));
    });
    CHECK(codes == std::vector<Errc>{Errc::LabelOutOfRange, Errc::RecordTruncated});
  }
  SUBCASE("tampered input: TamperDetected, nothing emitted") {
    auto cfg = small_config();
    {
      fs::PosixHostIo io;
      fs::FileShield sh(io, t.policies(), nullptr, cfg.fs_key);
      sh.write_file(path, encode_records(records));
    }
    Bytes raw = slurp(path);
    raw[fs::kHeaderSize + crypto::kNonceSize + 100] ^= 0x01;
    spit(path, raw);
    Errc code = Errc::InvalidArgument;
    std::size_t emitted = 99;
    runtime::Runtime rt(Bytes{'t'}, cfg);
    rt.run_main([&] {
      runtime::BridgeHostIo io(rt.bridge(), rt.enclave());
      fs::FileShield sh(io, t.policies(), &rt.enclave());
      Session s(pipeline_graph(1));
      s.bind_reader("reader", std::make_shared<FileRecordSource>(sh.open(path)));
      s.start_queue_runner("enqueue");
      code = code_of([&] { s.run({"dequeue:0"}); });
      emitted = s.queue("q").size();
      s.shutdown();
    });
    CHECK(code == Errc::TamperDetected);
    CHECK(emitted == 0);
  }
}

TEST_CASE("logits are bitwise identical across modes, shields and worker counts") {
  TempDir t("tensor");
  CifarModelOptions o;
  o.batch = 4;
  o.augment = false;
  Graph model = build_cifar_model(o);
  Bytes frozen;
  {
    Session s(model);
    s.run_init();
    frozen = export_frozen(s.frozen_graph());
  }
  auto records = synthetic_records({.count = 8, .seed = 11});
  std::vector<Tensor> outputs;
  for (auto mode : {enclave::ExecMode::Native, enclave::ExecMode::Simulation, enclave::ExecMode::HardwareSim}) {
    for (bool shield : {true, false}) {
      for (unsigned threads : {1u, 3u}) {
        const std::string dir = shield ? "secure" : "plain";
        std::filesystem::create_directories(t.path("plain"));
        auto cfg = small_config(mode);
        runtime::Runtime rt(Bytes{'m'}, cfg);
        Tensor logits;
        rt.run_main([&] {
          runtime::BridgeHostIo io(rt.bridge(), rt.enclave());
          fs::FileShield sh(io, t.policies(), &rt.enclave());
          sh.write_file(t.path(dir + "/model.tscg"), frozen);
          sh.write_file(t.path(dir + "/data.bin"), encode_records(records));
          EnclaveExecContext ctx(rt.enclave());
          Session s(import_frozen(sh.read_file(t.path(dir + "/model.tscg"))), {threads, &ctx});
          s.bind_reader(cifar::kReader, std::make_shared<FileRecordSource>(sh.open(t.path(dir + "/data.bin"))));
          s.start_queue_runner(cifar::kEnqueue);
          auto batch = s.run({std::string(cifar::kDequeue) + ":0"});
          logits = s.run({cifar::kLogits}, {{cifar::kInput, batch[0]}})[0];
          s.shutdown();
        });
        if (mode == enclave::ExecMode::HardwareSim) CHECK(rt.enclave().ledger().paging > 0);
        else CHECK(rt.enclave().ledger().paging == 0);
        outputs.push_back(logits);
      }
    }
  }
  for (const auto& o2 : outputs) CHECK(o2.same_as(outputs[0]));
}

TEST_CASE("worker pool: helpers park on futexes and training matches the serial split") {
  CifarModelOptions o;
  o.batch = 6;
  Graph model = build_cifar_model(o);
  std::mt19937_64 rng(12);
  Tensor x = random_tensor(rng, {6, 24, 24, 3}, 0.0f, 1.0f);
  Tensor y({6}, {0, 1, 2, 3, 4, 5});

  Session serial(model, {3, nullptr});
  serial.run_init();
  serial.run({cifar::kTrainOp}, {{cifar::kInput, x}, {cifar::kLabels, y}});

  runtime::Runtime rt(Bytes{'w'}, small_config());
  Checkpoint pooled;
  rt.run_main([&] {
    EnclaveExecContext ctx(rt.enclave());
    Session s(model, {3, &ctx});
    CHECK(s.exec().helpers_running());
    s.run_init();
    s.run({cifar::kTrainOp}, {{cifar::kInput, x}, {cifar::kLabels, y}});
    pooled = s.checkpoint();
    s.shutdown();
  });
  for (const auto& [name, t] : serial.checkpoint()) CHECK(pooled.at(name).same_as(t));
  auto futex = rt.enclave().profile().stats(bridge::SyscallClass::Futex);
  CHECK(futex.calls > 0);
  CHECK(futex.bridge_calls == 0);
  CHECK(rt.enclave().heap_live_bytes() == 0);
}
