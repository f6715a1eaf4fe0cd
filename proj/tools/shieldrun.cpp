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

// shieldrun: bench harness and operator tooling.
//
//   shieldrun classify  --mode all --images 100
//   shieldrun train     --mode hardware-sim --steps 20 --threads 4
//   shieldrun epc-sweep --epc 8M --from 2M --to 32M
//   shieldrun syscalls  --workload classify
//   shieldrun cas serve | cas register, provision, freeze, measure, gen-data
//
// Bench verbs print CSV (or write it to --out) and exit non-zero when a
// post-run self-check fails.

#include <malloc.h>

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include "CLI11.hpp"
#include "shieldrun/bench/bench.hpp"
#include "shieldrun/cas/service.hpp"
#include "shieldrun/tensor/cifar.hpp"
#include "shieldrun/tensor/serialize.hpp"

using namespace shieldrun;
namespace stdfs = std::filesystem;

namespace {

int failures = 0;

void check(bool ok, const std::string& what) {
  if (!ok) {
    std::cerr << "self-check failed: " << what << "\n";
    ++failures;
  }
}

void check_reports(const std::vector<bench::BenchReport>& reports) {
  for (const auto& r : reports) {
    for (const auto& p : bench::check_report(r)) check(false, r.workload + "/" + std::string(enclave::to_string(r.mode)) + ": " + p);
  }
}

Bytes read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) raise(Errc::InvalidArgument, "cannot read " + path);
  return Bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

void write_file(const std::string& path, std::string_view data) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) raise(Errc::InvalidArgument, "cannot write " + path);
  f.write(data.data(), static_cast<std::streamsize>(data.size()));
}

void write_file(const std::string& path, ByteSpan data) {
  write_file(path, std::string_view(reinterpret_cast<const char*>(data.data()), data.size()));
}

void emit(const std::string& out, const std::string& text) {
  if (out.empty()) std::cout << text;
  else write_file(out, text);
}

std::vector<enclave::ExecMode> modes_for(const std::string& mode) {
  if (mode == "all") return {enclave::ExecMode::Native, enclave::ExecMode::Simulation, enclave::ExecMode::HardwareSim};
  return {enclave::parse_mode(mode)};
}

// Bench workspace: the fs key, a frozen model and the record file, created
// on first use. The key file stands in for a provisioned secret.
struct WorkspaceArgs {
  std::string dir = "shieldrun-work";
  std::string data;  // optional record file (CIFAR-10 binary format)
  std::uint64_t seed = 1;

  void add(CLI::App* app) {
    app->add_option("--workspace", dir, "Workspace directory")->capture_default_str();
    app->add_option("--data", data, "Record file to use instead of the synthetic set");
    app->add_option("--seed", seed, "Model and data seed")->capture_default_str();
  }

  std::pair<bench::Workspace, crypto::SymmetricKey> open() const {
    bench::Workspace ws{dir};
    const auto key_path = (stdfs::path(dir) / "bench.key").string();
    if (stdfs::exists(key_path)) {
      Bytes hex = read_file(key_path);
      return {ws, crypto::SymmetricKey(from_hex(std::string(hex.begin(), hex.end())))};
    }
    stdfs::create_directories(dir);
    auto key = crypto::SymmetricKey::random();
    if (data.empty()) {
      bench::prepare_default_workspace(ws, key, seed);
    } else {
      tensor::CifarModelOptions m;
      m.batch = 1;
      m.augment = false;
      m.seed = seed;
      tensor::Session s(tensor::build_cifar_model(m));
      s.run_init();
      bench::prepare_workspace(ws, key, tensor::export_frozen(s.frozen_graph()), read_file(data));
    }
    write_file(key_path, to_hex(key.span()));
    return {ws, key};
  }
};

struct ConfigArgs {
  std::string fs_shield = "on";
  unsigned threads = 4;
  std::string heap = "256M";
  std::string epc = "0";
  std::uint64_t macs_per_unit = enclave::CostModel{}.macs_per_unit;

  void add(CLI::App* app) {
    app->add_option("--fs-shield", fs_shield, "on|off")->check(CLI::IsMember({"on", "off"}))->capture_default_str();
    app->add_option("--threads", threads, "Kernel worker threads")->capture_default_str();
    app->add_option("--heap", heap, "Enclave heap limit")->capture_default_str();
    app->add_option("--epc", epc, "EPC limit, 0 for the desk EPC")->capture_default_str();
    app->add_option("--macs-per-unit", macs_per_unit, "Compute cost constant")->capture_default_str();
  }

  bench::BenchConfig make(const crypto::SymmetricKey& key) const {
    bench::BenchConfig c;
    c.fs_shield = fs_shield == "on";
    c.threads = threads;
    c.heap_limit = enclave::parse_size(heap);
    c.epc_limit = epc == "0" ? 0 : enclave::parse_size(epc);
    c.costs.macs_per_unit = macs_per_unit;
    c.fs_key = key;
    return c;
  }
};

std::string top_line(const bench::TopK& top) {
  std::string s;
  for (const auto& [label, p] : top) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s%d:%.4f", s.empty() ? "" : " ", label, p);
    s += buf;
  }
  return s;
}

int cmd_classify(const WorkspaceArgs& wa, const ConfigArgs& ca, const std::string& mode, std::size_t images,
                 std::int64_t batch, const std::string& out, bool show_top) {
  auto [ws, key] = wa.open();
  std::vector<bench::BenchReport> reports;
  std::vector<bench::ClassifyResult> results;
  for (auto m : modes_for(mode)) {
    bench::ClassifyOptions o;
    o.config = ca.make(key);
    o.config.mode = m;
    o.images = images;
    o.batch = batch;
    results.push_back(bench::run_classify(ws, o));
    reports.push_back(results.back().report);
  }
  check_reports(reports);
  for (std::size_t i = 1; i < results.size(); ++i) {
    bool same = results[i].logits.size() == results[0].logits.size();
    for (std::size_t k = 0; same && k < results[0].logits.size(); ++k) same = results[i].logits[k].same_as(results[0].logits[k]);
    check(same, "logits differ between modes");
    check(results[i].top == results[0].top, "top-4 labels differ between modes");
  }
  if (show_top) {
    for (std::size_t i = 0; i < results[0].top.size(); ++i) std::cerr << "image " << i << ": " << top_line(results[0].top[i]) << "\n";
  }
  emit(out, bench::render_csv(reports));
  return failures ? 1 : 0;
}

int cmd_train(const WorkspaceArgs& wa, const ConfigArgs& ca, const std::string& mode, int steps, std::int64_t batch,
              double lr, bool augment, const std::string& out, const std::string& series) {
  auto [ws, key] = wa.open();
  std::vector<bench::BenchReport> reports;
  std::vector<bench::TrainResult> results;
  for (auto m : modes_for(mode)) {
    bench::TrainOptions o;
    o.config = ca.make(key);
    o.config.mode = m;
    o.steps = steps;
    o.batch = batch;
    o.learning_rate = lr;
    o.augment = augment;
    o.seed = wa.seed;
    results.push_back(bench::run_train(ws, o));
    reports.push_back(results.back().report);
  }
  check_reports(reports);
  for (const auto& r : results) {
    bool finite = true;
    for (float l : r.losses) finite = finite && std::isfinite(l);
    check(finite, "non-finite loss");
    check(r.losses == results[0].losses, "loss series differ between modes");
    std::cerr << enclave::to_string(r.report.mode) << ": final loss " << r.final_loss << ", batch accuracy "
              << r.batch_accuracy << "\n";
  }
  emit(out, bench::render_csv(reports));
  if (!series.empty()) write_file(series, bench::render_series_csv(results.back()));
  return failures ? 1 : 0;
}

int cmd_sweep(const std::string& epc, const std::string& from, const std::string& to, int points, int passes,
              const std::string& out) {
  bench::SweepOptions o;
  o.epc_limit = enclave::parse_size(epc);
  o.from = from.empty() ? o.epc_limit / 4 : enclave::parse_size(from);
  o.to = to.empty() ? o.epc_limit * 4 : enclave::parse_size(to);
  o.points = points;
  o.passes = passes;
  auto pts = bench::epc_sweep(o);
  for (std::size_t i = 1; i < pts.size(); ++i) check(pts[i].mean_cost >= pts[i - 1].mean_cost, "mean cost decreased with a larger working set");
  const auto lo = bench::sweep_point(o, o.epc_limit / 2), hi = bench::sweep_point(o, o.epc_limit * 2);
  std::cerr << "cost at 2x EPC / cost at 0.5x EPC = " << hi.mean_cost / lo.mean_cost << "\n";
  emit(out, bench::render_sweep_csv(pts));
  return failures ? 1 : 0;
}

int cmd_syscalls(const WorkspaceArgs& wa, const ConfigArgs& ca, const std::string& workload, const std::string& mode,
                 int steps, std::int64_t batch, std::size_t images, const std::string& out) {
  auto [ws, key] = wa.open();
  bench::BenchReport r;
  auto cfg = ca.make(key);
  cfg.mode = enclave::parse_mode(mode);
  if (workload == "classify") {
    bench::ClassifyOptions o;
    o.config = cfg;
    o.images = images;
    r = bench::run_classify(ws, o).report;
  } else {
    bench::TrainOptions o;
    o.config = cfg;
    o.steps = steps;
    o.batch = batch;
    o.seed = wa.seed;
    r = bench::run_train(ws, o).report;
  }
  check_reports({r});
  std::cout << r.profile.render_table();
  if (!out.empty()) write_file(out, r.profile.render_csv());
  return failures ? 1 : 0;
}

// CAS state directory: platform stand-in key, service identity and the
// registry storage key, created on first use.
struct CasState {
  std::string dir;

  Bytes secret(const std::string& name) const {
    const auto p = (stdfs::path(dir) / name).string();
    if (!stdfs::exists(p)) {
      stdfs::create_directories(dir);
      write_file(p, to_hex(crypto::random_bytes(32)));
    }
    Bytes hex = read_file(p);
    return from_hex(std::string(hex.begin(), hex.end()));
  }
  cas::Platform platform() const { return cas::Platform::from_seed(secret("platform.seed")); }
  crypto::SigningKeyPair identity() const { return crypto::SigningKeyPair::from_seed(secret("server.seed")); }
  cas::SecretsRegistry registry() const {
    return cas::SecretsRegistry((stdfs::path(dir) / "registry.tsfs").string(), crypto::SymmetricKey(secret("registry.key")));
  }
};

enclave::Measurement measure_code(const std::string& code) {
  return enclave::measure(read_file(code), enclave::read_process_env_config());
}

int cmd_cas_serve(const CasState& st, const std::string& listen) {
  cas::CasServerOptions o;
  o.listen = net::parse_endpoint(listen);
  o.identity = st.identity();
  cas::CasServer server(cas::CasService(st.platform().verification_key(), st.registry()), o);
  const auto port = server.start();
  std::cout << "listening on " << o.listen.host << ":" << port << "\n"
            << "identity " << to_hex(server.identity()) << std::endl;
  static std::atomic<bool> stop{false};
  std::signal(SIGINT, [](int) { stop = true; });
  std::signal(SIGTERM, [](int) { stop = true; });
  while (!stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  server.stop();
  return 0;
}

int cmd_cas_register(const CasState& st, const std::string& code, const std::string& name, const std::string& policy) {
  auto m = measure_code(code);
  auto reg = st.registry();
  enclave::SecretBundle b;
  b.fs_key = crypto::SymmetricKey::random();
  b.identity_seed = crypto::random_bytes(32);
  if (!policy.empty()) {
    Bytes text = read_file(policy);
    b.policy_text.assign(text.begin(), text.end());
  }
  reg.put(m, {name.empty() ? stdfs::path(code).filename().string() : name, std::move(b)});
  std::cout << "registered " << m.hex() << "\n";
  return 0;
}

int cmd_provision(const CasState& st, const std::string& code, const std::string& server) {
  auto e = enclave::Enclave::create(read_file(code), enclave::read_process_env_config());
  cas::ProvisionOptions o;
  o.server_identity = st.identity().public_key();
  cas::provision(*e, st.platform(), net::parse_endpoint(server), o);
  const auto fp = crypto::sha256(e->fs_key()->span());
  std::cout << "provisioned " << e->measurement().hex() << "\n"
            << "fs key fingerprint " << to_hex(ByteSpan(fp.data(), 8)) << "\n";
  return 0;
}

int cmd_freeze(const std::string& out, const std::string& checkpoint, std::uint64_t seed, bool train_graph) {
  tensor::CifarModelOptions m;
  m.seed = seed;
  if (!train_graph) {
    m.batch = 1;
    m.augment = false;
  }
  tensor::Graph g = tensor::build_cifar_model(m);
  Bytes frozen;
  if (!checkpoint.empty()) {
    frozen = tensor::export_frozen(g, tensor::load_checkpoint(read_file(checkpoint)));
  } else {
    tensor::Session s(g);
    s.run_init();
    frozen = tensor::export_frozen(s.frozen_graph());
  }
  write_file(out, frozen);
  std::cout << "wrote " << frozen.size() << " bytes, " << tensor::parameter_count(g) << " parameters\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  // Keep large tensor buffers in the heap instead of fresh mappings.
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);

  CLI::App app{"shieldrun: shielded execution bench and tooling"};
  app.require_subcommand(1);
  std::string out, mode = "hardware-sim";
  WorkspaceArgs wa;
  ConfigArgs ca;

  auto* classify = app.add_subcommand("classify", "Classify images from the workspace data set");
  std::size_t images = 100;
  std::int64_t cbatch = 1;
  bool show_top = false;
  classify->add_option("--mode", mode, "native|simulation|hardware-sim|all")->capture_default_str();
  classify->add_option("--images", images)->capture_default_str();
  classify->add_option("--batch", cbatch)->capture_default_str();
  classify->add_flag("--top", show_top, "Print the top-4 labels per image");
  classify->add_option("--out", out, "CSV report file");
  wa.add(classify);
  ca.add(classify);

  auto* train = app.add_subcommand("train", "Train the model on the workspace data set");
  int steps = 20;
  std::int64_t tbatch = 128;
  double lr = 0.05;
  bool no_augment = false;
  std::string series;
  train->add_option("--mode", mode, "native|simulation|hardware-sim|all")->capture_default_str();
  train->add_option("--steps", steps)->capture_default_str();
  train->add_option("--batch", tbatch)->capture_default_str();
  train->add_option("--lr", lr)->capture_default_str();
  train->add_flag("--no-augment", no_augment);
  train->add_option("--out", out, "CSV report file");
  train->add_option("--series", series, "Per-step latency CSV file");
  wa.add(train);
  ca.add(train);

  auto* sweep = app.add_subcommand("epc-sweep", "Mean page access cost against working set size");
  std::string epc = "8M", from, to;
  int points = 9, passes = 4;
  sweep->add_option("--epc", epc)->capture_default_str();
  sweep->add_option("--from", from, "Smallest working set (default EPC/4)");
  sweep->add_option("--to", to, "Largest working set (default 4*EPC)");
  sweep->add_option("--points", points)->capture_default_str();
  sweep->add_option("--passes", passes)->capture_default_str();
  sweep->add_option("--out", out, "CSV file");

  auto* sys = app.add_subcommand("syscalls", "Syscall profile of a workload");
  std::string workload = "classify";
  sys->add_option("--workload", workload)->check(CLI::IsMember({"classify", "train"}))->capture_default_str();
  sys->add_option("--mode", mode)->capture_default_str();
  sys->add_option("--steps", steps)->capture_default_str();
  sys->add_option("--batch", tbatch)->capture_default_str();
  sys->add_option("--images", images)->capture_default_str();
  sys->add_option("--out", out, "CSV file");
  wa.add(sys);
  ca.add(sys);

  std::string state = "shieldrun-cas", listen = "127.0.0.1:7443", code, name, policy, server;
  auto* cas_cmd = app.add_subcommand("cas", "Configuration and attestation service");
  cas_cmd->require_subcommand(1);
  auto* serve = cas_cmd->add_subcommand("serve", "Run the service");
  serve->add_option("--state", state)->capture_default_str();
  serve->add_option("--listen", listen)->capture_default_str();
  auto* reg = cas_cmd->add_subcommand("register", "Register secrets for an enclave image");
  reg->add_option("--state", state)->capture_default_str();
  reg->add_option("--code", code)->required();
  reg->add_option("--name", name);
  reg->add_option("--policy", policy, "File with the policy text to release");

  auto* prov = app.add_subcommand("provision", "Attest an enclave image and receive its secrets");
  prov->add_option("--state", state)->capture_default_str();
  prov->add_option("--code", code)->required();
  prov->add_option("--server", server)->required();

  auto* freeze = app.add_subcommand("freeze", "Write a frozen model graph");
  std::string checkpoint;
  std::uint64_t seed = 1;
  bool train_graph = false;
  freeze->add_option("--out", out)->required();
  freeze->add_option("--checkpoint", checkpoint, "Fold these variable values");
  freeze->add_option("--seed", seed)->capture_default_str();
  freeze->add_flag("--train-graph", train_graph, "Keep the augmenting input pipeline and batch 128");

  auto* measure = app.add_subcommand("measure", "Measurement of an enclave image under TS_* settings");
  measure->add_option("--code", code)->required();

  auto* gen = app.add_subcommand("gen-data", "Write the synthetic record set");
  std::size_t count = 2000;
  gen->add_option("--out", out)->required();
  gen->add_option("--count", count)->capture_default_str();
  gen->add_option("--seed", seed)->capture_default_str();

  CLI11_PARSE(app, argc, argv);
  try {
    if (*classify) return cmd_classify(wa, ca, mode, images, cbatch, out, show_top);
    if (*train) return cmd_train(wa, ca, mode, steps, tbatch, lr, !no_augment, out, series);
    if (*sweep) return cmd_sweep(epc, from, to, points, passes, out);
    if (*sys) return cmd_syscalls(wa, ca, workload, mode, steps, tbatch, images, out);
    if (*serve) return cmd_cas_serve(CasState{state}, listen);
    if (*reg) return cmd_cas_register(CasState{state}, code, name, policy);
    if (*prov) return cmd_provision(CasState{state}, code, server);
    if (*freeze) return cmd_freeze(out, checkpoint, seed, train_graph);
    if (*measure) {
      std::cout << measure_code(code).hex() << "\n";
      return 0;
    }
    if (*gen) {
      tensor::SyntheticOptions d;
      d.count = count;
      d.seed = seed;
      write_file(out, tensor::encode_records(tensor::synthetic_records(d)));
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
