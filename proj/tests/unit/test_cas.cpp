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

#include <mutex>
#include <random>
#include <thread>

#include "doctest.h"
#include "shieldrun/cas/service.hpp"
#include "shieldrun/fs/shield.hpp"
#include "shieldrun/runtime/runtime.hpp"
#include "test_util.hpp"

using namespace shieldrun;
using namespace shieldrun::cas;
using namespace testutil;

namespace {

enclave::SecretBundle bundle_for(const std::string& tag) {
  enclave::SecretBundle b;
  b.fs_key = crypto::SymmetricKey(crypto::sha256(as_bytes("fs " + tag)));
  auto seed = crypto::sha256(as_bytes("id " + tag));
  b.identity_seed.assign(seed.begin(), seed.end());
  b.policy_text = "/secure encrypt\n";
  return b;
}

std::unique_ptr<enclave::Enclave> make_enclave(const std::string& code) {
  return enclave::Enclave::create(as_bytes(code), enclave::EnclaveConfig{});
}

struct Fixture {
  TempDir dir{"cas"};
  crypto::SymmetricKey storage = crypto::SymmetricKey::random();
  Platform platform = Platform::generate();

  SecretsRegistry registry() { return SecretsRegistry(dir.path("registry.tsfs"), storage); }
};

// Taps every byte written in both directions.
class Tap : public net::Transport {
 public:
  Tap(net::Transport& inner, std::shared_ptr<Bytes> log) : inner_(inner), log_(std::move(log)) {}
  void write_all(ByteSpan d) override {
    {
      std::lock_guard lk(mu_);
      log_->insert(log_->end(), d.begin(), d.end());
    }
    inner_.write_all(d);
  }
  void read_exact(MutableByteSpan out) override { inner_.read_exact(out); }
  void close() override { inner_.close(); }

 private:
  net::Transport& inner_;
  std::shared_ptr<Bytes> log_;
  std::mutex mu_;
};

}  // namespace

TEST_CASE("quote verifies only with the same nonce and platform key") {
  auto platform = Platform::generate();
  auto e = make_enclave("app");
  auto n = random_nonce();
  auto q = platform.quote(*e, n);
  CHECK(q.measurement == e->measurement());
  CHECK(verify_quote(platform.verification_key(), q));
  auto other = q;
  other.nonce[0] ^= 1;
  CHECK_FALSE(verify_quote(platform.verification_key(), other));
  CHECK_FALSE(verify_quote(Platform::generate().verification_key(), q));
  CHECK(AttestationQuote::decode(q.encode()).encode() == q.encode());
  CHECK(code_of([] { AttestationQuote::decode(Bytes(10)); }) == Errc::ProtocolError);
}

TEST_CASE("verify_and_release decisions") {
  Fixture f;
  auto good = make_enclave("app-A");
  auto tampered = make_enclave("app-A with a patch");
  auto reg = f.registry();
  reg.put(good->measurement(), {"A", bundle_for("A")});
  CasService svc(f.platform.verification_key(), std::move(reg));

  SUBCASE("registered measurement, valid quote") {
    auto q = f.platform.quote(*good, svc.issue_nonce(1));
    auto v = svc.verify_and_release(q, 1);
    REQUIRE(v.released);
    CHECK(v.bundle->fs_key == bundle_for("A").fs_key);
    SUBCASE("replaying the same quote") {
      auto again = svc.verify_and_release(q, 1);
      CHECK_FALSE(again.released);
      CHECK(again.reason == Errc::NonceReused);
      CHECK_FALSE(again.bundle.has_value());
    }
  }
  SUBCASE("tampered code image") {
    CHECK_FALSE(tampered->measurement() == good->measurement());
    auto v = svc.verify_and_release(f.platform.quote(*tampered, svc.issue_nonce(1)), 1);
    CHECK_FALSE(v.released);
    CHECK(v.reason == Errc::UnknownMeasurement);
    CHECK_FALSE(v.bundle.has_value());
  }
  SUBCASE("forged signature") {
    auto v = svc.verify_and_release(Platform::generate().quote(*good, svc.issue_nonce(1)), 1);
    CHECK(v.reason == Errc::SignatureInvalid);
  }
  SUBCASE("nonce never issued") {
    auto v = svc.verify_and_release(f.platform.quote(*good, random_nonce()), 1);
    CHECK(v.reason == Errc::NonceReused);
  }
  SUBCASE("nonce issued to another connection") {
    auto n = svc.issue_nonce(7);
    auto v = svc.verify_and_release(f.platform.quote(*good, n), 8);
    CHECK(v.reason == Errc::NonceReused);
    // Consumed: the rightful connection cannot use it either.
    CHECK(svc.verify_and_release(f.platform.quote(*good, n), 7).reason == Errc::NonceReused);
  }
}

TEST_CASE("property: unregistered or nonce-reused quotes never release secrets") {
  Fixture f;
  std::mt19937_64 rng(5);
  std::vector<std::unique_ptr<enclave::Enclave>> registered, strangers;
  auto reg = f.registry();
  for (int i = 0; i < 4; ++i) {
    registered.push_back(make_enclave("reg-" + std::to_string(i)));
    strangers.push_back(make_enclave("stranger-" + std::to_string(i)));
    reg.put(registered.back()->measurement(), {"r" + std::to_string(i), bundle_for(std::to_string(i))});
  }
  CasService svc(f.platform.verification_key(), std::move(reg));
  std::vector<AttestationQuote> used;
  int denied = 0, released = 0;
  for (int trial = 0; trial < 2000; ++trial) {
    std::uint64_t conn = trial;
    int kind = static_cast<int>(rng() % 4);
    AttestationQuote q;
    bool should_release = false;
    if (kind == 0) {
      q = f.platform.quote(*registered[rng() % 4], svc.issue_nonce(conn));
      should_release = true;
    } else if (kind == 1) {
      q = f.platform.quote(*strangers[rng() % 4], svc.issue_nonce(conn));
    } else if (kind == 2 && !used.empty()) {
      q = used[rng() % used.size()];
    } else {
      q = f.platform.quote(*registered[rng() % 4], random_nonce());
    }
    auto v = svc.verify_and_release(q, conn);
    CHECK(v.released == should_release);
    CHECK(v.bundle.has_value() == should_release);
    if (v.released) {
      ++released;
      used.push_back(q);
    } else {
      ++denied;
    }
  }
  CHECK(released > 0);
  CHECK(denied > 0);
  CHECK(svc.denials() == static_cast<std::uint64_t>(denied));
}

TEST_CASE("registry persists in a protected file and survives a restart") {
  Fixture f;
  auto a = make_enclave("A");
  auto b = make_enclave("B");
  {
    auto reg = f.registry();
    reg.put(a->measurement(), {"A", bundle_for("A")});
    reg.put(b->measurement(), {"B", bundle_for("B")});
    CHECK(reg.erase(b->measurement()));
  }
  Bytes disk = slurp(f.dir.path("registry.tsfs"));
  CHECK(disk.size() > fs::kHeaderSize);
  CHECK_FALSE(contains(disk, bundle_for("A").fs_key.span()));
  CHECK_FALSE(contains(disk, as_bytes(to_hex(bundle_for("A").fs_key.span()))));

  auto reloaded = f.registry();
  CHECK(reloaded.size() == 1);
  REQUIRE(reloaded.find(a->measurement()));
  CHECK(reloaded.find(a->measurement())->secrets.fs_key == bundle_for("A").fs_key);
  CHECK(reloaded.find(b->measurement()) == nullptr);

  // Same decisions before and after the restart.
  CasService before(f.platform.verification_key(), f.registry());
  CasService after(f.platform.verification_key(), f.registry());
  for (auto* e : {a.get(), b.get()}) {
    auto v1 = before.verify_and_release(f.platform.quote(*e, before.issue_nonce(1)), 1);
    auto v2 = after.verify_and_release(f.platform.quote(*e, after.issue_nonce(1)), 1);
    CHECK(v1.released == v2.released);
    CHECK(v1.reason == v2.reason);
  }

  CHECK(code_of([&] { SecretsRegistry(f.dir.path("registry.tsfs"), crypto::SymmetricKey::random()); }) ==
        Errc::TamperDetected);
}

TEST_CASE("end to end over TCP: provision, then open a protected file") {
  Fixture f;
  enclave::EnclaveConfig cfg;
  cfg.shield_policies = f.dir.policies();
  auto e = enclave::Enclave::create(as_bytes("workload"), cfg);
  auto other = make_enclave("other workload");
  auto reg = f.registry();
  reg.put(e->measurement(), {"workload", bundle_for("w")});
  reg.put(other->measurement(), {"other", bundle_for("o")});

  CasServerOptions so;
  so.identity = crypto::SigningKeyPair::generate();
  CasServer server(CasService(f.platform.verification_key(), std::move(reg)), so);
  std::uint16_t port = server.start();

  fs::PosixHostIo io;
  fs::FileShield shield(io, cfg.shield_policies, e.get());
  CHECK(code_of([&] { shield.open(f.dir.path("secure/data.bin"), fs::Intent::Create); }) == Errc::KeyMissing);

  ProvisionOptions po;
  po.server_identity = server.identity();
  provision(*e, f.platform, net::Endpoint{"127.0.0.1", port}, po);
  CHECK(e->provisioned());
  CHECK(*e->fs_key() == bundle_for("w").fs_key);
  shield.write_file(f.dir.path("secure/data.bin"), as_bytes("model weights"));
  CHECK(shield.read_file(f.dir.path("secure/data.bin")) == Bytes(as_bytes("model weights").begin(), as_bytes("model weights").end()));

  SUBCASE("provisioning happens once") {
    CHECK(code_of([&] { provision(*e, f.platform, net::Endpoint{"127.0.0.1", port}, po); }) ==
          Errc::AlreadyProvisioned);
  }
  SUBCASE("a second enclave receives only its own bundle") {
    provision(*other, f.platform, net::Endpoint{"127.0.0.1", port}, po);
    CHECK(*other->fs_key() == bundle_for("o").fs_key);
    CHECK_FALSE(*other->fs_key() == *e->fs_key());
  }
  SUBCASE("an unregistered enclave is denied") {
    auto stranger = make_enclave("stranger");
    CHECK(code_of([&] { provision(*stranger, f.platform, net::Endpoint{"127.0.0.1", port}, po); }) ==
          Errc::UnknownMeasurement);
    CHECK_FALSE(stranger->provisioned());
  }
  SUBCASE("a quote from the wrong platform is denied") {
    auto twin = make_enclave("other workload");
    CHECK(code_of([&] { provision(*twin, Platform::generate(), net::Endpoint{"127.0.0.1", port}, po); }) ==
          Errc::SignatureInvalid);
  }
  SUBCASE("a pinned identity that does not match fails provisioning") {
    ProvisionOptions wrong;
    wrong.server_identity = crypto::SigningKeyPair::generate().public_key();
    CHECK(code_of([&] { provision(*other, f.platform, net::Endpoint{"127.0.0.1", port}, wrong); }) ==
          Errc::ProvisioningFailed);
  }
  server.stop();
}

TEST_CASE("server down: provisioning fails and protected opens report KeyMissing") {
  Fixture f;
  std::uint16_t port = 0;
  int fd = net::tcp_listen({"127.0.0.1", 0}, &port);
  ::close(fd);  // nothing listens on this port any more
  enclave::EnclaveConfig cfg;
  cfg.shield_policies = f.dir.policies();
  auto e = enclave::Enclave::create(as_bytes("w"), cfg);
  CHECK(code_of([&] { provision(*e, f.platform, net::Endpoint{"127.0.0.1", port}); }) ==
        Errc::ProvisioningFailed);
  fs::PosixHostIo io;
  fs::FileShield shield(io, cfg.shield_policies, e.get());
  CHECK(code_of([&] { shield.write_file(f.dir.path("secure/x"), as_bytes("x")); }) == Errc::KeyMissing);
}

TEST_CASE("secrets never appear on the wire in the clear") {
  Fixture f;
  auto e = make_enclave("w");
  auto reg = f.registry();
  reg.put(e->measurement(), {"w", bundle_for("w")});
  CasServerOptions so;
  so.identity = crypto::SigningKeyPair::generate();
  CasServer server(CasService(f.platform.verification_key(), std::move(reg)), so);
  auto [a, b] = net::memory_pipe();
  auto wire = std::make_shared<Bytes>();
  Tap ta(*a, wire), tb(*b, wire);
  std::thread t([&] { server.serve(tb); });
  provision(*e, f.platform, ta);
  t.join();
  REQUIRE(e->provisioned());
  CHECK(wire->size() > 300);
  CHECK_FALSE(contains(*wire, bundle_for("w").fs_key.span()));
  CHECK_FALSE(contains(*wire, bundle_for("w").identity_seed));
  CHECK_FALSE(contains(*wire, as_bytes("/secure encrypt")));
}

TEST_CASE("provisioning from inside the runtime over bridged sockets") {
  Fixture f;
  runtime::Runtime rt(as_bytes("bridged"), enclave::EnclaveConfig{});
  auto reg = f.registry();
  reg.put(rt.enclave().measurement(), {"bridged", bundle_for("b")});
  CasServerOptions so;
  so.identity = crypto::SigningKeyPair::generate();
  CasServer server(CasService(f.platform.verification_key(), std::move(reg)), so);
  std::uint16_t port = server.start();
  rt.run_main([&] {
    int fd = net::tcp_connect({"127.0.0.1", port});
    net::BridgeTransport t(rt.bridge(), fd);
    provision(rt.enclave(), f.platform, t);
  });
  CHECK(rt.enclave().provisioned());
  CHECK(rt.enclave().profile().stats(bridge::SyscallClass::Read).bridge_calls > 0);
  server.stop();
}

TEST_CASE("bundle codec") {
  auto b = bundle_for("z");
  auto back = decode_bundle(encode_bundle(b));
  CHECK(back.fs_key == b.fs_key);
  CHECK(back.identity_seed == b.identity_seed);
  CHECK(back.policy_text == b.policy_text);
  Bytes bad = encode_bundle(b);
  bad.push_back(0);
  CHECK(code_of([&] { decode_bundle(bad); }) == Errc::ProtocolError);
}
