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

#include "shieldrun/cas/service.hpp"

#include <sys/socket.h>
#include <unistd.h>

#include <condition_variable>
#include <deque>
#include <filesystem>
#include <functional>
#include <future>

#include "json.hpp"
#include "shieldrun/fs/host_io.hpp"
#include "shieldrun/fs/shield.hpp"

namespace shieldrun::cas {

namespace {
constexpr std::uint32_t kMaxMessage = 1 << 20;
}

Bytes encode_bundle(const enclave::SecretBundle& b) {
  ByteWriter w;
  w.bytes(b.fs_key.span());
  w.u16_be(static_cast<std::uint16_t>(b.identity_seed.size()));
  w.bytes(b.identity_seed);
  w.u32_be(static_cast<std::uint32_t>(b.policy_text.size()));
  w.bytes(as_bytes(b.policy_text));
  return std::move(w).take();
}

enclave::SecretBundle decode_bundle(ByteSpan raw) {
  ByteReader r(raw, Errc::ProtocolError);
  enclave::SecretBundle b;
  b.fs_key = crypto::SymmetricKey(r.bytes(crypto::kKeySize));
  auto seed = r.bytes(r.u16_be());
  b.identity_seed.assign(seed.begin(), seed.end());
  auto policy = r.bytes(r.u32_be());
  b.policy_text.assign(policy.begin(), policy.end());
  if (!r.done()) raise(Errc::ProtocolError, "trailing bytes in secret bundle");
  return b;
}

void MessageStream::send(MsgType type, ByteSpan body) {
  ByteWriter w;
  w.u32_be(static_cast<std::uint32_t>(body.size() + 1));
  w.u8(static_cast<std::uint8_t>(type));
  w.bytes(body);
  ch_.send(w.data());
}

Message MessageStream::recv() {
  auto fill = [&](std::size_t n) {
    while (buf_.size() < n) {
      Bytes more = ch_.recv();
      buf_.insert(buf_.end(), more.begin(), more.end());
    }
  };
  fill(4);
  ByteReader r(buf_, Errc::ProtocolError);
  std::uint32_t len = r.u32_be();
  if (len == 0 || len > kMaxMessage) raise(Errc::ProtocolError, "bad message length");
  fill(4 + len);
  std::uint8_t type = buf_[4];
  if (type < 1 || type > 4) raise(Errc::ProtocolError, "unknown message type " + std::to_string(type));
  Message m{static_cast<MsgType>(type), Bytes(buf_.begin() + 5, buf_.begin() + 4 + len)};
  buf_.erase(buf_.begin(), buf_.begin() + 4 + len);
  return m;
}

// ---------------------------------------------------------------------------

SecretsRegistry::SecretsRegistry(std::string path, crypto::SymmetricKey storage_key)
    : path_(std::move(path)), key_(std::move(storage_key)) {
  if (std::filesystem::exists(path_)) load();
}

void SecretsRegistry::put(const enclave::Measurement& m, Entry entry) {
  entries_[m.hex()] = std::move(entry);
  save();
}

bool SecretsRegistry::erase(const enclave::Measurement& m) {
  bool had = entries_.erase(m.hex()) > 0;
  if (had) save();
  return had;
}

const SecretsRegistry::Entry* SecretsRegistry::find(const enclave::Measurement& m) const {
  auto it = entries_.find(m.hex());
  return it == entries_.end() ? nullptr : &it->second;
}

std::vector<enclave::Measurement> SecretsRegistry::measurements() const {
  std::vector<enclave::Measurement> out;
  for (auto& [hex, e] : entries_) out.push_back(enclave::Measurement::from_hex(hex));
  return out;
}

void SecretsRegistry::load() {
  fs::PosixHostIo io;
  fs::FileShield shield(io, {{path_, fs::ShieldMode::EncryptAuth}}, nullptr, key_);
  Bytes raw = shield.read_file(path_);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(raw.begin(), raw.end());
    if (doc.at("version").get<int>() != 1) raise(Errc::FormatVersionUnknown, "registry version");
    entries_.clear();
    for (auto& j : doc.at("entries")) {
      Entry e;
      e.name = j.at("name").get<std::string>();
      e.secrets.fs_key = crypto::SymmetricKey(from_hex(j.at("fs_key").get<std::string>()));
      e.secrets.identity_seed = from_hex(j.at("identity_seed").get<std::string>());
      e.secrets.policy_text = j.at("policy").get<std::string>();
      entries_[enclave::Measurement::from_hex(j.at("measurement").get<std::string>()).hex()] = std::move(e);
    }
  } catch (const nlohmann::json::exception& ex) {
    raise(Errc::CorruptFile, std::string("registry: ") + ex.what());
  }
}

void SecretsRegistry::save() const {
  nlohmann::json entries = nlohmann::json::array();
  for (auto& [hex, e] : entries_) {
    entries.push_back({{"measurement", hex},
                       {"name", e.name},
                       {"fs_key", to_hex(e.secrets.fs_key.span())},
                       {"identity_seed", to_hex(e.secrets.identity_seed)},
                       {"policy", e.secrets.policy_text}});
  }
  nlohmann::json doc{{"version", 1}, {"entries", entries}};
  std::string text = doc.dump();
  fs::PosixHostIo io;
  fs::FileShield shield(io, {{path_, fs::ShieldMode::EncryptAuth}}, nullptr, key_);
  shield.write_file(path_, as_bytes(text));
}

// ---------------------------------------------------------------------------

QuoteNonce NonceLedger::issue(std::uint64_t connection) {
  QuoteNonce n;
  do {
    n = random_nonce();
  } while (issued_.count(n) || used_.count(n));
  issued_[n] = connection;
  return n;
}

bool NonceLedger::consume(const QuoteNonce& nonce, std::uint64_t connection) {
  auto it = issued_.find(nonce);
  if (it == issued_.end()) return false;  // never issued, or already consumed
  bool ok = it->second == connection;
  issued_.erase(it);
  used_.insert(nonce);
  return ok;
}

CasService::CasService(crypto::PublicKey platform_key, SecretsRegistry registry)
    : platform_key_(platform_key), registry_(std::move(registry)) {}

Verdict CasService::verify_and_release(const AttestationQuote& quote, std::uint64_t connection) {
  Verdict v;
  if (!verify_quote(platform_key_, quote)) {
    ledger_.consume(quote.nonce, connection);
    v.reason = Errc::SignatureInvalid;
    v.detail = "quote signature does not verify under the platform key";
  } else if (!ledger_.consume(quote.nonce, connection)) {
    v.reason = Errc::NonceReused;
    v.detail = "quote nonce was not issued to this connection or was already used";
  } else if (const auto* e = registry_.find(quote.measurement)) {
    v.released = true;
    v.bundle = e->secrets;
  } else {
    v.reason = Errc::UnknownMeasurement;
    v.detail = "measurement " + quote.measurement.hex() + " is not registered";
  }
  ++(v.released ? releases_ : denials_);
  return v;
}

// ---------------------------------------------------------------------------

class CasServer::Owner {
 public:
  Owner() : thread_([this] { loop(); }) {}
  ~Owner() {
    {
      std::lock_guard lk(mu_);
      stop_ = true;
    }
    cv_.notify_one();
    thread_.join();
  }

  template <class F>
  auto call(F fn) -> decltype(fn()) {
    std::packaged_task<decltype(fn())()> task(std::move(fn));
    auto fut = task.get_future();
    {
      std::lock_guard lk(mu_);
      tasks_.emplace_back([&task] { task(); });
    }
    cv_.notify_one();
    return fut.get();
  }

 private:
  void loop() {
    std::unique_lock lk(mu_);
    for (;;) {
      cv_.wait(lk, [&] { return stop_ || !tasks_.empty(); });
      if (tasks_.empty()) return;
      auto t = std::move(tasks_.front());
      tasks_.pop_front();
      lk.unlock();
      t();
      lk.lock();
    }
  }

  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<std::function<void()>> tasks_;
  bool stop_ = false;
  std::thread thread_;
};

CasServer::CasServer(CasService service, CasServerOptions options)
    : service_(std::move(service)), options_(std::move(options)), owner_(std::make_unique<Owner>()) {
  if (!options_.identity) raise(Errc::InvalidArgument, "CAS server needs an identity key");
}

CasServer::~CasServer() { stop(); }

void CasServer::with_service(const std::function<void(CasService&)>& fn) {
  owner_->call([&] { fn(service_); });
}

void CasServer::serve(net::Transport& transport) {
  try {
    net::HandshakeOptions ho;
    ho.identity = options_.identity;
    auto ch = net::SecureChannel::accept(transport, ho);
    MessageStream ms(ch);
    std::uint64_t conn = next_connection_++;
    QuoteNonce nonce = owner_->call([&] { return service_.issue_nonce(conn); });
    ms.send(MsgType::QuoteReq, nonce);
    Message m = ms.recv();
    Verdict v;
    if (m.type != MsgType::Quote || m.body.size() != kQuoteSize) {
      v.reason = Errc::ProtocolError;
      v.detail = "expected a quote";
    } else {
      auto quote = AttestationQuote::decode(m.body);
      v = owner_->call([&] { return service_.verify_and_release(quote, conn); });
    }
    if (v.released) {
      ms.send(MsgType::Release, encode_bundle(*v.bundle));
    } else {
      ByteWriter w;
      w.u8(static_cast<std::uint8_t>(v.reason));
      w.bytes(as_bytes(v.detail));
      ms.send(MsgType::Deny, w.data());
    }
    ch.close();
  } catch (const Error&) {
    // A failed connection never affects the service.
  }
}

std::uint16_t CasServer::start() {
  listen_fd_ = net::tcp_listen(options_.listen, &port_);
  acceptor_ = std::thread([this] {
    for (;;) {
      int fd = net::tcp_accept(listen_fd_);
      if (fd < 0 || stopping_) {
        if (fd >= 0) ::close(fd);
        return;
      }
      std::lock_guard lk(conn_mu_);
      connections_.emplace_back([this, fd] {
        net::FdTransport t(fd);
        serve(t);
      });
    }
  });
  return port_;
}

void CasServer::stop() {
  if (stopping_.exchange(true)) return;
  if (listen_fd_ >= 0) {
    ::shutdown(listen_fd_, SHUT_RDWR);
    ::close(listen_fd_);
  }
  if (acceptor_.joinable()) acceptor_.join();
  std::lock_guard lk(conn_mu_);
  for (auto& t : connections_) t.join();
  connections_.clear();
}

// ---------------------------------------------------------------------------

void provision(enclave::Enclave& enclave, const Platform& platform, net::Transport& transport,
               const ProvisionOptions& options) {
  std::optional<enclave::SecretBundle> bundle;
  std::optional<std::pair<Errc, std::string>> denial;
  try {
    net::HandshakeOptions ho;
    ho.identity = crypto::SigningKeyPair::generate();
    ho.expected_identity = options.server_identity;
    ho.enclave = &enclave;
    auto ch = net::SecureChannel::connect(transport, ho);
    MessageStream ms(ch);
    Message req = ms.recv();
    if (req.type != MsgType::QuoteReq || req.body.size() != kQuoteNonceSize) {
      raise(Errc::ProtocolError, "expected a quote request");
    }
    QuoteNonce nonce{};
    std::copy(req.body.begin(), req.body.end(), nonce.begin());
    ms.send(MsgType::Quote, platform.quote(enclave, nonce).encode());
    Message resp = ms.recv();
    if (resp.type == MsgType::Release) {
      bundle = decode_bundle(resp.body);
    } else if (resp.type == MsgType::Deny && !resp.body.empty() &&
               resp.body[0] <= static_cast<std::uint8_t>(Errc::InvalidArgument)) {
      denial.emplace(static_cast<Errc>(resp.body[0]), std::string(resp.body.begin() + 1, resp.body.end()));
    } else {
      raise(Errc::ProtocolError, "unexpected response");
    }
    ch.close();
  } catch (const Error& e) {
    raise(Errc::ProvisioningFailed, e.what());
  }
  if (denial) raise(denial->first, "secret release denied: " + denial->second);
  enclave.provision(*bundle);
}

void provision(enclave::Enclave& enclave, const Platform& platform, const net::Endpoint& server,
               const ProvisionOptions& options) {
  int fd = -1;
  try {
    fd = net::tcp_connect(server);
  } catch (const Error& e) {
    raise(Errc::ProvisioningFailed, e.what());
  }
  net::FdTransport t(fd);
  provision(enclave, platform, t, options);
}

}  // namespace shieldrun::cas
