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

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "shieldrun/cas/quote.hpp"
#include "shieldrun/enclave/enclave.hpp"
#include "shieldrun/net/channel.hpp"
#include "shieldrun/net/transport.hpp"

namespace shieldrun::cas {

// Protocol messages travel inside a SecureChannel:
//   length u32 (big-endian, counts type + body) | type u8 | body
//   QUOTE_REQ  nonce[16]                         server -> client
//   QUOTE      quote[112]                        client -> server
//   RELEASE    bundle                            server -> client
//   DENY       reason u8 (Errc) | text           server -> client
// bundle = fs_key[32] | seed_len u16 | identity seed | policy_len u32 | policy
enum class MsgType : std::uint8_t { QuoteReq = 1, Quote = 2, Release = 3, Deny = 4 };

Bytes encode_bundle(const enclave::SecretBundle& b);
enclave::SecretBundle decode_bundle(ByteSpan raw);  // ProtocolError

struct Message {
  MsgType type;
  Bytes body;
};

// Reassembles length-prefixed messages from channel records.
class MessageStream {
 public:
  explicit MessageStream(net::SecureChannel& ch) : ch_(ch) {}
  void send(MsgType type, ByteSpan body);
  Message recv();  // ProtocolError on an oversized or unknown message

 private:
  net::SecureChannel& ch_;
  Bytes buf_;
};

// Secrets per measurement, persisted as JSON inside a TSFS file.
class SecretsRegistry {
 public:
  struct Entry {
    std::string name;
    enclave::SecretBundle secrets;
  };

  // Loads `path` when it exists.
  SecretsRegistry(std::string path, crypto::SymmetricKey storage_key);

  void put(const enclave::Measurement& m, Entry entry);  // persists
  bool erase(const enclave::Measurement& m);               // persists
  const Entry* find(const enclave::Measurement& m) const;
  std::size_t size() const { return entries_.size(); }
  std::vector<enclave::Measurement> measurements() const;

 private:
  void load();
  void save() const;

  std::string path_;
  crypto::SymmetricKey key_;
  std::map<std::string, Entry> entries_;  // keyed by measurement hex
};

// Issued challenges. Every nonce is accepted at most once, and only on the
// connection it was issued to.
class NonceLedger {
 public:
  QuoteNonce issue(std::uint64_t connection);
  // False when the nonce is unknown, belongs to another connection, or was
  // already consumed. Marks it consumed in every case where it was issued.
  bool consume(const QuoteNonce& nonce, std::uint64_t connection);
  std::size_t outstanding() const { return issued_.size(); }

 private:
  std::map<QuoteNonce, std::uint64_t> issued_;
  std::set<QuoteNonce> used_;
};

struct Verdict {
  bool released = false;
  Errc reason = Errc::UnknownMeasurement;
  std::string detail;
  std::optional<enclave::SecretBundle> bundle;
};

// Release decisions. Not thread-safe; the server confines it to one thread.
class CasService {
 public:
  CasService(crypto::PublicKey platform_key, SecretsRegistry registry);

  QuoteNonce issue_nonce(std::uint64_t connection) { return ledger_.issue(connection); }
  // Checks, in order: platform signature (SignatureInvalid), nonce freshness
  // (NonceReused), registration (UnknownMeasurement).
  Verdict verify_and_release(const AttestationQuote& quote, std::uint64_t connection);

  SecretsRegistry& registry() { return registry_; }
  std::uint64_t releases() const { return releases_; }
  std::uint64_t denials() const { return denials_; }

 private:
  crypto::PublicKey platform_key_;
  SecretsRegistry registry_;
  NonceLedger ledger_;
  std::uint64_t releases_ = 0;
  std::uint64_t denials_ = 0;
};

struct CasServerOptions {
  net::Endpoint listen{"127.0.0.1", 0};
  std::optional<crypto::SigningKeyPair> identity;  // required
};

// Accepts connections concurrently; every registry and ledger access is
// posted to a single owner thread.
class CasServer {
 public:
  CasServer(CasService service, CasServerOptions options);
  ~CasServer();

  // Binds and starts accepting. Returns the bound port.
  std::uint16_t start();
  void stop();
  // Serves one connection on the calling thread.
  void serve(net::Transport& transport);

  const crypto::PublicKey& identity() const { return options_.identity->public_key(); }
  std::uint16_t port() const { return port_; }
  // Runs fn on the owner thread.
  void with_service(const std::function<void(CasService&)>& fn);

 private:
  class Owner;

  CasService service_;
  CasServerOptions options_;
  std::unique_ptr<Owner> owner_;
  std::atomic<std::uint64_t> next_connection_{1};
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::thread acceptor_;
  std::mutex conn_mu_;
  std::vector<std::thread> connections_;
  std::atomic<bool> stopping_{false};
};

struct ProvisionOptions {
  // Pins the service's identity key.
  std::optional<crypto::PublicKey> server_identity;
};

// Client side: attests `enclave` and installs the released secrets.
// Denials raise the server's reason code; transport and channel failures
// raise ProvisioningFailed.
void provision(enclave::Enclave& enclave, const Platform& platform, net::Transport& transport,
               const ProvisionOptions& options = {});
void provision(enclave::Enclave& enclave, const Platform& platform, const net::Endpoint& server,
               const ProvisionOptions& options = {});

}  // namespace shieldrun::cas
