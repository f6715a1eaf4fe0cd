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
#include <functional>
#include <optional>
#include <string>

#include "shieldrun/cas/quote.hpp"
#include "shieldrun/common/crypto.hpp"
#include "shieldrun/enclave/enclave.hpp"
#include "shieldrun/net/transport.hpp"

namespace shieldrun::fs {
class FileShield;
}

namespace shieldrun::net {

// Wire format, version 1. Integers are big-endian.
//
// Handshake frame: type u8 | length u32 | body
//   1 ClientHello    version u8 | random[32] | eph_pub[32] | challenge[16]
//   2 ServerHello    version u8 | random[32] | eph_pub[32] | identity_pub[32] |
//                    challenge[16] | quote_len u16 | quote | sig[64]
//   3 ClientFinish   identity_pub[32] | quote_len u16 | quote | sig[64]
//   4 ServerFinished mac[32]
// Ephemeral keys are X25519, identities Ed25519. With CH, SH, CF the full
// frames and SH', CF' the bodies without their trailing signature:
//   server sig = Sign("shieldrun server hs" | SHA-256(CH | SH'))
//   client sig = Sign("shieldrun client hs" | SHA-256(CH | SH | CF'))
//   okm        = HKDF-SHA256(X25519 shared, salt = SHA-256(CH | SH | CF),
//                            info = "shieldrun keys v1", 96)
//                = c2s key | s2c key | finished key
//   mac        = HMAC-SHA256(finished key, SHA-256(CH | SH | CF))
// A quote (0 or 112 bytes) answers the peer's challenge and carries
//   nonce = SHA-256("shieldrun quote" | challenge | identity_pub | eph_pub)[0..16]
// so it cannot be lifted onto another identity or key exchange.
//
// Record: seq u64 | length u32 | ChaCha20-Poly1305(type u8 | data)
//   nonce = 00000000 | seq, AD = seq | length, data at most 16 KiB,
//   type 0x17 application data, 0x15 close.
// Sequence numbers start at 0 in each direction.
inline constexpr std::uint8_t kProtocolVersion = 1;
inline constexpr std::size_t kMaxRecordData = 16 * 1024;
inline constexpr std::size_t kRecordHeaderSize = 12;
inline constexpr std::uint8_t kContentData = 0x17;
inline constexpr std::uint8_t kContentClose = 0x15;

using Quoter = std::function<cas::AttestationQuote(const cas::QuoteNonce&)>;

struct HandshakeOptions {
  std::optional<crypto::SigningKeyPair> identity;  // required
  // When set, our side answers the peer's challenge with a quote.
  Quoter quoter;
  // Verifies the peer's quote. Needed when expected_peer is set.
  std::optional<crypto::PublicKey> platform_key;
  // Peer must present a valid quote for this measurement.
  std::optional<enclave::Measurement> expected_peer;
  // Pins the peer's identity key.
  std::optional<crypto::PublicKey> expected_identity;
  // Randomness for hellos and ephemeral keys. Defaults to the system RNG.
  std::function<void(MutableByteSpan)> rng;
  // Crypto work is charged here when the enclave's shields are active.
  enclave::Enclave* enclave = nullptr;
};

struct SessionKeys {
  crypto::SymmetricKey send;
  crypto::SymmetricKey recv;
};

enum class Role { Client, Server };

cas::QuoteNonce quote_binding(ByteSpan challenge, const crypto::PublicKey& identity,
                              const crypto::PublicKey& ephemeral);

// Authenticated, encrypted, replay-protected byte channel. The send and
// receive halves may be driven from different threads.
class SecureChannel {
 public:
  // Both raise AuthFailure, MeasurementMismatch or Downgrade; the transport
  // is closed on failure so the peer does not hang.
  static SecureChannel connect(Transport& transport, const HandshakeOptions& options);
  static SecureChannel accept(Transport& transport, const HandshakeOptions& options);

  // Splits into records of at most kMaxRecordData bytes.
  void send(ByteSpan data);
  // Data of the next record. ChannelClosed after the peer's close.
  Bytes recv();
  void close();

  // Record layer without the transport, for framing tests and adversaries.
  Bytes seal_record(ByteSpan data, std::uint8_t type = kContentData);
  // Returns the data of a well-formed data record and advances recv_seq.
  // ReplayDetected when seq is behind, IntegrityFailure on a gap, bad
  // length or bad tag, ChannelClosed for a close record. Any error leaves
  // the receive half unusable.
  Bytes open_record(ByteSpan record);

  Role role() const { return role_; }
  std::uint64_t send_seq() const { return send_seq_; }
  std::uint64_t recv_seq() const { return recv_seq_; }
  const SessionKeys& session_keys() const { return keys_; }
  const crypto::PublicKey& peer_identity() const { return peer_identity_; }
  const std::optional<enclave::Measurement>& peer_measurement() const { return peer_measurement_; }

 private:
  SecureChannel(Transport* t, Role role, SessionKeys keys) : transport_(t), role_(role), keys_(std::move(keys)) {}
  Bytes open_checked(ByteSpan record, std::uint8_t* type);

  Transport* transport_;
  Role role_;
  SessionKeys keys_;
  std::uint64_t send_seq_ = 0;
  std::uint64_t recv_seq_ = 0;
  crypto::PublicKey peer_identity_{};
  std::optional<enclave::Measurement> peer_measurement_;
  enclave::Enclave* enclave_ = nullptr;
  std::optional<Errc> recv_error_;
  bool send_closed_ = false;

  friend class Handshake;
};

// Identity keys live in files protected by the file shield.
void store_identity(fs::FileShield& shield, const std::string& path,
                    const crypto::SigningKeyPair& identity);
crypto::SigningKeyPair load_identity(fs::FileShield& shield, const std::string& path);

}  // namespace shieldrun::net
