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

#include "shieldrun/net/channel.hpp"

#include <algorithm>

#include "shieldrun/fs/shield.hpp"

namespace shieldrun::net {

namespace {

constexpr std::uint8_t kClientHello = 1;
constexpr std::uint8_t kServerHello = 2;
constexpr std::uint8_t kClientFinish = 3;
constexpr std::uint8_t kServerFinished = 4;
constexpr std::size_t kMaxHandshakeBody = 4096;
constexpr std::size_t kMaxSealed = 1 + kMaxRecordData + crypto::kTagSize;

template <std::size_t N>
std::array<std::uint8_t, N> take(ByteReader& r) {
  std::array<std::uint8_t, N> out{};
  auto b = r.bytes(N);
  std::copy(b.begin(), b.end(), out.begin());
  return out;
}

Bytes frame(std::uint8_t type, ByteSpan body) {
  ByteWriter w;
  w.u8(type);
  w.u32_be(static_cast<std::uint32_t>(body.size()));
  w.bytes(body);
  return std::move(w).take();
}

Bytes concat(std::initializer_list<ByteSpan> parts) {
  Bytes out;
  for (auto p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

crypto::Nonce record_nonce(std::uint64_t seq) {
  crypto::Nonce n{};
  for (int i = 0; i < 8; ++i) n[4 + i] = static_cast<std::uint8_t>(seq >> (56 - 8 * i));
  return n;
}

}  // namespace

cas::QuoteNonce quote_binding(ByteSpan challenge, const crypto::PublicKey& identity,
                              const crypto::PublicKey& ephemeral) {
  crypto::Sha256 h;
  h.update(as_bytes("shieldrun quote")).update(challenge).update(identity).update(ephemeral);
  auto d = h.finish();
  cas::QuoteNonce n{};
  std::copy_n(d.begin(), n.size(), n.begin());
  return n;
}

// One side of the key exchange. Holds the transcript and turns every
// malformed or unauthenticated message into AuthFailure.
class Handshake {
 public:
  Handshake(Transport& t, const HandshakeOptions& o) : t_(t), o_(o) {
    if (!o.identity) raise(Errc::InvalidArgument, "handshake needs an identity key");
    if (o.expected_peer && !o.platform_key) {
      raise(Errc::InvalidArgument, "expected_peer needs a platform verification key");
    }
    Bytes secret(32);
    fill(random_);
    fill(secret);
    fill(challenge_);
    eph_.emplace(crypto::KxKeyPair::from_secret(secret));
  }

  SecureChannel client() {
    ByteWriter ch;
    ch.u8(kProtocolVersion);
    ch.bytes(random_);
    ch.bytes(eph_->public_key());
    ch.bytes(challenge_);
    Bytes ch_frame = frame(kClientHello, ch.data());
    t_.write_all(ch_frame);

    Bytes sh_body = read_frame(kServerHello);
    ByteReader r(sh_body, Errc::AuthFailure);
    if (r.u8() != kProtocolVersion) raise(Errc::AuthFailure, "protocol version mismatch");
    r.bytes(32);
    auto peer_eph = take<32>(r);
    auto peer_id = take<32>(r);
    auto peer_challenge = take<16>(r);
    auto qbytes = r.bytes(r.u16_be());
    Bytes quote(qbytes.begin(), qbytes.end());
    auto sig = take<64>(r);
    if (!r.done()) raise(Errc::AuthFailure, "trailing bytes in server hello");

    Bytes sh_frame = frame(kServerHello, sh_body);
    ByteSpan sh_unsigned(sh_body.data(), sh_body.size() - 64);
    auto th1 = crypto::sha256(concat({ch_frame, sh_unsigned}));
    if (!crypto::verify_signature(peer_id, concat({as_bytes("shieldrun server hs"), th1}), sig)) {
      raise(Errc::AuthFailure, "server signature does not verify");
    }
    check_peer(peer_id, peer_eph, quote);

    ByteWriter cf;
    cf.bytes(o_.identity->public_key());
    append_quote(cf, peer_challenge);
    Bytes cf_unsigned = cf.data();
    auto th2 = crypto::sha256(concat({ch_frame, sh_frame, cf_unsigned}));
    cf.bytes(o_.identity->sign(concat({as_bytes("shieldrun client hs"), th2})));
    Bytes cf_frame = frame(kClientFinish, cf.data());
    t_.write_all(cf_frame);

    auto th3 = crypto::sha256(concat({ch_frame, sh_frame, cf_frame}));
    auto okm = derive(peer_eph, th3);
    Bytes mac = read_frame(kServerFinished);
    auto expect = crypto::hmac_sha256(ByteSpan(okm).subspan(64, 32), th3);
    if (!crypto::constant_time_equal(mac, expect)) raise(Errc::AuthFailure, "server finished mismatch");
    return finish(Role::Client, okm, peer_id);
  }

  SecureChannel server() {
    Bytes ch_body = read_frame(kClientHello);
    ByteReader r(ch_body, Errc::AuthFailure);
    if (r.u8() != kProtocolVersion) raise(Errc::AuthFailure, "protocol version mismatch");
    r.bytes(32);
    auto peer_eph = take<32>(r);
    auto peer_challenge = take<16>(r);
    if (!r.done()) raise(Errc::AuthFailure, "trailing bytes in client hello");
    Bytes ch_frame = frame(kClientHello, ch_body);

    ByteWriter sh;
    sh.u8(kProtocolVersion);
    sh.bytes(random_);
    sh.bytes(eph_->public_key());
    sh.bytes(o_.identity->public_key());
    sh.bytes(challenge_);
    append_quote(sh, peer_challenge);
    auto th1 = crypto::sha256(concat({ch_frame, sh.data()}));
    sh.bytes(o_.identity->sign(concat({as_bytes("shieldrun server hs"), th1})));
    Bytes sh_frame = frame(kServerHello, sh.data());
    t_.write_all(sh_frame);

    Bytes cf_body = read_frame(kClientFinish);
    ByteReader c(cf_body, Errc::AuthFailure);
    auto peer_id = take<32>(c);
    auto qbytes = c.bytes(c.u16_be());
    Bytes quote(qbytes.begin(), qbytes.end());
    auto sig = take<64>(c);
    if (!c.done()) raise(Errc::AuthFailure, "trailing bytes in client finish");
    Bytes cf_frame = frame(kClientFinish, cf_body);
    ByteSpan cf_unsigned(cf_body.data(), cf_body.size() - 64);
    auto th2 = crypto::sha256(concat({ch_frame, sh_frame, cf_unsigned}));
    if (!crypto::verify_signature(peer_id, concat({as_bytes("shieldrun client hs"), th2}), sig)) {
      raise(Errc::AuthFailure, "client signature does not verify");
    }
    check_peer(peer_id, peer_eph, quote);

    auto th3 = crypto::sha256(concat({ch_frame, sh_frame, cf_frame}));
    auto okm = derive(peer_eph, th3);
    auto mac = crypto::hmac_sha256(ByteSpan(okm).subspan(64, 32), th3);
    t_.write_all(frame(kServerFinished, mac));
    return finish(Role::Server, okm, peer_id);
  }

 private:
  void fill(MutableByteSpan out) {
    if (o_.rng) {
      o_.rng(out);
    } else {
      crypto::random_bytes(out);
    }
  }

  Bytes read_frame(std::uint8_t type) {
    Bytes head = t_.read_bytes(5);
    ByteReader r(head, Errc::AuthFailure);
    std::uint8_t got = r.u8();
    std::uint32_t len = r.u32_be();
    if (got != type) raise(Errc::AuthFailure, "unexpected handshake message " + std::to_string(got));
    if (len > kMaxHandshakeBody) raise(Errc::AuthFailure, "handshake message too long");
    return t_.read_bytes(len);
  }

  void append_quote(ByteWriter& w, const cas::QuoteNonce& peer_challenge) {
    if (!o_.quoter) {
      w.u16_be(0);
      return;
    }
    auto bound = quote_binding(peer_challenge, o_.identity->public_key(), eph_->public_key());
    Bytes q = o_.quoter(bound).encode();
    w.u16_be(static_cast<std::uint16_t>(q.size()));
    w.bytes(q);
  }

  void check_peer(const crypto::PublicKey& peer_id, const crypto::PublicKey& peer_eph,
                  const Bytes& quote) {
    if (o_.expected_identity && !crypto::constant_time_equal(*o_.expected_identity, peer_id)) {
      raise(Errc::AuthFailure, "peer identity is not the pinned key");
    }
    peer_id_ = peer_id;
    if (!quote.empty() && o_.platform_key) {
      auto q = cas::AttestationQuote::decode(quote, Errc::AuthFailure);
      if (!cas::verify_quote(*o_.platform_key, q)) raise(Errc::AuthFailure, "quote signature invalid");
      if (q.nonce != quote_binding(challenge_, peer_id, peer_eph)) {
        raise(Errc::AuthFailure, "quote not bound to this handshake");
      }
      peer_measurement_ = q.measurement;
    }
    if (o_.expected_peer) {
      if (!peer_measurement_) raise(Errc::Downgrade, "peer did not present an attestation quote");
      if (!(*peer_measurement_ == *o_.expected_peer)) {
        raise(Errc::MeasurementMismatch, "peer measurement " + peer_measurement_->hex() +
                                             " differs from expected " + o_.expected_peer->hex());
      }
    }
  }

  Bytes derive(const crypto::PublicKey& peer_eph, const crypto::Digest& th3) {
    auto shared = eph_->agree(peer_eph);
    return crypto::hkdf_sha256(shared, th3, as_bytes("shieldrun keys v1"), 96);
  }

  SecureChannel finish(Role role, const Bytes& okm, const crypto::PublicKey& peer_id) {
    crypto::SymmetricKey c2s(ByteSpan(okm).subspan(0, 32));
    crypto::SymmetricKey s2c(ByteSpan(okm).subspan(32, 32));
    SessionKeys keys = role == Role::Client ? SessionKeys{c2s, s2c} : SessionKeys{s2c, c2s};
    SecureChannel ch(&t_, role, std::move(keys));
    ch.peer_identity_ = peer_id;
    ch.peer_measurement_ = peer_measurement_;
    ch.enclave_ = o_.enclave && o_.enclave->shields_active() ? o_.enclave : nullptr;
    return ch;
  }

  Transport& t_;
  const HandshakeOptions& o_;
  std::array<std::uint8_t, 32> random_{};
  std::array<std::uint8_t, 16> challenge_{};
  std::optional<crypto::KxKeyPair> eph_;
  crypto::PublicKey peer_id_{};
  std::optional<enclave::Measurement> peer_measurement_;
};

namespace {

template <typename F>
SecureChannel guarded(Transport& t, F&& f) {
  try {
    return f();
  } catch (...) {
    t.close();
    throw;
  }
}

}  // namespace

SecureChannel SecureChannel::connect(Transport& transport, const HandshakeOptions& options) {
  return guarded(transport, [&] { return Handshake(transport, options).client(); });
}

SecureChannel SecureChannel::accept(Transport& transport, const HandshakeOptions& options) {
  return guarded(transport, [&] { return Handshake(transport, options).server(); });
}

Bytes SecureChannel::seal_record(ByteSpan data, std::uint8_t type) {
  if (send_closed_) raise(Errc::ChannelClosed, "send half closed");
  if (data.size() > kMaxRecordData) raise(Errc::InvalidArgument, "record data over 16 KiB");
  Bytes pt;
  pt.reserve(data.size() + 1);
  pt.push_back(type);
  pt.insert(pt.end(), data.begin(), data.end());
  ByteWriter head;
  head.u64_be(send_seq_);
  head.u32_be(static_cast<std::uint32_t>(pt.size() + crypto::kTagSize));
  Bytes sealed = crypto::aead_seal(keys_.send, record_nonce(send_seq_), head.data(), pt);
  if (enclave_) enclave_->charge_crypto(pt.size());
  ++send_seq_;
  Bytes out = std::move(head).take();
  out.insert(out.end(), sealed.begin(), sealed.end());
  return out;
}

Bytes SecureChannel::open_checked(ByteSpan record, std::uint8_t* type) {
  if (recv_error_) raise(*recv_error_, "receive half unusable after an earlier error");
  try {
    if (record.size() < kRecordHeaderSize) raise(Errc::IntegrityFailure, "short record");
    ByteReader r(record, Errc::IntegrityFailure);
    std::uint64_t seq = r.u64_be();
    std::uint32_t len = r.u32_be();
    if (len != r.remaining()) raise(Errc::IntegrityFailure, "record length mismatch");
    if (len < 1 + crypto::kTagSize || len > kMaxSealed) raise(Errc::IntegrityFailure, "record length out of range");
    if (seq < recv_seq_) {
      raise(Errc::ReplayDetected, "record " + std::to_string(seq) + " already accepted");
    }
    if (seq > recv_seq_) {
      raise(Errc::IntegrityFailure, "record " + std::to_string(seq) + " out of order, expected " +
                                        std::to_string(recv_seq_));
    }
    auto pt = crypto::aead_open(keys_.recv, record_nonce(seq), record.subspan(0, kRecordHeaderSize),
                                record.subspan(kRecordHeaderSize));
    if (!pt) raise(Errc::IntegrityFailure, "record tag does not verify");
    if (enclave_) enclave_->charge_crypto(pt->size());
    std::uint8_t t = (*pt)[0];
    if (t != kContentData && t != kContentClose) raise(Errc::IntegrityFailure, "unknown content type");
    ++recv_seq_;
    *type = t;
    return Bytes(pt->begin() + 1, pt->end());
  } catch (const Error& e) {
    recv_error_ = e.code();
    throw;
  }
}

Bytes SecureChannel::open_record(ByteSpan record) {
  std::uint8_t type = 0;
  Bytes data = open_checked(record, &type);
  if (type == kContentClose) {
    recv_error_ = Errc::ChannelClosed;
    raise(Errc::ChannelClosed, "peer closed the channel");
  }
  return data;
}

void SecureChannel::send(ByteSpan data) {
  std::size_t off = 0;
  do {
    std::size_t n = std::min(kMaxRecordData, data.size() - off);
    transport_->write_all(seal_record(data.subspan(off, n)));
    off += n;
  } while (off < data.size());
}

Bytes SecureChannel::recv() {
  if (recv_error_) raise(*recv_error_, "receive half unusable after an earlier error");
  try {
    Bytes record = transport_->read_bytes(kRecordHeaderSize);
    ByteReader r(record, Errc::IntegrityFailure);
    r.u64_be();
    std::uint32_t len = r.u32_be();
    if (len > kMaxSealed) raise(Errc::IntegrityFailure, "record length out of range");
    Bytes body = transport_->read_bytes(len);
    record.insert(record.end(), body.begin(), body.end());
    return open_record(record);
  } catch (const Error& e) {
    recv_error_ = e.code();
    throw;
  }
}

void SecureChannel::close() {
  if (send_closed_) return;
  Bytes rec = seal_record({}, kContentClose);
  send_closed_ = true;
  try {
    transport_->write_all(rec);
  } catch (const Error&) {
  }
}

void store_identity(fs::FileShield& shield, const std::string& path,
                    const crypto::SigningKeyPair& identity) {
  shield.write_file(path, identity.seed());
}

crypto::SigningKeyPair load_identity(fs::FileShield& shield, const std::string& path) {
  Bytes seed = shield.read_file(path);
  if (seed.size() != 32) raise(Errc::CorruptFile, "identity file must hold a 32-byte seed");
  return crypto::SigningKeyPair::from_seed(seed);
}

}  // namespace shieldrun::net
