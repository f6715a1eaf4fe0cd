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

#include "shieldrun/common/crypto.hpp"

#include <sodium.h>

#include <cstring>

namespace shieldrun::crypto {

namespace {

void ensure_init() {
  static const bool ok = [] { return sodium_init() >= 0; }();
  if (!ok) raise(Errc::InvalidArgument, "libsodium initialisation failed");
}

static_assert(crypto_aead_chacha20poly1305_ietf_KEYBYTES == kKeySize);
static_assert(crypto_aead_chacha20poly1305_ietf_NPUBBYTES == kNonceSize);
static_assert(crypto_aead_chacha20poly1305_ietf_ABYTES == kTagSize);
static_assert(crypto_sign_BYTES == kSignatureSize);
static_assert(crypto_sign_PUBLICKEYBYTES == kPublicKeySize);
static_assert(sizeof(crypto_hash_sha256_state) <= 128);

}  // namespace

SymmetricKey::SymmetricKey(ByteSpan raw) {
  if (raw.size() != kKeySize) raise(Errc::InvalidArgument, "symmetric key must be 32 bytes");
  std::memcpy(bytes_.data(), raw.data(), kKeySize);
}

SymmetricKey::~SymmetricKey() { sodium_memzero(bytes_.data(), bytes_.size()); }

SymmetricKey SymmetricKey::random() {
  SymmetricKey k;
  random_bytes(k.bytes_);
  return k;
}

bool SymmetricKey::operator==(const SymmetricKey& other) const {
  return sodium_memcmp(bytes_.data(), other.bytes_.data(), kKeySize) == 0;
}

void random_bytes(MutableByteSpan out) {
  ensure_init();
  randombytes_buf(out.data(), out.size());
}

Bytes random_bytes(std::size_t n) {
  Bytes out(n);
  random_bytes(out);
  return out;
}

Digest sha256(ByteSpan data) {
  ensure_init();
  Digest d;
  crypto_hash_sha256(d.data(), data.data(), data.size());
  return d;
}

Sha256::Sha256() {
  ensure_init();
  crypto_hash_sha256_init(reinterpret_cast<crypto_hash_sha256_state*>(state_));
}

Sha256& Sha256::update(ByteSpan data) {
  crypto_hash_sha256_update(reinterpret_cast<crypto_hash_sha256_state*>(state_), data.data(),
                            data.size());
  return *this;
}

Digest Sha256::finish() {
  Digest d;
  crypto_hash_sha256_final(reinterpret_cast<crypto_hash_sha256_state*>(state_), d.data());
  return d;
}

Digest hmac_sha256(ByteSpan key, ByteSpan data) {
  ensure_init();
  crypto_auth_hmacsha256_state st;
  crypto_auth_hmacsha256_init(&st, key.data(), key.size());
  crypto_auth_hmacsha256_update(&st, data.data(), data.size());
  Digest d;
  crypto_auth_hmacsha256_final(&st, d.data());
  sodium_memzero(&st, sizeof(st));
  return d;
}

Bytes hkdf_sha256(ByteSpan ikm, ByteSpan salt, ByteSpan info, std::size_t length) {
  if (length > 255 * kDigestSize) raise(Errc::InvalidArgument, "hkdf output too long");
  Bytes zero_salt(kDigestSize, 0);
  Digest prk = hmac_sha256(salt.empty() ? ByteSpan(zero_salt) : salt, ikm);

  Bytes out;
  out.reserve(length);
  Bytes block;
  for (std::uint8_t counter = 1; out.size() < length; ++counter) {
    Bytes msg = block;
    msg.insert(msg.end(), info.begin(), info.end());
    msg.push_back(counter);
    Digest t = hmac_sha256(prk, msg);
    block.assign(t.begin(), t.end());
    std::size_t take = std::min(length - out.size(), block.size());
    out.insert(out.end(), block.begin(), block.begin() + static_cast<std::ptrdiff_t>(take));
  }
  sodium_memzero(prk.data(), prk.size());
  return out;
}

Bytes aead_seal(const SymmetricKey& key, const Nonce& nonce, ByteSpan ad, ByteSpan plaintext) {
  ensure_init();
  Bytes out(plaintext.size() + kTagSize);
  unsigned long long out_len = 0;
  crypto_aead_chacha20poly1305_ietf_encrypt(out.data(), &out_len, plaintext.data(),
                                            plaintext.size(), ad.data(), ad.size(), nullptr,
                                            nonce.data(), key.span().data());
  out.resize(out_len);
  return out;
}

std::optional<Bytes> aead_open(const SymmetricKey& key, const Nonce& nonce, ByteSpan ad,
                               ByteSpan sealed) {
  ensure_init();
  if (sealed.size() < kTagSize) return std::nullopt;
  Bytes out(sealed.size() - kTagSize);
  unsigned long long out_len = 0;
  int rc = crypto_aead_chacha20poly1305_ietf_decrypt(out.data(), &out_len, nullptr, sealed.data(),
                                                     sealed.size(), ad.data(), ad.size(),
                                                     nonce.data(), key.span().data());
  if (rc != 0) return std::nullopt;
  out.resize(out_len);
  return out;
}

bool constant_time_equal(ByteSpan a, ByteSpan b) {
  if (a.size() != b.size()) return false;
  return sodium_memcmp(a.data(), b.data(), a.size()) == 0;
}

SigningKeyPair SigningKeyPair::generate() {
  ensure_init();
  SigningKeyPair kp;
  crypto_sign_keypair(kp.public_.data(), kp.secret_.data());
  return kp;
}

SigningKeyPair SigningKeyPair::from_seed(ByteSpan seed32) {
  ensure_init();
  if (seed32.size() != crypto_sign_SEEDBYTES) raise(Errc::InvalidArgument, "seed must be 32 bytes");
  SigningKeyPair kp;
  crypto_sign_seed_keypair(kp.public_.data(), kp.secret_.data(), seed32.data());
  return kp;
}

SigningKeyPair::~SigningKeyPair() { sodium_memzero(secret_.data(), secret_.size()); }

Bytes SigningKeyPair::seed() const {
  Bytes out(crypto_sign_SEEDBYTES);
  crypto_sign_ed25519_sk_to_seed(out.data(), secret_.data());
  return out;
}

Signature SigningKeyPair::sign(ByteSpan message) const {
  Signature sig;
  crypto_sign_detached(sig.data(), nullptr, message.data(), message.size(), secret_.data());
  return sig;
}

bool verify_signature(const PublicKey& key, ByteSpan message, const Signature& sig) {
  ensure_init();
  return crypto_sign_verify_detached(sig.data(), message.data(), message.size(), key.data()) == 0;
}

KxKeyPair KxKeyPair::generate() {
  Bytes secret = random_bytes(32);
  return from_secret(secret);
}

KxKeyPair KxKeyPair::from_secret(ByteSpan secret32) {
  ensure_init();
  if (secret32.size() != 32) raise(Errc::InvalidArgument, "x25519 secret must be 32 bytes");
  KxKeyPair kp;
  std::memcpy(kp.secret_.data(), secret32.data(), 32);
  crypto_scalarmult_base(kp.public_.data(), kp.secret_.data());
  return kp;
}

KxKeyPair::~KxKeyPair() { sodium_memzero(secret_.data(), secret_.size()); }

std::array<std::uint8_t, 32> KxKeyPair::agree(const PublicKey& peer) const {
  std::array<std::uint8_t, 32> shared{};
  if (crypto_scalarmult(shared.data(), secret_.data(), peer.data()) != 0) {
    raise(Errc::AuthFailure, "x25519 agreement produced a degenerate secret");
  }
  return shared;
}

}  // namespace shieldrun::crypto
