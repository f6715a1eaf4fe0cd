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

// Thin wrappers over libsodium. The shields only ever need: SHA-256,
// HMAC/HKDF-SHA256, ChaCha20-Poly1305 (IETF, 12-byte nonce, 16-byte tag),
// Ed25519 signatures and X25519 key agreement.

#include <array>
#include <cstdint>
#include <optional>

#include "shieldrun/common/bytes.hpp"

namespace shieldrun::crypto {

inline constexpr std::size_t kKeySize = 32;
inline constexpr std::size_t kNonceSize = 12;
inline constexpr std::size_t kTagSize = 16;
inline constexpr std::size_t kDigestSize = 32;
inline constexpr std::size_t kSignatureSize = 64;
inline constexpr std::size_t kPublicKeySize = 32;

using Digest = std::array<std::uint8_t, kDigestSize>;
using Nonce = std::array<std::uint8_t, kNonceSize>;
using Signature = std::array<std::uint8_t, kSignatureSize>;
using PublicKey = std::array<std::uint8_t, kPublicKeySize>;

// 256-bit symmetric key, wiped on destruction.
class SymmetricKey {
 public:
  SymmetricKey() { bytes_.fill(0); }
  explicit SymmetricKey(ByteSpan raw);
  SymmetricKey(const SymmetricKey&) = default;
  SymmetricKey& operator=(const SymmetricKey&) = default;
  ~SymmetricKey();

  static SymmetricKey random();

  ByteSpan span() const { return bytes_; }
  bool operator==(const SymmetricKey& other) const;

 private:
  std::array<std::uint8_t, kKeySize> bytes_;
};

void random_bytes(MutableByteSpan out);
Bytes random_bytes(std::size_t n);

Digest sha256(ByteSpan data);

class Sha256 {
 public:
  Sha256();
  Sha256& update(ByteSpan data);
  Digest finish();

 private:
  alignas(64) std::uint8_t state_[128];
};

Digest hmac_sha256(ByteSpan key, ByteSpan data);
// RFC 5869 with SHA-256.
Bytes hkdf_sha256(ByteSpan ikm, ByteSpan salt, ByteSpan info, std::size_t length);

// Returns ciphertext || tag.
Bytes aead_seal(const SymmetricKey& key, const Nonce& nonce, ByteSpan ad, ByteSpan plaintext);
// Returns nullopt when the tag does not verify.
std::optional<Bytes> aead_open(const SymmetricKey& key, const Nonce& nonce, ByteSpan ad,
                               ByteSpan sealed);

bool constant_time_equal(ByteSpan a, ByteSpan b);

// Ed25519.
class SigningKeyPair {
 public:
  static SigningKeyPair generate();
  static SigningKeyPair from_seed(ByteSpan seed32);

  SigningKeyPair(const SigningKeyPair&) = default;
  SigningKeyPair& operator=(const SigningKeyPair&) = default;
  ~SigningKeyPair();

  const PublicKey& public_key() const { return public_; }
  Bytes seed() const;
  Signature sign(ByteSpan message) const;

 private:
  SigningKeyPair() = default;
  PublicKey public_{};
  std::array<std::uint8_t, 64> secret_{};
};

bool verify_signature(const PublicKey& key, ByteSpan message, const Signature& sig);

// X25519.
class KxKeyPair {
 public:
  static KxKeyPair generate();
  static KxKeyPair from_secret(ByteSpan secret32);

  KxKeyPair(const KxKeyPair&) = default;
  KxKeyPair& operator=(const KxKeyPair&) = default;
  ~KxKeyPair();

  const PublicKey& public_key() const { return public_; }
  // Raises AuthFailure on a low-order peer point (all-zero shared secret).
  std::array<std::uint8_t, 32> agree(const PublicKey& peer) const;

 private:
  KxKeyPair() = default;
  PublicKey public_{};
  std::array<std::uint8_t, 32> secret_{};
};

}  // namespace shieldrun::crypto
