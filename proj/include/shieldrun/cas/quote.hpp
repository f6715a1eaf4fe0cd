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

#include <array>
#include <cstdint>

#include "shieldrun/common/bytes.hpp"
#include "shieldrun/common/crypto.hpp"
#include "shieldrun/enclave/enclave.hpp"

namespace shieldrun::cas {

inline constexpr std::size_t kQuoteNonceSize = 16;
// measurement[32] | nonce[16] | signature[64]
inline constexpr std::size_t kQuoteSize = crypto::kDigestSize + kQuoteNonceSize + crypto::kSignatureSize;

using QuoteNonce = std::array<std::uint8_t, kQuoteNonceSize>;

QuoteNonce random_nonce();

struct AttestationQuote {
  enclave::Measurement measurement;
  QuoteNonce nonce{};
  crypto::Signature signature{};

  // measurement | nonce, the bytes the platform key signs.
  Bytes signed_message() const;
  Bytes encode() const;
  // Wrong length raises `code`.
  static AttestationQuote decode(ByteSpan raw, Errc code = Errc::ProtocolError);
};

// Stand-in for the hardware attestation infrastructure: a single Ed25519
// key plays the role of the platform's quoting key.
class Platform {
 public:
  static Platform generate();
  static Platform from_seed(ByteSpan seed32);

  AttestationQuote quote(const enclave::Enclave& enclave, const QuoteNonce& nonce) const;
  // Signs an arbitrary measurement. Only tests and tooling use this.
  AttestationQuote quote_measurement(const enclave::Measurement& m, const QuoteNonce& nonce) const;
  const crypto::PublicKey& verification_key() const { return key_.public_key(); }

 private:
  explicit Platform(crypto::SigningKeyPair key) : key_(std::move(key)) {}
  crypto::SigningKeyPair key_;
};

bool verify_quote(const crypto::PublicKey& platform_key, const AttestationQuote& quote);

}  // namespace shieldrun::cas
