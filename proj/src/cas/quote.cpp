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

#include "shieldrun/cas/quote.hpp"

#include <algorithm>

namespace shieldrun::cas {

QuoteNonce random_nonce() {
  QuoteNonce n{};
  crypto::random_bytes(n);
  return n;
}

Bytes AttestationQuote::signed_message() const {
  Bytes m(measurement.digest.begin(), measurement.digest.end());
  m.insert(m.end(), nonce.begin(), nonce.end());
  return m;
}

Bytes AttestationQuote::encode() const {
  Bytes out = signed_message();
  out.insert(out.end(), signature.begin(), signature.end());
  return out;
}

AttestationQuote AttestationQuote::decode(ByteSpan raw, Errc code) {
  if (raw.size() != kQuoteSize) raise(code, "quote must be " + std::to_string(kQuoteSize) + " bytes");
  AttestationQuote q;
  std::copy_n(raw.begin(), crypto::kDigestSize, q.measurement.digest.begin());
  std::copy_n(raw.begin() + crypto::kDigestSize, kQuoteNonceSize, q.nonce.begin());
  std::copy_n(raw.begin() + crypto::kDigestSize + kQuoteNonceSize, crypto::kSignatureSize,
              q.signature.begin());
  return q;
}

Platform Platform::generate() { return Platform(crypto::SigningKeyPair::generate()); }

Platform Platform::from_seed(ByteSpan seed32) {
  return Platform(crypto::SigningKeyPair::from_seed(seed32));
}

AttestationQuote Platform::quote(const enclave::Enclave& enclave, const QuoteNonce& nonce) const {
  return quote_measurement(enclave.measurement(), nonce);
}

AttestationQuote Platform::quote_measurement(const enclave::Measurement& m,
                                             const QuoteNonce& nonce) const {
  AttestationQuote q;
  q.measurement = m;
  q.nonce = nonce;
  q.signature = key_.sign(q.signed_message());
  return q;
}

bool verify_quote(const crypto::PublicKey& platform_key, const AttestationQuote& quote) {
  return crypto::verify_signature(platform_key, quote.signed_message(), quote.signature);
}

}  // namespace shieldrun::cas
