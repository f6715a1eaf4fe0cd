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

#include "shieldrun/enclave/enclave.hpp"

#include <algorithm>
#include <bit>

namespace shieldrun::enclave {

Measurement Measurement::from_hex(std::string_view hex) {
  Bytes raw = shieldrun::from_hex(hex);
  if (raw.size() != crypto::kDigestSize) raise(Errc::ParseError, "measurement must be 32 bytes");
  Measurement m;
  std::copy(raw.begin(), raw.end(), m.digest.begin());
  return m;
}

Measurement measure(ByteSpan code_image, const EnclaveConfig& config) {
  crypto::Sha256 h;
  ByteWriter len;
  len.u64_le(code_image.size());
  h.update(len.data());
  h.update(code_image);
  h.update(as_bytes(config.canonical()));
  return Measurement{h.finish()};
}

std::unique_ptr<Enclave> Enclave::create(ByteSpan code_image, EnclaveConfig config,
                                         CostModel costs) {
  config.validate();
  if (code_image.empty()) raise(Errc::ConfigInvalid, "code image is empty");
  if (config.tcs_count > 64) raise(Errc::ConfigInvalid, "at most 64 thread control structures");
  if (config.epc_limit < costs.page_size) raise(Errc::ConfigInvalid, "EPC smaller than one page");
  Measurement m = measure(code_image, config);
  return std::unique_ptr<Enclave>(new Enclave(std::move(config), costs, m));
}

Enclave::Enclave(EnclaveConfig config, CostModel costs, Measurement m)
    : config_(std::move(config)),
      costs_(costs),
      measurement_(m),
      paging_(config_.epc_limit, costs.page_size, costs.cost_hit, costs.cost_miss),
      heap_(config_.heap_limit, costs.page_size) {
  provisioned_ = config_.fs_key.has_value();
}

void Enclave::load_code(ByteSpan) {
  raise(Errc::AlreadyFinalized, "enclave " + measurement_.hex().substr(0, 16) +
                                    " is finalized; code cannot be added");
}

std::uint64_t Enclave::mem_access(std::uint64_t address, std::uint64_t len, AccessKind) {
  if (address >= config_.heap_limit || len > config_.heap_limit - address) {
    raise(Errc::OutOfBounds, "access [" + std::to_string(address) + ", +" + std::to_string(len) +
                                 ") beyond heap limit " + std::to_string(config_.heap_limit));
  }
  std::lock_guard lk(mu_);
  std::uint64_t cost = paging_.access(address, len, charges_paging());
  ledger_.paging += cost;
  return cost;
}

void Enclave::charge_compute(std::uint64_t macs) {
  std::lock_guard lk(mu_);
  compute_macs_ += macs;
}

void Enclave::charge_crypto(std::uint64_t bytes) {
  if (!shields_active()) return;
  std::lock_guard lk(mu_);
  crypto_bytes_ += bytes;
}

void Enclave::charge_syscall(std::uint64_t units) {
  std::lock_guard lk(mu_);
  ledger_.syscall += units;
}

void Enclave::charge_idle(std::uint64_t units) {
  std::lock_guard lk(mu_);
  ledger_.idle += units;
}

void Enclave::charge_transition_pair() {
  record_exit();
  record_entry();
}

void Enclave::record_exit() {
  std::lock_guard lk(mu_);
  ++transitions_.sync_exits;
  if (charges_paging()) ledger_.transitions += costs_.cost_per_transition;
}

void Enclave::record_entry() {
  std::lock_guard lk(mu_);
  ++transitions_.sync_entries;
  if (charges_paging()) ledger_.transitions += costs_.cost_per_transition;
}

CostLedger Enclave::ledger_locked() const {
  CostLedger l = ledger_;
  l.compute = compute_macs_ / costs_.macs_per_unit;
  l.crypto = crypto_bytes_ / costs_.crypto_bytes_per_unit;
  return l;
}

std::uint64_t Enclave::now() const {
  std::lock_guard lk(mu_);
  return ledger_locked().total();
}

CostLedger Enclave::ledger() const {
  std::lock_guard lk(mu_);
  return ledger_locked();
}

TransitionCounter Enclave::transitions() const {
  std::lock_guard lk(mu_);
  return transitions_;
}

PagingCounters Enclave::paging_counters() const {
  std::lock_guard lk(mu_);
  return paging_.counters();
}

std::uint64_t Enclave::resident_pages() const {
  std::lock_guard lk(mu_);
  return paging_.resident_pages();
}

std::uint64_t Enclave::allocate(std::uint64_t bytes) {
  std::lock_guard lk(mu_);
  return heap_.allocate(bytes);
}

void Enclave::release(std::uint64_t address) {
  std::lock_guard lk(mu_);
  heap_.release(address);
}

std::uint64_t Enclave::heap_high_water() const {
  std::lock_guard lk(mu_);
  return heap_.high_water();
}

std::uint64_t Enclave::heap_live_bytes() const {
  std::lock_guard lk(mu_);
  return heap_.live_bytes();
}

std::uint32_t Enclave::acquire_tcs() {
  std::lock_guard lk(mu_);
  for (std::uint32_t i = 0; i < config_.tcs_count; ++i) {
    if ((tcs_mask_ >> i & 1) == 0) {
      tcs_mask_ |= std::uint64_t{1} << i;
      ++tcs_used_;
      return i;
    }
  }
  raise(Errc::NoFreeTcs, "all " + std::to_string(config_.tcs_count) +
                             " thread control structures are in use");
}

void Enclave::release_tcs(std::uint32_t slot) {
  std::lock_guard lk(mu_);
  if (slot >= config_.tcs_count || (tcs_mask_ >> slot & 1) == 0) {
    raise(Errc::InvalidArgument, "release of a thread control structure that is not held");
  }
  tcs_mask_ &= ~(std::uint64_t{1} << slot);
  --tcs_used_;
}

std::uint32_t Enclave::tcs_in_use() const {
  std::lock_guard lk(mu_);
  return tcs_used_;
}

void Enclave::record_syscall(bridge::SyscallClass cls, std::uint64_t time, bool via_bridge) {
  std::lock_guard lk(mu_);
  profile_.record(cls, time, via_bridge);
}

bridge::SyscallProfile Enclave::profile() const {
  std::lock_guard lk(mu_);
  return profile_;
}

void Enclave::provision(const SecretBundle& secrets) {
  std::lock_guard lk(mu_);
  if (provisioned_) raise(Errc::AlreadyProvisioned, "enclave secrets were already provisioned");
  config_.fs_key = secrets.fs_key;
  if (!secrets.identity_seed.empty()) {
    config_.tls_identity = crypto::SigningKeyPair::from_seed(secrets.identity_seed);
  }
  provisioned_ = true;
}

bool Enclave::provisioned() const {
  std::lock_guard lk(mu_);
  return provisioned_;
}

std::optional<crypto::SymmetricKey> Enclave::fs_key() const {
  std::lock_guard lk(mu_);
  return config_.fs_key;
}

std::optional<crypto::SigningKeyPair> Enclave::tls_identity() const {
  std::lock_guard lk(mu_);
  return config_.tls_identity;
}

void Enclave::reset_accounting() {
  std::lock_guard lk(mu_);
  paging_.reset();
  ledger_ = {};
  compute_macs_ = 0;
  crypto_bytes_ = 0;
  transitions_ = {};
  profile_ = {};
}

}  // namespace shieldrun::enclave
