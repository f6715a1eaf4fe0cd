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
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "shieldrun/bridge/profile.hpp"
#include "shieldrun/common/bytes.hpp"
#include "shieldrun/common/crypto.hpp"
#include "shieldrun/enclave/config.hpp"
#include "shieldrun/enclave/costs.hpp"
#include "shieldrun/enclave/heap.hpp"
#include "shieldrun/enclave/paging.hpp"

namespace shieldrun::enclave {

struct Measurement {
  crypto::Digest digest{};

  std::string hex() const { return to_hex(digest); }
  static Measurement from_hex(std::string_view hex);
  bool operator==(const Measurement&) const = default;
};

// SHA-256 over the code image followed by the canonical non-secret config.
Measurement measure(ByteSpan code_image, const EnclaveConfig& config);

struct TransitionCounter {
  std::uint64_t sync_exits = 0;
  std::uint64_t sync_entries = 0;
};

// Where the virtual clock's time went.
struct CostLedger {
  std::uint64_t compute = 0;
  std::uint64_t paging = 0;
  std::uint64_t transitions = 0;
  std::uint64_t crypto = 0;
  std::uint64_t syscall = 0;  // synchronous service time only
  std::uint64_t idle = 0;

  std::uint64_t total() const { return compute + paging + transitions + crypto + syscall + idle; }
};

// Secrets delivered by the attestation service.
struct SecretBundle {
  crypto::SymmetricKey fs_key;
  Bytes identity_seed;  // Ed25519 seed of the channel identity
  std::string policy_text;
};

// A simulated enclave: fixed measurement, bounded EPC with paging costs,
// thread control structures and a virtual clock. All accounting methods
// are safe to call from any runtime thread.
class Enclave {
 public:
  static std::unique_ptr<Enclave> create(ByteSpan code_image, EnclaveConfig config,
                                         CostModel costs = {});

  Enclave(const Enclave&) = delete;
  Enclave& operator=(const Enclave&) = delete;

  // Always raises AlreadyFinalized: the image is sealed at creation.
  void load_code(ByteSpan code);

  const Measurement& measurement() const { return measurement_; }
  const EnclaveConfig& config() const { return config_; }
  const CostModel& costs() const { return costs_; }
  ExecMode mode() const { return config_.mode; }
  bool charges_paging() const { return config_.mode == ExecMode::HardwareSim; }
  bool shields_active() const { return config_.shields_active(); }

  // Charges cost_hit / cost_miss per page in hardware-sim; other modes only
  // track residency. OutOfBounds past heap_limit.
  std::uint64_t mem_access(std::uint64_t address, std::uint64_t len, AccessKind kind);
  void charge_compute(std::uint64_t macs);
  void charge_crypto(std::uint64_t bytes);
  void charge_syscall(std::uint64_t units);
  void charge_idle(std::uint64_t units);
  // One exit followed by one entry.
  void charge_transition_pair();
  void record_exit();
  void record_entry();

  std::uint64_t now() const;
  CostLedger ledger() const;
  TransitionCounter transitions() const;
  PagingCounters paging_counters() const;
  std::uint64_t resident_pages() const;

  // Heap address space.
  std::uint64_t allocate(std::uint64_t bytes);
  void release(std::uint64_t address);
  std::uint64_t heap_high_water() const;
  std::uint64_t heap_live_bytes() const;

  // Thread control structures. acquire raises NoFreeTcs when all are taken.
  std::uint32_t acquire_tcs();
  void release_tcs(std::uint32_t slot);
  std::uint32_t tcs_in_use() const;

  void record_syscall(bridge::SyscallClass cls, std::uint64_t time, bool via_bridge);
  bridge::SyscallProfile profile() const;

  // Secret provisioning happens exactly once (AlreadyProvisioned after).
  void provision(const SecretBundle& secrets);
  bool provisioned() const;
  std::optional<crypto::SymmetricKey> fs_key() const;
  std::optional<crypto::SigningKeyPair> tls_identity() const;

  // Resets clock, ledger, counters, residency and profile. Used between a
  // setup phase and a measured phase.
  void reset_accounting();

 private:
  Enclave(EnclaveConfig config, CostModel costs, Measurement m);
  CostLedger ledger_locked() const;

  EnclaveConfig config_;
  CostModel costs_;
  Measurement measurement_;

  mutable std::mutex mu_;
  PagingModel paging_;
  EnclaveHeap heap_;
  CostLedger ledger_;
  // Compute and crypto accumulate raw amounts and convert on read so that
  // many small charges do not round up individually.
  std::uint64_t compute_macs_ = 0;
  std::uint64_t crypto_bytes_ = 0;
  TransitionCounter transitions_;
  bridge::SyscallProfile profile_;
  std::uint64_t tcs_mask_ = 0;
  std::uint32_t tcs_used_ = 0;
  bool provisioned_ = false;
};

}  // namespace shieldrun::enclave
