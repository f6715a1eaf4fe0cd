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
#include <vector>

namespace shieldrun::enclave {

enum class AccessKind { Read, Write };

struct PagingCounters {
  std::uint64_t hits = 0;
  std::uint64_t misses = 0;
  std::uint64_t evictions = 0;

  std::uint64_t accesses() const { return hits + misses; }
};

// Resident-page set of the EPC with least-recently-used eviction.
// Invariant: resident_pages() * page_size() <= epc_limit().
class PagingModel {
 public:
  PagingModel(std::uint64_t epc_limit, std::uint64_t page_size, std::uint64_t cost_hit,
              std::uint64_t cost_miss);

  // Touches every page overlapping [address, address + len). Returns the
  // cost of the access; counters always update, `charge` only gates the
  // returned cost.
  std::uint64_t access(std::uint64_t address, std::uint64_t len, bool charge = true);
  std::uint64_t touch_page(std::uint64_t page, bool charge = true);

  bool resident(std::uint64_t page) const;
  std::uint64_t resident_pages() const { return resident_count_; }
  std::uint64_t capacity_pages() const { return capacity_; }
  std::uint64_t page_size() const { return page_size_; }
  std::uint64_t epc_limit() const { return epc_limit_; }
  const PagingCounters& counters() const { return counters_; }

  // Drops the resident set and zeroes the counters.
  void reset();
  void reset_counters() { counters_ = {}; }

 private:
  static constexpr std::uint32_t kNil = 0xffffffffu;

  void ensure_slot(std::uint64_t page);
  void unlink(std::uint32_t page);
  void push_front(std::uint32_t page);

  std::uint64_t epc_limit_;
  std::uint64_t page_size_;
  std::uint64_t cost_hit_;
  std::uint64_t cost_miss_;
  std::uint64_t capacity_;

  // Intrusive doubly-linked recency list indexed by page id; head is the most
  // recently used page.
  std::vector<std::uint32_t> prev_;
  std::vector<std::uint32_t> next_;
  std::vector<std::uint8_t> is_resident_;
  std::uint32_t head_ = kNil;
  std::uint32_t tail_ = kNil;
  std::uint64_t resident_count_ = 0;
  PagingCounters counters_;
};

}  // namespace shieldrun::enclave
