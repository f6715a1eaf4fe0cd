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

#include "shieldrun/enclave/paging.hpp"

#include "shieldrun/common/error.hpp"

namespace shieldrun::enclave {

PagingModel::PagingModel(std::uint64_t epc_limit, std::uint64_t page_size,
                         std::uint64_t cost_hit, std::uint64_t cost_miss)
    : epc_limit_(epc_limit),
      page_size_(page_size),
      cost_hit_(cost_hit),
      cost_miss_(cost_miss),
      capacity_(page_size == 0 ? 0 : epc_limit / page_size) {
  if (page_size == 0) raise(Errc::ConfigInvalid, "page size must be positive");
  if (capacity_ == 0) raise(Errc::ConfigInvalid, "EPC smaller than one page");
}

void PagingModel::ensure_slot(std::uint64_t page) {
  if (page >= kNil) raise(Errc::OutOfBounds, "page id exceeds model range");
  if (page < prev_.size()) return;
  std::size_t n = std::max<std::size_t>(page + 1, prev_.size() * 2);
  prev_.resize(n, kNil);
  next_.resize(n, kNil);
  is_resident_.resize(n, 0);
}

void PagingModel::unlink(std::uint32_t page) {
  std::uint32_t p = prev_[page];
  std::uint32_t n = next_[page];
  if (p != kNil) next_[p] = n; else head_ = n;
  if (n != kNil) prev_[n] = p; else tail_ = p;
  prev_[page] = next_[page] = kNil;
}

void PagingModel::push_front(std::uint32_t page) {
  prev_[page] = kNil;
  next_[page] = head_;
  if (head_ != kNil) prev_[head_] = page;
  head_ = page;
  if (tail_ == kNil) tail_ = page;
}

std::uint64_t PagingModel::touch_page(std::uint64_t page_id, bool charge) {
  ensure_slot(page_id);
  auto page = static_cast<std::uint32_t>(page_id);
  if (is_resident_[page]) {
    ++counters_.hits;
    if (head_ != page) {
      unlink(page);
      push_front(page);
    }
    return charge ? cost_hit_ : 0;
  }
  ++counters_.misses;
  if (resident_count_ == capacity_) {
    std::uint32_t victim = tail_;
    unlink(victim);
    is_resident_[victim] = 0;
    --resident_count_;
    ++counters_.evictions;
  }
  is_resident_[page] = 1;
  push_front(page);
  ++resident_count_;
  return charge ? cost_miss_ : 0;
}

std::uint64_t PagingModel::access(std::uint64_t address, std::uint64_t len, bool charge) {
  if (len == 0) return 0;
  std::uint64_t first = address / page_size_;
  std::uint64_t last = (address + len - 1) / page_size_;
  std::uint64_t cost = 0;
  for (std::uint64_t p = first; p <= last; ++p) cost += touch_page(p, charge);
  return cost;
}

bool PagingModel::resident(std::uint64_t page) const {
  return page < is_resident_.size() && is_resident_[page] != 0;
}

void PagingModel::reset() {
  prev_.clear();
  next_.clear();
  is_resident_.clear();
  head_ = tail_ = kNil;
  resident_count_ = 0;
  counters_ = {};
}

}  // namespace shieldrun::enclave
