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

#include "shieldrun/enclave/heap.hpp"

#include <algorithm>

#include "shieldrun/common/error.hpp"

namespace shieldrun::enclave {

namespace {
std::uint64_t align_up(std::uint64_t v, std::uint64_t a) { return (v + a - 1) / a * a; }
}  // namespace

EnclaveHeap::EnclaveHeap(std::uint64_t heap_limit, std::uint64_t page_size)
    : limit_(heap_limit), page_size_(page_size) {
  if (heap_limit == 0) raise(Errc::ConfigInvalid, "heap limit must be positive");
  free_.emplace(0, heap_limit);
}

std::uint64_t EnclaveHeap::allocate(std::uint64_t bytes) {
  if (bytes == 0) bytes = 1;
  const std::uint64_t alignment = bytes >= page_size_ ? page_size_ : 64;
  const std::uint64_t size = align_up(bytes, 64);

  for (auto it = free_.begin(); it != free_.end(); ++it) {
    const std::uint64_t start = it->first;
    const std::uint64_t end = it->first + it->second;
    const std::uint64_t aligned = align_up(start, alignment);
    if (aligned + size > end) continue;

    free_.erase(it);
    if (aligned > start) free_.emplace(start, aligned - start);
    if (aligned + size < end) free_.emplace(aligned + size, end - aligned - size);
    used_.emplace(aligned, size);
    live_ += size;
    peak_live_ = std::max(peak_live_, live_);
    high_water_ = std::max(high_water_, aligned + size);
    return aligned;
  }
  raise(Errc::OutOfMemory, "enclave heap exhausted: requested " + std::to_string(bytes) +
                               " bytes with " + std::to_string(limit_ - live_) + " of " +
                               std::to_string(limit_) + " free");
}

void EnclaveHeap::release(std::uint64_t address) {
  auto it = used_.find(address);
  if (it == used_.end()) raise(Errc::InvalidArgument, "release of unknown heap block");
  std::uint64_t start = it->first;
  std::uint64_t size = it->second;
  used_.erase(it);
  live_ -= size;

  auto next = free_.lower_bound(start);
  if (next != free_.end() && start + size == next->first) {
    size += next->second;
    next = free_.erase(next);
  }
  if (next != free_.begin()) {
    auto prev = std::prev(next);
    if (prev->first + prev->second == start) {
      start = prev->first;
      size += prev->second;
      free_.erase(prev);
    }
  }
  free_.emplace(start, size);
}

}  // namespace shieldrun::enclave
