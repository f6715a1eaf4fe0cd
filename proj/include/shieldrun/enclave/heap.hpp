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
#include <map>

namespace shieldrun::enclave {

// Address-space bookkeeping for the enclave heap. Only offsets are handed
// out; the bytes themselves live in ordinary host objects. The offsets feed
// the paging model so that tensors, chunk caches and syscall buffers compete
// for the same EPC.
class EnclaveHeap {
 public:
  EnclaveHeap(std::uint64_t heap_limit, std::uint64_t page_size);

  // First fit. Blocks of at least one page are page aligned, smaller blocks
  // are 64-byte aligned. Raises OutOfMemory when nothing fits.
  std::uint64_t allocate(std::uint64_t bytes);
  void release(std::uint64_t address);

  std::uint64_t limit() const { return limit_; }
  std::uint64_t live_bytes() const { return live_; }
  std::uint64_t peak_live_bytes() const { return peak_live_; }
  // Highest address ever handed out; the minimum heap that would have
  // served the same allocation sequence.
  std::uint64_t high_water() const { return high_water_; }
  std::size_t live_blocks() const { return used_.size(); }

 private:
  std::uint64_t limit_;
  std::uint64_t page_size_;
  std::map<std::uint64_t, std::uint64_t> free_;  // offset -> size
  std::map<std::uint64_t, std::uint64_t> used_;  // offset -> size
  std::uint64_t live_ = 0;
  std::uint64_t peak_live_ = 0;
  std::uint64_t high_water_ = 0;
};

}  // namespace shieldrun::enclave
