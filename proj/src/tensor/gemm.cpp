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

#include "shieldrun/tensor/gemm.hpp"

#include <algorithm>
#include <cstring>
#include <vector>

#include "shieldrun/common/error.hpp"

namespace shieldrun::tensor {

namespace {

constexpr int MR = 6;
constexpr int NR = 32;
constexpr int KC = 256;
constexpr int MC = 96;
constexpr int NC = 2048;

typedef float v16 __attribute__((vector_size(64)));
typedef float v16u __attribute__((vector_size(64), aligned(4)));

inline v16 load(const float* p) { return *reinterpret_cast<const v16u*>(p); }
inline void store(float* p, v16 v) { *reinterpret_cast<v16u*>(p) = v; }

struct PackBuffers {
  std::vector<float> a, b;
};

PackBuffers& buffers() {
  static thread_local PackBuffers pb;
  return pb;
}

// Ap holds ceil(mc/MR) panels, each kc x MR, zero padded.
void pack_a(bool ta, const float* A, int lda, int i0, int mc, int k0, int kc, float* Ap) {
  for (int ip = 0; ip < mc; ip += MR) {
    int mr = std::min(MR, mc - ip);
    float* dst = Ap + static_cast<std::size_t>(ip) * kc;
    for (int k = 0; k < kc; ++k) {
      int i = 0;
      for (; i < mr; ++i) {
        int r = i0 + ip + i, c = k0 + k;
        dst[k * MR + i] = ta ? A[static_cast<std::size_t>(c) * lda + r] : A[static_cast<std::size_t>(r) * lda + c];
      }
      for (; i < MR; ++i) dst[k * MR + i] = 0.0f;
    }
  }
}

// Bp holds ceil(nc/NR) panels, each kc x NR, zero padded.
void pack_b(bool tb, const float* B, int ldb, int k0, int kc, int j0, int nc, float* Bp) {
  for (int jp = 0; jp < nc; jp += NR) {
    int nr = std::min(NR, nc - jp);
    float* dst = Bp + static_cast<std::size_t>(jp) * kc;
    for (int k = 0; k < kc; ++k) {
      float* row = dst + k * NR;
      if (!tb && nr == NR) {
        std::memcpy(row, B + static_cast<std::size_t>(k0 + k) * ldb + j0 + jp, NR * sizeof(float));
        continue;
      }
      int j = 0;
      for (; j < nr; ++j) {
        int r = k0 + k, c = j0 + jp + j;
        row[j] = tb ? B[static_cast<std::size_t>(c) * ldb + r] : B[static_cast<std::size_t>(r) * ldb + c];
      }
      for (; j < NR; ++j) row[j] = 0.0f;
    }
  }
}

// C[mr x nr] += Ap * Bp over kc.
void micro_kernel(int kc, const float* a, const float* b, float* C, int ldc, int mr, int nr) {
  v16 c00{}, c01{}, c10{}, c11{}, c20{}, c21{}, c30{}, c31{}, c40{}, c41{}, c50{}, c51{};
  for (int k = 0; k < kc; ++k) {
    v16 b0 = load(b), b1 = load(b + 16);
    float a0 = a[0], a1 = a[1], a2 = a[2], a3 = a[3], a4 = a[4], a5 = a[5];
    c00 += a0 * b0;
    c01 += a0 * b1;
    c10 += a1 * b0;
    c11 += a1 * b1;
    c20 += a2 * b0;
    c21 += a2 * b1;
    c30 += a3 * b0;
    c31 += a3 * b1;
    c40 += a4 * b0;
    c41 += a4 * b1;
    c50 += a5 * b0;
    c51 += a5 * b1;
    a += MR;
    b += NR;
  }
  v16 acc[MR][2] = {{c00, c01}, {c10, c11}, {c20, c21}, {c30, c31}, {c40, c41}, {c50, c51}};
  if (nr == NR) {
    for (int i = 0; i < mr; ++i) {
      float* row = C + static_cast<std::size_t>(i) * ldc;
      store(row, load(row) + acc[i][0]);
      store(row + 16, load(row + 16) + acc[i][1]);
    }
    return;
  }
  alignas(64) float tile[MR][NR];
  for (int i = 0; i < MR; ++i) {
    store(tile[i], acc[i][0]);
    store(tile[i] + 16, acc[i][1]);
  }
  for (int i = 0; i < mr; ++i) {
    float* row = C + static_cast<std::size_t>(i) * ldc;
    for (int j = 0; j < nr; ++j) row[j] += tile[i][j];
  }
}

}  // namespace

void sgemm(bool trans_a, bool trans_b, int M, int N, int K, const float* A, int lda, const float* B,
           int ldb, float beta, float* C, int ldc) {
  if (beta != 0.0f && beta != 1.0f) raise(Errc::InvalidArgument, "sgemm beta must be 0 or 1");
  if (M <= 0 || N <= 0) return;
  if (beta == 0.0f) {
    for (int i = 0; i < M; ++i) std::fill_n(C + static_cast<std::size_t>(i) * ldc, N, 0.0f);
  }
  if (K <= 0) return;
  auto& pb = buffers();
  pb.a.resize(static_cast<std::size_t>(MC + MR) * KC);
  pb.b.resize(static_cast<std::size_t>(NC + NR) * KC);
  for (int jc = 0; jc < N; jc += NC) {
    int nc = std::min(NC, N - jc);
    for (int pc = 0; pc < K; pc += KC) {
      int kc = std::min(KC, K - pc);
      pack_b(trans_b, B, ldb, pc, kc, jc, nc, pb.b.data());
      for (int ic = 0; ic < M; ic += MC) {
        int mc = std::min(MC, M - ic);
        pack_a(trans_a, A, lda, ic, mc, pc, kc, pb.a.data());
        for (int jr = 0; jr < nc; jr += NR) {
          int nr = std::min(NR, nc - jr);
          const float* bp = pb.b.data() + static_cast<std::size_t>(jr) * kc;
          for (int ir = 0; ir < mc; ir += MR) {
            int mr = std::min(MR, mc - ir);
            micro_kernel(kc, pb.a.data() + static_cast<std::size_t>(ir) * kc, bp,
                         C + static_cast<std::size_t>(ic + ir) * ldc + jc + jr, ldc, mr, nr);
          }
        }
      }
    }
  }
}

void sgemm_reference(bool trans_a, bool trans_b, int M, int N, int K, const float* A, int lda,
                     const float* B, int ldb, float beta, float* C, int ldc) {
  for (int i = 0; i < M; ++i) {
    for (int j = 0; j < N; ++j) {
      double acc = beta == 0.0f ? 0.0 : C[static_cast<std::size_t>(i) * ldc + j];
      for (int k = 0; k < K; ++k) {
        float a = trans_a ? A[static_cast<std::size_t>(k) * lda + i] : A[static_cast<std::size_t>(i) * lda + k];
        float b = trans_b ? B[static_cast<std::size_t>(j) * ldb + k] : B[static_cast<std::size_t>(k) * ldb + j];
        acc += static_cast<double>(a) * b;
      }
      C[static_cast<std::size_t>(i) * ldc + j] = static_cast<float>(acc);
    }
  }
}

}  // namespace shieldrun::tensor
