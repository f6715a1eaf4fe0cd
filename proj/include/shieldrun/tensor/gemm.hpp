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

namespace shieldrun::tensor {

// Row-major single-precision GEMM:
//   C[M x N] = op(A) * op(B) + beta * C
// op(A) is M x K (A stored K x M when trans_a), op(B) is K x N (B stored
// N x K when trans_b). beta must be 0 or 1. The summation order depends only
// on M, N and K, so equal inputs give bitwise-equal outputs.
void sgemm(bool trans_a, bool trans_b, int M, int N, int K, const float* A, int lda, const float* B,
           int ldb, float beta, float* C, int ldc);

// Straightforward triple loop with double accumulation; test oracle.
void sgemm_reference(bool trans_a, bool trans_b, int M, int N, int K, const float* A, int lda,
                     const float* B, int ldb, float beta, float* C, int ldc);

}  // namespace shieldrun::tensor
