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

#include "shieldrun/tensor/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "shieldrun/tensor/gemm.hpp"

namespace shieldrun::tensor::ops {

namespace {

void mismatch(const std::string& what, const Tensor& a, const Tensor& b) {
  raise(Errc::ShapeMismatch, what + ": " + shape_str(a.shape) + " vs " + shape_str(b.shape));
}

void expect_rank(const Tensor& t, std::size_t rank, const std::string& what) {
  if (t.rank() != rank) {
    raise(Errc::ShapeMismatch, what + ": expected rank " + std::to_string(rank) + ", got " + shape_str(t.shape));
  }
}

std::int64_t samples_of(const Tensor& t) { return t.rank() == 0 ? 1 : t.dim(0); }

// Touches sample s of n.
void touch_sample(ExecContext& ctx, const Tensor& t, std::int64_t n, std::int64_t s, bool write) {
  const std::int64_t per = t.size() / n;
  touch_slice(ctx, t, s * per, per, write);
}

void prepare_partials(Exec& ex, const std::string& key, std::int64_t n, std::size_t floats) {
  const unsigned chunks = std::min<std::int64_t>(ex.workers(), n);
  for (unsigned w = 1; w < chunks; ++w) ex.partial(w, key, floats);
}

// Adds worker partials 1.. into `into`.
void reduce_partials(Frame& f, const std::string& key, std::int64_t n, Tensor& into) {
  Exec& ex = f.exec();
  const unsigned chunks = std::min<std::int64_t>(ex.workers(), n);
  const std::size_t floats = into.data.size();
  for (unsigned w = 1; w < chunks; ++w) {
    Buffer& p = ex.partial(w, key, floats);
    for (std::size_t i = 0; i < floats; ++i) into.data[i] += p.data[i];
    touch_buffer(f.ctx(), p, floats, false);
    touch_all(f.ctx(), into, true);
    f.ctx().compute(floats);
  }
}

struct ConvDims {
  int N, H, W, C, KH, KW, O;
  int HW() const { return H * W; }
  int KKC() const { return KH * KW * C; }
};

ConvDims conv_dims(const Tensor& x, const Tensor& w) {
  expect_rank(x, 4, "conv2d input");
  expect_rank(w, 4, "conv2d filter");
  if (w.dim(2) != x.dim(3)) mismatch("conv2d channels", x, w);
  return {static_cast<int>(x.dim(0)), static_cast<int>(x.dim(1)), static_cast<int>(x.dim(2)),
          static_cast<int>(x.dim(3)), static_cast<int>(w.dim(0)), static_cast<int>(w.dim(1)),
          static_cast<int>(w.dim(3))};
}

// col[(oy*W + ox), (ky*KW + kx)*C + c] = x[oy + ky - pt, ox + kx - pl, c]
void im2col(const ConvDims& d, const float* x, float* col) {
  const int pt = (d.KH - 1) / 2, pl = (d.KW - 1) / 2;
  const int kkc = d.KKC();
  for (int oy = 0; oy < d.H; ++oy) {
    for (int ox = 0; ox < d.W; ++ox) {
      float* row = col + static_cast<std::size_t>(oy * d.W + ox) * kkc;
      for (int ky = 0; ky < d.KH; ++ky) {
        const int iy = oy + ky - pt;
        float* dst = row + ky * d.KW * d.C;
        if (iy < 0 || iy >= d.H) {
          std::fill_n(dst, d.KW * d.C, 0.0f);
          continue;
        }
        for (int kx = 0; kx < d.KW; ++kx) {
          const int ix = ox + kx - pl;
          if (ix < 0 || ix >= d.W) {
            std::fill_n(dst + kx * d.C, d.C, 0.0f);
          } else {
            std::memcpy(dst + kx * d.C, x + (static_cast<std::size_t>(iy) * d.W + ix) * d.C,
                        d.C * sizeof(float));
          }
        }
      }
    }
  }
}

void col2im(const ConvDims& d, const float* col, float* x) {
  const int pt = (d.KH - 1) / 2, pl = (d.KW - 1) / 2;
  const int kkc = d.KKC();
  std::fill_n(x, static_cast<std::size_t>(d.HW()) * d.C, 0.0f);
  for (int oy = 0; oy < d.H; ++oy) {
    for (int ox = 0; ox < d.W; ++ox) {
      const float* row = col + static_cast<std::size_t>(oy * d.W + ox) * kkc;
      for (int ky = 0; ky < d.KH; ++ky) {
        const int iy = oy + ky - pt;
        if (iy < 0 || iy >= d.H) continue;
        for (int kx = 0; kx < d.KW; ++kx) {
          const int ix = ox + kx - pl;
          if (ix < 0 || ix >= d.W) continue;
          const float* src = row + (ky * d.KW + kx) * d.C;
          float* dst = x + (static_cast<std::size_t>(iy) * d.W + ix) * d.C;
          for (int c = 0; c < d.C; ++c) dst[c] += src[c];
        }
      }
    }
  }
}

}  // namespace

Tensor matmul(Frame& f, const Tensor& a, const Tensor& b) {
  expect_rank(a, 2, "matmul lhs");
  expect_rank(b, 2, "matmul rhs");
  if (a.dim(1) != b.dim(0)) mismatch("matmul", a, b);
  const int M = a.dim(0), K = a.dim(1), N = b.dim(1);
  Tensor y = f.make({M, N});
  ExecContext& ctx = f.ctx();
  f.exec().parallel_for(M, [&](unsigned, int r0, int r1) {
    sgemm(false, false, r1 - r0, N, K, a.ptr() + static_cast<std::size_t>(r0) * K, K, b.ptr(), N, 0.0f,
          y.ptr() + static_cast<std::size_t>(r0) * N, N);
    for (int r = r0; r < r1; ++r) {
      touch_sample(ctx, a, M, r, false);
      touch_all(ctx, b, false);
      touch_sample(ctx, y, M, r, true);
    }
    ctx.compute(static_cast<std::uint64_t>(r1 - r0) * N * K);
  });
  return y;
}

void matmul_backward(Frame& f, const Tensor& a, const Tensor& b, const Tensor& dy, Tensor* da,
                     Tensor* db, const std::string& key) {
  expect_rank(a, 2, "matmul lhs");
  expect_rank(b, 2, "matmul rhs");
  const int M = a.dim(0), K = a.dim(1), N = b.dim(1);
  expect_shape(dy, {M, N}, "matmul gradient");
  if (da) *da = f.make({M, K});
  if (db) {
    *db = f.make({K, N});
    prepare_partials(f.exec(), key, M, static_cast<std::size_t>(K) * N);
  }
  ExecContext& ctx = f.ctx();
  Exec& ex = f.exec();
  f.exec().parallel_for(M, [&](unsigned w, int r0, int r1) {
    const int rows = r1 - r0;
    const float* dyr = dy.ptr() + static_cast<std::size_t>(r0) * N;
    if (da) sgemm(false, true, rows, K, N, dyr, N, b.ptr(), N, 0.0f, da->ptr() + static_cast<std::size_t>(r0) * K, K);
    Buffer* part = nullptr;
    if (db) {
      float* target = db->ptr();
      if (w > 0) {
        part = &ex.partial(w, key, static_cast<std::size_t>(K) * N);
        std::fill(part->data.begin(), part->data.end(), 0.0f);
        target = part->data.data();
      }
      sgemm(true, false, K, N, rows, a.ptr() + static_cast<std::size_t>(r0) * K, K, dyr, N, 1.0f, target, N);
    }
    for (int r = r0; r < r1; ++r) {
      touch_sample(ctx, dy, M, r, false);
      if (da) {
        touch_all(ctx, b, false);
        touch_sample(ctx, *da, M, r, true);
      }
      if (db) {
        touch_sample(ctx, a, M, r, false);
        if (part) touch_buffer(ctx, *part, db->data.size(), true);
        else touch_all(ctx, *db, true);
      }
    }
    ctx.compute(static_cast<std::uint64_t>(rows) * K * N * ((da ? 1 : 0) + (db ? 1 : 0)));
  });
  if (db) reduce_partials(f, key, M, *db);
}

Tensor add(Frame& f, const Tensor& a, const Tensor& b) {
  const bool same = a.shape == b.shape;
  const bool bias = !same && b.rank() <= a.rank() &&
                    std::equal(b.shape.begin(), b.shape.end(), a.shape.end() - b.rank());
  if (!same && !bias) mismatch("add", a, b);
  Tensor y = f.make(a.shape);
  const std::size_t bn = b.data.size();
  for (std::size_t r = 0; r < y.data.size(); r += bn) {
    const float* ar = a.ptr() + r;
    float* yr = y.ptr() + r;
    for (std::size_t i = 0; i < bn; ++i) yr[i] = ar[i] + b.data[i];
  }
  ExecContext& ctx = f.ctx();
  const std::int64_t n = samples_of(a);
  for (std::int64_t s = 0; s < n; ++s) {
    touch_sample(ctx, a, n, s, false);
    if (same) touch_sample(ctx, b, n, s, false);
    else touch_all(ctx, b, false);
    touch_sample(ctx, y, n, s, true);
  }
  ctx.compute(y.data.size());
  return y;
}

void add_backward(Frame& f, const Tensor& a, const Tensor& b, const Tensor& dy, Tensor* da, Tensor* db) {
  expect_shape(dy, a.shape, "add gradient");
  ExecContext& ctx = f.ctx();
  if (da) {
    *da = f.make(a.shape);
    da->data = dy.data;
    touch_all(ctx, dy, false);
    touch_all(ctx, *da, true);
  }
  if (db) {
    *db = f.make(b.shape);
    const std::size_t bn = b.data.size();
    for (std::size_t r = 0; r < dy.data.size(); r += bn) {
      const float* g = dy.ptr() + r;
      for (std::size_t i = 0; i < bn; ++i) db->data[i] += g[i];
    }
    const std::int64_t n = samples_of(a);
    const bool same = a.shape == b.shape;
    for (std::int64_t s = 0; s < n; ++s) {
      touch_sample(ctx, dy, n, s, false);
      if (same) touch_sample(ctx, *db, n, s, true);
      else touch_all(ctx, *db, true);
    }
    ctx.compute(dy.data.size());
  }
}

namespace {

// The arithmetic runs on groups of samples so the filter is packed once per
// group; the trace still covers one sample at a time.
int conv_group(const ConvDims& d) {
  const std::size_t per = static_cast<std::size_t>(d.HW()) * d.KKC();
  return static_cast<int>(std::clamp<std::size_t>((std::size_t{1} << 21) / per, 1, 8));
}

std::vector<float>& group_buffer(std::size_t floats) {
  static thread_local std::vector<float> buf;
  if (buf.size() < floats) buf.resize(floats);
  return buf;
}

}  // namespace

Tensor conv2d(Frame& f, const Tensor& x, const Tensor& w) {
  const ConvDims d = conv_dims(x, w);
  Tensor y = f.make({d.N, d.H, d.W, d.O});
  Exec& ex = f.exec();
  ExecContext& ctx = f.ctx();
  const std::size_t col_floats = static_cast<std::size_t>(d.HW()) * d.KKC();
  const int group = conv_group(d);
  for (unsigned k = 0; k < std::min<unsigned>(ex.workers(), d.N); ++k) ex.scratch(k, col_floats);
  ex.parallel_for(d.N, [&](unsigned worker, int s0, int s1) {
    Buffer& sc = ex.scratch(worker, col_floats);
    for (int g0 = s0; g0 < s1; g0 += group) {
      const int g1 = std::min(s1, g0 + group);
      float* col = group_buffer(col_floats * (g1 - g0)).data();
      for (int s = g0; s < g1; ++s) {
        im2col(d, x.ptr() + static_cast<std::size_t>(s) * d.HW() * d.C, col + (s - g0) * col_floats);
      }
      sgemm(false, false, d.HW() * (g1 - g0), d.O, d.KKC(), col, d.KKC(), w.ptr(), d.O, 0.0f,
            y.ptr() + static_cast<std::size_t>(g0) * d.HW() * d.O, d.O);
      for (int s = g0; s < g1; ++s) {
        touch_sample(ctx, x, d.N, s, false);
        touch_buffer(ctx, sc, col_floats, true);
        touch_all(ctx, w, false);
        touch_sample(ctx, y, d.N, s, true);
        ctx.compute(static_cast<std::uint64_t>(d.HW()) * d.KKC() * d.O);
      }
    }
  });
  return y;
}

void conv2d_backward(Frame& f, const Tensor& x, const Tensor& w, const Tensor& dy, Tensor* dx,
                     Tensor* dw, const std::string& key) {
  const ConvDims d = conv_dims(x, w);
  expect_shape(dy, {d.N, d.H, d.W, d.O}, "conv2d gradient");
  Exec& ex = f.exec();
  ExecContext& ctx = f.ctx();
  const std::size_t col_floats = static_cast<std::size_t>(d.HW()) * d.KKC();
  const std::size_t w_floats = w.data.size();
  const int group = conv_group(d);
  if (dx) *dx = f.make(x.shape);
  if (dw) {
    *dw = f.make(w.shape);
    prepare_partials(ex, key, d.N, w_floats);
  }
  for (unsigned k = 0; k < std::min<unsigned>(ex.workers(), d.N); ++k) ex.scratch(k, 2 * col_floats);
  ex.parallel_for(d.N, [&](unsigned worker, int s0, int s1) {
    Buffer& sc = ex.scratch(worker, 2 * col_floats);
    Buffer* part = nullptr;
    float* dwt = dw ? dw->ptr() : nullptr;
    if (dw && worker > 0) {
      part = &ex.partial(worker, key, w_floats);
      std::fill(part->data.begin(), part->data.end(), 0.0f);
      dwt = part->data.data();
    }
    for (int g0 = s0; g0 < s1; g0 += group) {
      const int g1 = std::min(s1, g0 + group);
      const int rows = d.HW() * (g1 - g0);
      float* col = group_buffer(col_floats * (g1 - g0)).data();
      const float* dyg = dy.ptr() + static_cast<std::size_t>(g0) * d.HW() * d.O;
      if (dw) {
        for (int s = g0; s < g1; ++s) {
          im2col(d, x.ptr() + static_cast<std::size_t>(s) * d.HW() * d.C, col + (s - g0) * col_floats);
        }
        sgemm(true, false, d.KKC(), d.O, rows, col, d.KKC(), dyg, d.O, 1.0f, dwt, d.O);
      }
      if (dx) {
        sgemm(false, true, rows, d.KKC(), d.O, dyg, d.O, w.ptr(), d.O, 0.0f, col, d.KKC());
        for (int s = g0; s < g1; ++s) {
          col2im(d, col + (s - g0) * col_floats, dx->ptr() + static_cast<std::size_t>(s) * d.HW() * d.C);
        }
      }
      for (int s = g0; s < g1; ++s) {
        touch_sample(ctx, dy, d.N, s, false);
        if (dw) {
          touch_sample(ctx, x, d.N, s, false);
          touch_buffer(ctx, sc, col_floats, true);
          if (part) touch_buffer(ctx, *part, w_floats, true);
          else touch_all(ctx, *dw, true);
          ctx.compute(static_cast<std::uint64_t>(d.HW()) * d.KKC() * d.O);
        }
        if (dx) {
          touch_all(ctx, w, false);
          ctx.touch(sc.addr == kUntracked ? kUntracked : sc.addr + col_floats * sizeof(float),
                    col_floats * sizeof(float), true);
          touch_sample(ctx, *dx, d.N, s, true);
          ctx.compute(static_cast<std::uint64_t>(d.HW()) * d.KKC() * d.O);
        }
      }
    }
  });
  if (dw) reduce_partials(f, key, d.N, *dw);
}

Tensor maxpool2x2(Frame& f, const Tensor& x) {
  expect_rank(x, 4, "maxpool2x2 input");
  const std::int64_t N = x.dim(0), H = x.dim(1), W = x.dim(2), C = x.dim(3);
  if (H % 2 || W % 2) raise(Errc::ShapeMismatch, "maxpool2x2 needs even height and width, got " + shape_str(x.shape));
  Tensor y = f.make({N, H / 2, W / 2, C});
  ExecContext& ctx = f.ctx();
  for (std::int64_t n = 0; n < N; ++n) {
    for (std::int64_t oy = 0; oy < H / 2; ++oy) {
      for (std::int64_t ox = 0; ox < W / 2; ++ox) {
        const float* p00 = x.ptr() + ((n * H + 2 * oy) * W + 2 * ox) * C;
        const float* p01 = p00 + C;
        const float* p10 = p00 + W * C;
        const float* p11 = p10 + C;
        float* out = y.ptr() + ((n * (H / 2) + oy) * (W / 2) + ox) * C;
        for (std::int64_t c = 0; c < C; ++c) {
          out[c] = std::max(std::max(p00[c], p01[c]), std::max(p10[c], p11[c]));
        }
      }
    }
    touch_sample(ctx, x, N, n, false);
    touch_sample(ctx, y, N, n, true);
  }
  ctx.compute(x.data.size());
  return y;
}

Tensor maxpool2x2_backward(Frame& f, const Tensor& x, const Tensor& dy) {
  expect_rank(x, 4, "maxpool2x2 input");
  const std::int64_t N = x.dim(0), H = x.dim(1), W = x.dim(2), C = x.dim(3);
  expect_shape(dy, {N, H / 2, W / 2, C}, "maxpool2x2 gradient");
  Tensor dx = f.make(x.shape);
  ExecContext& ctx = f.ctx();
  for (std::int64_t n = 0; n < N; ++n) {
    for (std::int64_t oy = 0; oy < H / 2; ++oy) {
      for (std::int64_t ox = 0; ox < W / 2; ++ox) {
        const std::int64_t base = ((n * H + 2 * oy) * W + 2 * ox) * C;
        const std::int64_t offs[4] = {0, C, W * C, W * C + C};
        const float* g = dy.ptr() + ((n * (H / 2) + oy) * (W / 2) + ox) * C;
        for (std::int64_t c = 0; c < C; ++c) {
          int best = 0;
          for (int k = 1; k < 4; ++k) {
            if (x.data[base + offs[k] + c] > x.data[base + offs[best] + c]) best = k;
          }
          dx.data[base + offs[best] + c] += g[c];
        }
      }
    }
    touch_sample(ctx, x, N, n, false);
    touch_sample(ctx, dy, N, n, false);
    touch_sample(ctx, dx, N, n, true);
  }
  ctx.compute(x.data.size());
  return dx;
}

Tensor relu(Frame& f, const Tensor& x) {
  Tensor y = f.make(x.shape);
  for (std::size_t i = 0; i < x.data.size(); ++i) y.data[i] = x.data[i] > 0.0f ? x.data[i] : 0.0f;
  ExecContext& ctx = f.ctx();
  const std::int64_t n = samples_of(x);
  for (std::int64_t s = 0; s < n; ++s) {
    touch_sample(ctx, x, n, s, false);
    touch_sample(ctx, y, n, s, true);
  }
  ctx.compute(x.data.size());
  return y;
}

Tensor relu_backward(Frame& f, const Tensor& y, const Tensor& dy) {
  expect_shape(dy, y.shape, "relu gradient");
  Tensor dx = f.make(y.shape);
  for (std::size_t i = 0; i < y.data.size(); ++i) dx.data[i] = y.data[i] > 0.0f ? dy.data[i] : 0.0f;
  ExecContext& ctx = f.ctx();
  const std::int64_t n = samples_of(y);
  for (std::int64_t s = 0; s < n; ++s) {
    touch_sample(ctx, y, n, s, false);
    touch_sample(ctx, dy, n, s, false);
    touch_sample(ctx, dx, n, s, true);
  }
  ctx.compute(y.data.size());
  return dx;
}

Tensor softmax(Frame& f, const Tensor& x) {
  expect_rank(x, 2, "softmax input");
  const std::int64_t B = x.dim(0), C = x.dim(1);
  Tensor y = f.make(x.shape);
  ExecContext& ctx = f.ctx();
  for (std::int64_t r = 0; r < B; ++r) {
    const float* in = x.ptr() + r * C;
    float* out = y.ptr() + r * C;
    const float m = *std::max_element(in, in + C);
    double sum = 0.0;
    for (std::int64_t c = 0; c < C; ++c) sum += std::exp(static_cast<double>(in[c]) - m);
    for (std::int64_t c = 0; c < C; ++c) out[c] = static_cast<float>(std::exp(static_cast<double>(in[c]) - m) / sum);
    touch_sample(ctx, x, B, r, false);
    touch_sample(ctx, y, B, r, true);
  }
  ctx.compute(2 * x.data.size());
  return y;
}

Tensor softmax_backward(Frame& f, const Tensor& y, const Tensor& dy) {
  expect_rank(y, 2, "softmax output");
  expect_shape(dy, y.shape, "softmax gradient");
  const std::int64_t B = y.dim(0), C = y.dim(1);
  Tensor dx = f.make(y.shape);
  ExecContext& ctx = f.ctx();
  for (std::int64_t r = 0; r < B; ++r) {
    const float* yr = y.ptr() + r * C;
    const float* gr = dy.ptr() + r * C;
    double dot = 0.0;
    for (std::int64_t c = 0; c < C; ++c) dot += static_cast<double>(yr[c]) * gr[c];
    for (std::int64_t c = 0; c < C; ++c) dx.data[r * C + c] = static_cast<float>(yr[c] * (gr[c] - dot));
    touch_sample(ctx, y, B, r, false);
    touch_sample(ctx, dy, B, r, false);
    touch_sample(ctx, dx, B, r, true);
  }
  ctx.compute(2 * y.data.size());
  return dx;
}

namespace {

std::int64_t label_at(const Tensor& labels, std::int64_t r, std::int64_t C) {
  const float v = labels.data[r];
  if (!(v >= 0.0f) || v >= static_cast<float>(C) || v != std::floor(v)) {
    raise(Errc::LabelOutOfRange, "label " + std::to_string(v) + " outside [0, " + std::to_string(C) + ")");
  }
  return static_cast<std::int64_t>(v);
}

void check_xent(const Tensor& logits, const Tensor& labels) {
  expect_rank(logits, 2, "softmax_xent_loss logits");
  expect_shape(labels, {logits.dim(0)}, "softmax_xent_loss labels");
}

}  // namespace

Tensor softmax_xent(Frame& f, const Tensor& logits, const Tensor& labels) {
  check_xent(logits, labels);
  const std::int64_t B = logits.dim(0), C = logits.dim(1);
  ExecContext& ctx = f.ctx();
  double total = 0.0;
  for (std::int64_t r = 0; r < B; ++r) {
    const float* in = logits.ptr() + r * C;
    const std::int64_t label = label_at(labels, r, C);
    const double m = *std::max_element(in, in + C);
    double sum = 0.0;
    for (std::int64_t c = 0; c < C; ++c) sum += std::exp(in[c] - m);
    total += m + std::log(sum) - in[label];
    touch_sample(ctx, logits, B, r, false);
    touch_sample(ctx, labels, B, r, false);
  }
  Tensor loss = f.make({1});
  loss.data[0] = static_cast<float>(std::max(0.0, total / static_cast<double>(B)));
  touch_all(ctx, loss, true);
  ctx.compute(2 * logits.data.size());
  return loss;
}

Tensor softmax_xent_backward(Frame& f, const Tensor& logits, const Tensor& labels, const Tensor& dloss) {
  check_xent(logits, labels);
  expect_shape(dloss, {1}, "softmax_xent_loss gradient");
  const std::int64_t B = logits.dim(0), C = logits.dim(1);
  Tensor dx = f.make(logits.shape);
  ExecContext& ctx = f.ctx();
  const double scale = static_cast<double>(dloss.data[0]) / static_cast<double>(B);
  for (std::int64_t r = 0; r < B; ++r) {
    const float* in = logits.ptr() + r * C;
    const std::int64_t label = label_at(labels, r, C);
    const double m = *std::max_element(in, in + C);
    double sum = 0.0;
    for (std::int64_t c = 0; c < C; ++c) sum += std::exp(in[c] - m);
    for (std::int64_t c = 0; c < C; ++c) {
      const double p = std::exp(in[c] - m) / sum;
      dx.data[r * C + c] = static_cast<float>((p - (c == label ? 1.0 : 0.0)) * scale);
    }
    touch_sample(ctx, logits, B, r, false);
    touch_sample(ctx, labels, B, r, false);
    touch_sample(ctx, dx, B, r, true);
  }
  ctx.compute(2 * logits.data.size());
  return dx;
}

Shape resolve_shape(const Shape& x, const std::vector<std::int64_t>& spec) {
  const std::int64_t total = num_elements(x);
  Shape out(spec.begin(), spec.end());
  std::int64_t known = 1;
  int wild = -1;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out[i] == -1) {
      if (wild >= 0) raise(Errc::ShapeMismatch, "reshape allows one -1");
      wild = static_cast<int>(i);
    } else if (out[i] <= 0) {
      raise(Errc::ShapeMismatch, "reshape dimensions must be positive");
    } else {
      known *= out[i];
    }
  }
  if (wild >= 0) {
    if (total % known) raise(Errc::ShapeMismatch, "cannot reshape " + shape_str(x) + " to " + shape_str(spec));
    out[wild] = total / known;
  }
  if (num_elements(out) != total) raise(Errc::ShapeMismatch, "cannot reshape " + shape_str(x) + " to " + shape_str(spec));
  return out;
}

Tensor reshape(Frame& f, const Tensor& x, const std::vector<std::int64_t>& spec) {
  Tensor y = f.make(resolve_shape(x.shape, spec));
  y.data = x.data;
  touch_all(f.ctx(), x, false);
  touch_all(f.ctx(), y, true);
  return y;
}

void sgd_update(Frame& f, Tensor& var, const Tensor& grad, float lr) {
  expect_shape(grad, var.shape, "sgd gradient");
  for (std::size_t i = 0; i < var.data.size(); ++i) var.data[i] -= lr * grad.data[i];
  touch_all(f.ctx(), grad, false);
  touch_all(f.ctx(), var, true);
  f.ctx().compute(var.data.size());
}

Tensor stack(Frame& f, const std::vector<const Tensor*>& items) {
  if (items.empty()) raise(Errc::ShapeMismatch, "stack of nothing");
  Shape shape{static_cast<std::int64_t>(items.size())};
  shape.insert(shape.end(), items[0]->shape.begin(), items[0]->shape.end());
  Tensor y = f.make(shape);
  const std::size_t per = items[0]->data.size();
  for (std::size_t i = 0; i < items.size(); ++i) {
    expect_shape(*items[i], items[0]->shape, "stack");
    std::copy(items[i]->data.begin(), items[i]->data.end(), y.data.begin() + i * per);
    touch_all(f.ctx(), *items[i], false);
    touch_sample(f.ctx(), y, items.size(), i, true);
  }
  return y;
}

}  // namespace shieldrun::tensor::ops
