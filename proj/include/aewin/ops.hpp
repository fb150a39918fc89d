// Copyright 2026 The AEWin Authors. All rights reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Forward kernels and their vector-Jacobian products. Everything here is a
// pure function over Tensor values; reductions run in a fixed index order so
// results are bitwise reproducible.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "aewin/counters.hpp"
#include "aewin/tensor.hpp"

namespace aewin::ops {

inline constexpr double kLayerNormEps = 1e-5;

// ─── Dense products ──────────────────────────────────────────────────────────

// c[i][j] = sum_k a[i][k] * b[k][j], accumulated for k = 0, 1, ... in order.
inline Tensor matmul(const Tensor &a, const Tensor &b) {
    require_rank(a, 2, "matmul");
    require_rank(b, 2, "matmul");
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    if (b.dim(0) != k)
        throw ShapeError("matmul: inner dimensions disagree, " +
                         shape_string(a.shape()) + " x " + shape_string(b.shape()));
    Tensor c({m, n});
    const double *pa = a.data().data();
    const double *pb = b.data().data();
    double *pc = c.data().data();
    for (std::size_t i = 0; i < m; ++i) {
        double *row = pc + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double s = pa[i * k + p];
            const double *brow = pb + p * n;
            for (std::size_t j = 0; j < n; ++j)
                row[j] += s * brow[j];
        }
    }
    count_matmul_macs(static_cast<std::uint64_t>(m) * k * n);
    return c;
}

// a · bᵀ
inline Tensor matmul_nt(const Tensor &a, const Tensor &b) {
    require_rank(a, 2, "matmul_nt");
    require_rank(b, 2, "matmul_nt");
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(0);
    if (b.dim(1) != k)
        throw ShapeError("matmul_nt: inner dimensions disagree");
    Tensor c({m, n});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t p = 0; p < k; ++p)
                s += a[i * k + p] * b[j * k + p];
            c[i * n + j] = s;
        }
    return c;
}

// aᵀ · b
inline Tensor matmul_tn(const Tensor &a, const Tensor &b) {
    require_rank(a, 2, "matmul_tn");
    require_rank(b, 2, "matmul_tn");
    const std::size_t k = a.dim(0), m = a.dim(1), n = b.dim(1);
    if (b.dim(0) != k)
        throw ShapeError("matmul_tn: inner dimensions disagree");
    Tensor c({m, n});
    for (std::size_t p = 0; p < k; ++p)
        for (std::size_t i = 0; i < m; ++i) {
            const double s = a[p * m + i];
            for (std::size_t j = 0; j < n; ++j)
                c[i * n + j] += s * b[p * n + j];
        }
    return c;
}

inline Tensor add(const Tensor &a, const Tensor &b) {
    if (a.shape() != b.shape())
        throw ShapeError("add: " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] += b[i];
    return out;
}

inline void add_inplace(Tensor &acc, const Tensor &b) {
    if (acc.shape() != b.shape())
        throw ShapeError("add_inplace: " + shape_string(acc.shape()) + " vs " +
                         shape_string(b.shape()));
    for (std::size_t i = 0; i < acc.size(); ++i)
        acc[i] += b[i];
}

inline Tensor scale(const Tensor &a, double s) {
    Tensor out = a;
    for (double &v : out.storage())
        v *= s;
    return out;
}

// Adds bias[c] to every row of x viewed as [rows, C].
inline Tensor add_row_bias(const Tensor &x, const Tensor &bias) {
    const std::size_t c = bias.size();
    if (x.shape().back() != c)
        throw ShapeError("add_row_bias: bias length " + std::to_string(c) +
                         " vs trailing axis of " + shape_string(x.shape()));
    Tensor out = x;
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] += bias[i % c];
    return out;
}

// Column sums of x viewed as [rows, C].
inline Tensor sum_rows(const Tensor &x) {
    const std::size_t c = x.shape().back();
    Tensor out({c});
    for (std::size_t i = 0; i < x.size(); ++i)
        out[i % c] += x[i];
    return out;
}

// ─── Softmax ─────────────────────────────────────────────────────────────────

inline void softmax_row_inplace(std::span<double> row) {
    double mx = row[0];
    for (double v : row)
        mx = std::max(mx, v);
    double sum = 0.0;
    for (double &v : row) {
        v = std::exp(v - mx);
        sum += v;
    }
    for (double &v : row)
        v /= sum;
}

inline Tensor softmax_rows(const Tensor &x) {
    require_rank(x, 2, "softmax_rows");
    Tensor y = x;
    const std::size_t n = x.dim(1);
    for (std::size_t i = 0; i < x.dim(0); ++i)
        softmax_row_inplace(y.data().subspan(i * n, n));
    return y;
}

// dx = y ⊙ (dy − rowsum(dy ⊙ y))
inline Tensor softmax_rows_vjp(const Tensor &y, const Tensor &dy) {
    Tensor dx(y.shape());
    const std::size_t n = y.dim(1);
    for (std::size_t i = 0; i < y.dim(0); ++i) {
        double dot = 0.0;
        for (std::size_t j = 0; j < n; ++j)
            dot += dy[i * n + j] * y[i * n + j];
        for (std::size_t j = 0; j < n; ++j)
            dx[i * n + j] = y[i * n + j] * (dy[i * n + j] - dot);
    }
    return dx;
}

// ─── Layer norm ──────────────────────────────────────────────────────────────

struct LayerNormResult {
    Tensor out;
    Tensor normalized; // (x − μ)·rstd, before the affine
    Tensor rstd;       // one entry per position
};

inline LayerNormResult layer_norm_full(const Tensor &x, const Tensor &gamma,
                                       const Tensor &beta, double eps = kLayerNormEps) {
    const std::size_t c = x.shape().back();
    if (gamma.size() != c || beta.size() != c)
        throw ShapeError("layer_norm: channel count " + std::to_string(c) +
                         " vs gamma " + shape_string(gamma.shape()) + " / beta " +
                         shape_string(beta.shape()));
    const std::size_t rows = x.size() / c;
    LayerNormResult r{Tensor(x.shape()), Tensor(x.shape()), Tensor({rows})};
    for (std::size_t i = 0; i < rows; ++i) {
        const double *px = x.data().data() + i * c;
        double mean = 0.0;
        for (std::size_t j = 0; j < c; ++j)
            mean += px[j];
        mean /= static_cast<double>(c);
        double var = 0.0;
        for (std::size_t j = 0; j < c; ++j)
            var += (px[j] - mean) * (px[j] - mean);
        var /= static_cast<double>(c);
        const double rstd = 1.0 / std::sqrt(var + eps);
        r.rstd[i] = rstd;
        for (std::size_t j = 0; j < c; ++j) {
            const double xh = (px[j] - mean) * rstd;
            r.normalized[i * c + j] = xh;
            r.out[i * c + j] = xh * gamma[j] + beta[j];
        }
    }
    return r;
}

inline Tensor layer_norm(const Tensor &x, const Tensor &gamma, const Tensor &beta,
                         double eps = kLayerNormEps) {
    return layer_norm_full(x, gamma, beta, eps).out;
}

struct LayerNormGrads {
    Tensor dx, dgamma, dbeta;
};

inline LayerNormGrads layer_norm_vjp(const LayerNormResult &fwd, const Tensor &gamma,
                                     const Tensor &dy) {
    const std::size_t c = gamma.size();
    const std::size_t rows = dy.size() / c;
    LayerNormGrads g{Tensor(dy.shape()), Tensor({c}), Tensor({c})};
    const double inv_c = 1.0 / static_cast<double>(c);
    for (std::size_t i = 0; i < rows; ++i) {
        double sum_g = 0.0, sum_gx = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            const double gy = dy[i * c + j];
            const double xh = fwd.normalized[i * c + j];
            g.dgamma[j] += gy * xh;
            g.dbeta[j] += gy;
            const double gxh = gy * gamma[j];
            sum_g += gxh;
            sum_gx += gxh * xh;
        }
        const double rstd = fwd.rstd[i];
        for (std::size_t j = 0; j < c; ++j) {
            const double gxh = dy[i * c + j] * gamma[j];
            const double xh = fwd.normalized[i * c + j];
            g.dx[i * c + j] = rstd * (gxh - inv_c * sum_g - xh * inv_c * sum_gx);
        }
    }
    return g;
}

// ─── GELU (exact erf form) ───────────────────────────────────────────────────

inline double gelu_scalar(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

inline Tensor gelu(const Tensor &x) {
    Tensor y = x;
    for (double &v : y.storage())
        v = gelu_scalar(v);
    return y;
}

inline Tensor gelu_vjp(const Tensor &x, const Tensor &dy) {
    constexpr double inv_sqrt_2pi = 0.3989422804014327;
    Tensor dx(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double v = x[i];
        const double cdf = 0.5 * (1.0 + std::erf(v / std::numbers::sqrt2));
        const double pdf = inv_sqrt_2pi * std::exp(-0.5 * v * v);
        dx[i] = dy[i] * (cdf + v * pdf);
    }
    return dx;
}

// ─── Depthwise 3×3 convolution, zero padding 1 ───────────────────────────────

inline void check_dwconv_shapes(const Tensor &x, const Tensor &kernels) {
    require_rank(x, 3, "depthwise_conv3x3");
    if (kernels.shape() != Shape{3, 3, x.dim(2)})
        throw ShapeError("depthwise_conv3x3: kernels " + shape_string(kernels.shape()) +
                         " do not match input channels " + std::to_string(x.dim(2)));
}

inline Tensor depthwise_conv3x3(const Tensor &x, const Tensor &kernels) {
    check_dwconv_shapes(x, kernels);
    const long h = static_cast<long>(x.dim(0)), w = static_cast<long>(x.dim(1));
    const std::size_t c = x.dim(2);
    Tensor y(x.shape());
    for (long i = 0; i < h; ++i)
        for (long j = 0; j < w; ++j)
            for (long di = -1; di <= 1; ++di)
                for (long dj = -1; dj <= 1; ++dj) {
                    const long si = i + di, sj = j + dj;
                    if (si < 0 || si >= h || sj < 0 || sj >= w)
                        continue;
                    const double *src = &x[(si * w + sj) * c];
                    const double *ker = &kernels[((di + 1) * 3 + (dj + 1)) * c];
                    double *dst = &y[(i * w + j) * c];
                    for (std::size_t ch = 0; ch < c; ++ch)
                        dst[ch] += ker[ch] * src[ch];
                }
    count_conv_macs(static_cast<std::uint64_t>(h * w) * 9 * c);
    return y;
}

struct DepthwiseConvGrads {
    Tensor dx, dkernels;
};

inline DepthwiseConvGrads depthwise_conv3x3_vjp(const Tensor &x, const Tensor &kernels,
                                                const Tensor &dy) {
    const long h = static_cast<long>(x.dim(0)), w = static_cast<long>(x.dim(1));
    const std::size_t c = x.dim(2);
    DepthwiseConvGrads g{Tensor(x.shape()), Tensor(kernels.shape())};
    for (long i = 0; i < h; ++i)
        for (long j = 0; j < w; ++j)
            for (long di = -1; di <= 1; ++di)
                for (long dj = -1; dj <= 1; ++dj) {
                    const long si = i + di, sj = j + dj;
                    if (si < 0 || si >= h || sj < 0 || sj >= w)
                        continue;
                    const std::size_t kofs = ((di + 1) * 3 + (dj + 1)) * c;
                    const std::size_t sofs = (si * w + sj) * c;
                    const std::size_t dofs = (i * w + j) * c;
                    for (std::size_t ch = 0; ch < c; ++ch) {
                        g.dx[sofs + ch] += kernels[kofs + ch] * dy[dofs + ch];
                        g.dkernels[kofs + ch] += x[sofs + ch] * dy[dofs + ch];
                    }
                }
    return g;
}

// ─── Token permutations ──────────────────────────────────────────────────────
//
// Spatial regroupings (roll, window partition, transpose, patch flattening)
// are all permutations of the token axis of an [H, W, C] map. Each builder
// returns `src` with out-token t reading in-token src[t].

using TokenIndex = std::vector<std::size_t>;

inline std::size_t wrap(long v, std::size_t n) {
    const long m = static_cast<long>(n);
    return static_cast<std::size_t>(((v % m) + m) % m);
}

// out[(i+dy) mod H, (j+dx) mod W] = in[i, j]
inline TokenIndex roll_index(std::size_t h, std::size_t w, long dy, long dx) {
    TokenIndex src(h * w);
    for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < w; ++j)
            src[i * w + j] = wrap(static_cast<long>(i) - dy, h) * w +
                             wrap(static_cast<long>(j) - dx, w);
    return src;
}

inline void check_window_divisibility(std::size_t h, std::size_t w, std::size_t m) {
    if (m == 0)
        throw ConfigError("window size must be positive");
    if (h % m != 0 || w % m != 0)
        throw DivisibilityError("feature map " + std::to_string(h) + "x" +
                                std::to_string(w) + " is not divisible by window " +
                                std::to_string(m));
}

// Window n = (i/M)·(W/M) + (j/M), slot (i mod M)·M + (j mod M).
inline TokenIndex window_partition_index(std::size_t h, std::size_t w, std::size_t m) {
    check_window_divisibility(h, w, m);
    const std::size_t nw = w / m;
    TokenIndex src(h * w);
    for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < w; ++j) {
            const std::size_t window = (i / m) * nw + (j / m);
            const std::size_t slot = (i % m) * m + (j % m);
            src[window * m * m + slot] = i * w + j;
        }
    return src;
}

// [H, W] token grid → [W, H]
inline TokenIndex transpose_index(std::size_t h, std::size_t w) {
    TokenIndex src(h * w);
    for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < w; ++j)
            src[j * h + i] = i * w + j;
    return src;
}

// Tokens regrouped as [H/p, W/p, p, p]: each p×p patch becomes contiguous in
// row-major neighbour order.
inline TokenIndex patch_index(std::size_t h, std::size_t w, std::size_t p) {
    if (p == 0 || h % p != 0 || w % p != 0)
        throw DivisibilityError("map " + std::to_string(h) + "x" + std::to_string(w) +
                                " is not divisible by patch size " + std::to_string(p));
    TokenIndex src(h * w);
    std::size_t t = 0;
    for (std::size_t pi = 0; pi < h / p; ++pi)
        for (std::size_t pj = 0; pj < w / p; ++pj)
            for (std::size_t a = 0; a < p; ++a)
                for (std::size_t b = 0; b < p; ++b)
                    src[t++] = (pi * p + a) * w + (pj * p + b);
    return src;
}

inline TokenIndex inverse_index(const TokenIndex &src) {
    TokenIndex inv(src.size());
    for (std::size_t t = 0; t < src.size(); ++t)
        inv[src[t]] = t;
    return inv;
}

inline TokenIndex compose_index(const TokenIndex &first, const TokenIndex &second) {
    // Applying `first` then `second`: out[t] = in[first[second[t]]].
    TokenIndex src(second.size());
    for (std::size_t t = 0; t < second.size(); ++t)
        src[t] = first[second[t]];
    return src;
}

// x viewed as [tokens, C] (C = trailing axis); out token t = x token src[t].
inline Tensor gather_tokens(const Tensor &x, const TokenIndex &src, Shape out_shape) {
    const std::size_t c = x.shape().back();
    if (src.size() * c != x.size() || shape_numel(out_shape) != x.size())
        throw ShapeError("gather_tokens: index/shape mismatch for " + shape_string(x.shape()));
    Tensor out(std::move(out_shape));
    for (std::size_t t = 0; t < src.size(); ++t)
        std::copy_n(x.data().data() + src[t] * c, c, out.data().data() + t * c);
    return out;
}

// Adjoint of gather_tokens: dx token src[t] += dy token t. Tokens are
// counted in units of the input's channel width, so gathers that fold
// several tokens into one output row (patching) scatter back correctly.
inline Tensor scatter_tokens(const Tensor &dy, const TokenIndex &src, Shape in_shape) {
    const std::size_t c = in_shape.back();
    if (src.size() * c != dy.size())
        throw ShapeError("scatter_tokens: index/shape mismatch for " + shape_string(dy.shape()));
    Tensor dx(std::move(in_shape));
    for (std::size_t t = 0; t < src.size(); ++t) {
        const double *g = dy.data().data() + t * c;
        double *d = dx.data().data() + src[t] * c;
        for (std::size_t ch = 0; ch < c; ++ch)
            d[ch] += g[ch];
    }
    return dx;
}

inline Tensor cyclic_roll(const Tensor &x, long dy, long dx) {
    require_rank(x, 3, "cyclic_roll");
    return gather_tokens(x, roll_index(x.dim(0), x.dim(1), dy, dx), x.shape());
}

// [H, W, C] → [N, M·M, C]
inline Tensor window_partition(const Tensor &x, std::size_t m) {
    require_rank(x, 3, "window_partition");
    const std::size_t h = x.dim(0), w = x.dim(1), c = x.dim(2);
    return gather_tokens(x, window_partition_index(h, w, m), {(h / m) * (w / m), m * m, c});
}

// [N, M·M, C] → [H, W, C]
inline Tensor window_reverse(const Tensor &windows, std::size_t h, std::size_t w) {
    require_rank(windows, 3, "window_reverse");
    const auto m = static_cast<std::size_t>(std::lround(std::sqrt(double(windows.dim(1)))));
    if (m * m != windows.dim(1) || windows.dim(0) * windows.dim(1) != h * w)
        throw ShapeError("window_reverse: " + shape_string(windows.shape()) +
                         " does not tile a " + std::to_string(h) + "x" + std::to_string(w) +
                         " map");
    return gather_tokens(windows, inverse_index(window_partition_index(h, w, m)),
                         {h, w, windows.dim(2)});
}

inline Tensor transpose_hw(const Tensor &x) {
    require_rank(x, 3, "transpose_hw");
    return gather_tokens(x, transpose_index(x.dim(0), x.dim(1)), {x.dim(1), x.dim(0), x.dim(2)});
}

// Columns [begin, begin + count) of x viewed as [rows, C].
inline Tensor slice_cols(const Tensor &x, std::size_t begin, std::size_t count) {
    const std::size_t c = x.shape().back();
    if (begin + count > c)
        throw ShapeError("slice_cols out of range");
    const std::size_t rows = x.size() / c;
    Tensor out({rows, count});
    for (std::size_t r = 0; r < rows; ++r)
        std::copy_n(x.data().data() + r * c + begin, count, out.data().data() + r * count);
    return out;
}

} // namespace aewin::ops
