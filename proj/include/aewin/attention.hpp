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

// Axially expanded windows attention.
//
// The K heads are split into three groups that run side by side on the same
// projected queries/keys/values:
//   heads [0, K/4)      attend along their row        (1×W stripes)
//   heads [K/4, K/2)    attend along their column     (H×1 stripes)
//   heads [K/2, K)      attend inside M×M windows
// Group outputs are concatenated in that order and mixed by Wo.
//
// In shifted mode the window heads split again: the first half works on a
// partition displaced right by s, the second half on one displaced down by s.
// Both are realized by cyclically rolling the map so that a regular partition
// applies, and no mask is used across the wrapped seam.

#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "aewin/oracle.hpp"
#include "aewin/ops.hpp"
#include "aewin/random.hpp"
#include "aewin/tape.hpp"

namespace aewin {

enum class WindowMode { regular, shifted };

inline const char *to_string(WindowMode m) { return m == WindowMode::regular ? "REGULAR" : "SHIFTED"; }

enum class HeadGroup { horizontal, vertical, window };

struct AewinConfig {
    std::size_t channels = 0; // C
    std::size_t heads = 0;    // K
    std::size_t window = 7;   // M
    std::size_t shift = 3;    // s

    static AewinConfig make(std::size_t channels, std::size_t heads, std::size_t window) {
        AewinConfig c{channels, heads, window, window / 2};
        c.validate();
        return c;
    }

    std::size_t head_dim() const { return channels / heads; }
    std::size_t axial_heads() const { return heads / 4; }
    std::size_t window_heads() const { return heads / 2; }

    HeadGroup group_of(std::size_t head) const {
        if (head < heads / 4)
            return HeadGroup::horizontal;
        if (head < heads / 2)
            return HeadGroup::vertical;
        return HeadGroup::window;
    }

    void validate(WindowMode mode = WindowMode::regular) const {
        if (channels == 0 || heads == 0 || window == 0)
            throw ConfigError("attention config: C, K and M must be positive");
        if (heads % 4 != 0)
            throw ConfigError("attention config: head count " + std::to_string(heads) +
                              " is not a multiple of 4");
        if (channels % heads != 0)
            throw ConfigError("attention config: channels " + std::to_string(channels) +
                              " not divisible by heads " + std::to_string(heads));
        if (mode == WindowMode::shifted && window_heads() % 2 != 0)
            throw ConfigError("attention config: shifted mode needs an even number of "
                              "window heads, got " +
                              std::to_string(window_heads()));
    }
};

// Wq/Wk/Wv/Wo are C×C; head k owns columns [k·d, (k+1)·d) of Wq/Wk/Wv. The key
// projection carries no bias: it would cancel inside every softmax row.
template <class T> struct AttentionWeightsT {
    T wq, wk, wv, wo;
    T bq, bv, bo;
};

using AttentionWeights = AttentionWeightsT<Tensor>;
using AttentionVars = AttentionWeightsT<Var>;

template <class F, class... P> void visit_params(F &&f, const std::string &prefix,
                                                 AttentionWeightsT<P> &...p) {
    f(prefix + "wq", p.wq...);
    f(prefix + "bq", p.bq...);
    f(prefix + "wk", p.wk...);
    f(prefix + "wv", p.wv...);
    f(prefix + "bv", p.bv...);
    f(prefix + "wo", p.wo...);
    f(prefix + "bo", p.bo...);
}

inline AttentionWeights zero_attention_weights(std::size_t c) {
    return {Tensor({c, c}), Tensor({c, c}), Tensor({c, c}), Tensor({c, c}),
            Tensor({c}),    Tensor({c}),    Tensor({c})};
}

inline AttentionWeights random_attention_weights(std::size_t c, Rng &rng, double stddev = 0.5) {
    return {normal_tensor({c, c}, rng, stddev), normal_tensor({c, c}, rng, stddev),
            normal_tensor({c, c}, rng, stddev), normal_tensor({c, c}, rng, stddev),
            normal_tensor({c}, rng, stddev),    normal_tensor({c}, rng, stddev),
            normal_tensor({c}, rng, stddev)};
}

inline AttentionVars bind(Tape &tape, const AttentionWeights &w, bool trainable) {
    auto mk = [&](const Tensor &t) { return trainable ? tape.leaf(t) : tape.constant(t); };
    return {mk(w.wq), mk(w.wk), mk(w.wv), mk(w.wo), mk(w.bq), mk(w.bv), mk(w.bo)};
}

inline oracle::HeadWeights head_weights(const AttentionWeights &w, std::size_t head,
                                        const AewinConfig &cfg) {
    const std::size_t d = cfg.head_dim(), b = head * d;
    auto vec_slice = [&](const Tensor &t) {
        return ops::slice_cols(t.reshaped({1, t.size()}), b, d).reshaped({d});
    };
    return {ops::slice_cols(w.wq, b, d), ops::slice_cols(w.wk, b, d),
            ops::slice_cols(w.wv, b, d), vec_slice(w.bq), vec_slice(w.bv)};
}

// ─── Contiguous-block multi-head attention kernel ────────────────────────────
//
// q, k, v: [n, heads·d] with tokens already arranged so that every `block`
// consecutive rows form one attention region. Each head attends within each
// block independently.

namespace detail {

struct BlockAttentionShape {
    std::size_t n, block, heads, d;
};

inline BlockAttentionShape block_shape(const Tensor &q, const Tensor &k, const Tensor &v,
                                       std::size_t block, std::size_t heads) {
    require_rank(q, 2, "block_attention");
    if (k.shape() != q.shape() || v.shape() != q.shape())
        throw ShapeError("attention: q/k/v shapes disagree: " + shape_string(q.shape()) + ", " +
                         shape_string(k.shape()) + ", " + shape_string(v.shape()));
    const std::size_t n = q.dim(0), width = q.dim(1);
    if (block == 0 || n % block != 0 || heads == 0 || width % heads != 0)
        throw ShapeError("attention: token count " + std::to_string(n) +
                         " does not split into blocks of " + std::to_string(block));
    return {n, block, heads, width / heads};
}

// Returns the output and fills `probs` ([n/block, heads, block, block]).
inline Tensor block_attention_forward(const Tensor &q, const Tensor &k, const Tensor &v,
                                      std::size_t block, std::size_t heads, Tensor *probs) {
    const auto s = block_shape(q, k, v, block, heads);
    const std::size_t width = s.heads * s.d, t = s.block;
    const double scale = 1.0 / std::sqrt(static_cast<double>(s.d));
    Tensor out({s.n, width});
    Tensor p({s.n / t, s.heads, t, t});
    for (std::size_t b = 0; b < s.n / t; ++b)
        for (std::size_t h = 0; h < s.heads; ++h) {
            double *pb = &p[((b * s.heads + h) * t) * t];
            const std::size_t col = h * s.d;
            for (std::size_t i = 0; i < t; ++i) {
                const double *qi = &q[(b * t + i) * width + col];
                for (std::size_t j = 0; j < t; ++j) {
                    const double *kj = &k[(b * t + j) * width + col];
                    double acc = 0.0;
                    for (std::size_t c = 0; c < s.d; ++c)
                        acc += qi[c] * kj[c];
                    pb[i * t + j] = acc * scale;
                }
                ops::softmax_row_inplace(std::span<double>(pb + i * t, t));
                double *oi = &out[(b * t + i) * width + col];
                for (std::size_t c = 0; c < s.d; ++c) {
                    double acc = 0.0;
                    for (std::size_t j = 0; j < t; ++j)
                        acc += pb[i * t + j] * v[(b * t + j) * width + col + c];
                    oi[c] = acc;
                }
            }
        }
    count_attention_macs(2ull * s.n * t * s.d * s.heads);
    if (probs)
        *probs = std::move(p);
    return out;
}

struct BlockAttentionGrads {
    Tensor dq, dk, dv;
};

inline BlockAttentionGrads block_attention_backward(const Tensor &q, const Tensor &k,
                                                    const Tensor &v, const Tensor &probs,
                                                    const Tensor &dout, std::size_t block,
                                                    std::size_t heads) {
    const auto s = block_shape(q, k, v, block, heads);
    const std::size_t width = s.heads * s.d, t = s.block;
    const double scale = 1.0 / std::sqrt(static_cast<double>(s.d));
    BlockAttentionGrads g{Tensor(q.shape()), Tensor(k.shape()), Tensor(v.shape())};
    std::vector<double> dp(t), ds(t);
    for (std::size_t b = 0; b < s.n / t; ++b)
        for (std::size_t h = 0; h < s.heads; ++h) {
            const double *pb = &probs[((b * s.heads + h) * t) * t];
            const std::size_t col = h * s.d;
            for (std::size_t i = 0; i < t; ++i) {
                const std::size_t ri = (b * t + i) * width + col;
                double dot = 0.0;
                for (std::size_t j = 0; j < t; ++j) {
                    const std::size_t rj = (b * t + j) * width + col;
                    double acc = 0.0;
                    for (std::size_t c = 0; c < s.d; ++c) {
                        acc += dout[ri + c] * v[rj + c];
                        g.dv[rj + c] += pb[i * t + j] * dout[ri + c];
                    }
                    dp[j] = acc;
                    dot += acc * pb[i * t + j];
                }
                for (std::size_t j = 0; j < t; ++j)
                    ds[j] = pb[i * t + j] * (dp[j] - dot) * scale;
                for (std::size_t j = 0; j < t; ++j) {
                    const std::size_t rj = (b * t + j) * width + col;
                    for (std::size_t c = 0; c < s.d; ++c) {
                        g.dq[ri + c] += ds[j] * k[rj + c];
                        g.dk[rj + c] += ds[j] * q[ri + c];
                    }
                }
            }
        }
    return g;
}

} // namespace detail

// softmax(q·kᵀ/√d)·v for one head over t tokens.
inline Tensor scaled_dot_attention(const Tensor &q, const Tensor &k, const Tensor &v) {
    return detail::block_attention_forward(q, k, v, q.dim(0), 1, nullptr);
}

namespace ad {

inline Var block_attention(Var q, Var k, Var v, std::size_t block, std::size_t heads) {
    auto probs = std::make_shared<Tensor>();
    Tensor out =
        detail::block_attention_forward(q.value(), k.value(), v.value(), block, heads, probs.get());
    return q.tape->record(std::move(out), {q, k, v},
                          [q, k, v, probs, block, heads](Tape &tp, const Tensor &g) {
                              auto grads = detail::block_attention_backward(
                                  q.value(), k.value(), v.value(), *probs, g, block, heads);
                              tp.accumulate(q, grads.dq);
                              tp.accumulate(k, grads.dk);
                              tp.accumulate(v, grads.dv);
                          },
                          "block_attention");
}

inline Var scaled_dot_attention(Var q, Var k, Var v) {
    return block_attention(q, k, v, q.shape().at(0), 1);
}

} // namespace ad

// ─── Token layouts for each head group ───────────────────────────────────────

// `src` regroups the row-major H×W token grid so that every `block`
// consecutive tokens form one attention region.
struct TokenLayout {
    ops::TokenIndex src;
    std::size_t block;
};

inline TokenLayout horizontal_layout(std::size_t h, std::size_t w) {
    ops::TokenIndex src(h * w);
    for (std::size_t t = 0; t < src.size(); ++t)
        src[t] = t;
    return {std::move(src), w};
}

inline TokenLayout vertical_layout(std::size_t h, std::size_t w) {
    return {ops::transpose_index(h, w), h};
}

inline TokenLayout window_layout(std::size_t h, std::size_t w, std::size_t m) {
    return {ops::window_partition_index(h, w, m), m * m};
}

// Roll the map by (dy, dx), then partition regularly.
inline TokenLayout rolled_window_layout(std::size_t h, std::size_t w, std::size_t m, long dy,
                                        long dx) {
    return {ops::compose_index(ops::roll_index(h, w, dy, dx), ops::window_partition_index(h, w, m)),
            m * m};
}

namespace ad {

struct Projections {
    Var q, k, v; // [H, W, C]
};

inline Projections project_qkv(Var x, const AttentionVars &w) {
    return {linear(x, w.wq, w.bq), linear(x, w.wk), linear(x, w.wv, w.bv)};
}

// Heads [first, first + count) of the projections, attending under `layout`.
// Returns [H, W, count·d].
inline Var group_attention(const Projections &p, std::size_t first, std::size_t count,
                           const AewinConfig &cfg, const TokenLayout &layout) {
    const Shape s = p.q.shape();
    const std::size_t h = s[0], w = s[1], d = cfg.head_dim(), width = count * d;
    auto arrange = [&](Var t) {
        return gather_tokens(slice_cols(t, first * d, width), layout.src, {h * w, width});
    };
    Var out = block_attention(arrange(p.q), arrange(p.k), arrange(p.v), layout.block, count);
    return gather_tokens(out, ops::inverse_index(layout.src), {h, w, width});
}

inline void check_input(Var x, const AewinConfig &cfg, WindowMode mode) {
    cfg.validate(mode);
    require_rank(x.value(), 3, "aewin attention");
    if (x.shape()[2] != cfg.channels)
        throw ShapeError("aewin attention: input has " + std::to_string(x.shape()[2]) +
                         " channels, config expects " + std::to_string(cfg.channels));
}

inline Var horizontal_group(const Projections &p, const AewinConfig &cfg) {
    const Shape s = p.q.shape();
    return group_attention(p, 0, cfg.axial_heads(), cfg, horizontal_layout(s[0], s[1]));
}

inline Var vertical_group(const Projections &p, const AewinConfig &cfg) {
    const Shape s = p.q.shape();
    return group_attention(p, cfg.axial_heads(), cfg.axial_heads(), cfg,
                           vertical_layout(s[0], s[1]));
}

inline Var window_group(const Projections &p, const AewinConfig &cfg) {
    const Shape s = p.q.shape();
    return group_attention(p, cfg.heads / 2, cfg.window_heads(), cfg,
                           window_layout(s[0], s[1], cfg.window));
}

// `shift` is signed so that tests can inject a sign fault; callers pass
// cfg.shift.
inline Var shifted_window_group(const Projections &p, const AewinConfig &cfg, long shift) {
    const Shape s = p.q.shape();
    const std::size_t half = cfg.window_heads() / 2, first = cfg.heads / 2;
    // Rolling left by s puts a right-displaced partition on regular boundaries.
    Var right = group_attention(p, first, half, cfg,
                                rolled_window_layout(s[0], s[1], cfg.window, 0, -shift));
    Var down = group_attention(p, first + half, half, cfg,
                               rolled_window_layout(s[0], s[1], cfg.window, -shift, 0));
    return concat_cols({right, down});
}

inline Var horizontal_axis_attention(Var x, const AttentionVars &w, const AewinConfig &cfg) {
    check_input(x, cfg, WindowMode::regular);
    return horizontal_group(project_qkv(x, w), cfg);
}

inline Var vertical_axis_attention(Var x, const AttentionVars &w, const AewinConfig &cfg) {
    check_input(x, cfg, WindowMode::regular);
    return vertical_group(project_qkv(x, w), cfg);
}

inline Var window_attention(Var x, const AttentionVars &w, const AewinConfig &cfg) {
    check_input(x, cfg, WindowMode::regular);
    return window_group(project_qkv(x, w), cfg);
}

inline Var psw_window_attention(Var x, const AttentionVars &w, const AewinConfig &cfg) {
    check_input(x, cfg, WindowMode::shifted);
    return shifted_window_group(project_qkv(x, w), cfg, static_cast<long>(cfg.shift));
}

// Concat(horizontal, vertical, window-or-shifted) · Wo + bo. Output shape
// equals input shape.
inline Var aewin_attention(Var x, const AttentionVars &w, const AewinConfig &cfg,
                           WindowMode mode, long shift) {
    check_input(x, cfg, mode);
    const Projections p = project_qkv(x, w);
    Var local = mode == WindowMode::regular ? window_group(p, cfg)
                                            : shifted_window_group(p, cfg, shift);
    Var heads = concat_cols({horizontal_group(p, cfg), vertical_group(p, cfg), local});
    return linear(heads, w.wo, w.bo);
}

inline Var aewin_attention(Var x, const AttentionVars &w, const AewinConfig &cfg,
                           WindowMode mode) {
    return aewin_attention(x, w, cfg, mode, static_cast<long>(cfg.shift));
}

} // namespace ad

// ─── Tensor-level entry points ───────────────────────────────────────────────

namespace detail {
template <class Fn>
Tensor run_attention(const Tensor &x, const AttentionWeights &w, Fn &&fn) {
    Tape tape;
    const Var xv = tape.constant(x);
    const AttentionVars wv = bind(tape, w, false);
    return fn(xv, wv).value();
}
} // namespace detail

inline Tensor horizontal_axis_attention(const Tensor &x, const AttentionWeights &w,
                                        const AewinConfig &cfg) {
    return detail::run_attention(
        x, w, [&](Var xv, const AttentionVars &wv) { return ad::horizontal_axis_attention(xv, wv, cfg); });
}

inline Tensor vertical_axis_attention(const Tensor &x, const AttentionWeights &w,
                                      const AewinConfig &cfg) {
    return detail::run_attention(
        x, w, [&](Var xv, const AttentionVars &wv) { return ad::vertical_axis_attention(xv, wv, cfg); });
}

inline Tensor window_attention(const Tensor &x, const AttentionWeights &w, const AewinConfig &cfg) {
    return detail::run_attention(
        x, w, [&](Var xv, const AttentionVars &wv) { return ad::window_attention(xv, wv, cfg); });
}

inline Tensor psw_window_attention(const Tensor &x, const AttentionWeights &w,
                                   const AewinConfig &cfg) {
    return detail::run_attention(
        x, w, [&](Var xv, const AttentionVars &wv) { return ad::psw_window_attention(xv, wv, cfg); });
}

inline Tensor aewin_forward(const Tensor &x, const AttentionWeights &w, const AewinConfig &cfg) {
    return detail::run_attention(x, w, [&](Var xv, const AttentionVars &wv) {
        return ad::aewin_attention(xv, wv, cfg, WindowMode::regular);
    });
}

inline Tensor psw_aewin_forward(const Tensor &x, const AttentionWeights &w,
                                const AewinConfig &cfg) {
    return detail::run_attention(x, w, [&](Var xv, const AttentionVars &wv) {
        return ad::aewin_attention(xv, wv, cfg, WindowMode::shifted);
    });
}

// ─── Reachability ────────────────────────────────────────────────────────────

// Token-to-token adjacency of one attention layer: row ∪ column ∪ the
// layer's window partition(s).
inline oracle::AttentionMask layer_adjacency(const AewinConfig &cfg, std::size_t h, std::size_t w,
                                             WindowMode mode) {
    std::vector<oracle::AttentionMask> parts{oracle::row_mask(h, w), oracle::col_mask(h, w)};
    if (mode == WindowMode::regular) {
        parts.push_back(oracle::window_mask(h, w, cfg.window));
    } else {
        const long s = static_cast<long>(cfg.shift);
        parts.push_back(oracle::shifted_window_mask(h, w, cfg.window, 0, s));
        parts.push_back(oracle::shifted_window_mask(h, w, cfg.window, s, 0));
    }
    return oracle::mask_union(parts);
}

// reach(p, q): token q can influence token p after the layer sequence.
inline oracle::BoolMatrix attention_reachability(const AewinConfig &cfg, std::size_t h,
                                                 std::size_t w,
                                                 const std::vector<WindowMode> &layers) {
    ops::check_window_divisibility(h, w, cfg.window);
    oracle::BoolMatrix reach = oracle::identity_mask(h * w);
    for (WindowMode mode : layers)
        reach = oracle::bool_product(reach, layer_adjacency(cfg, h, w, mode));
    return reach;
}

} // namespace aewin
