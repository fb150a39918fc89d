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

// Brute-force reference: dense masked attention over all H·W tokens and the
// mask families the attention groups are supposed to realize. Tokens are
// indexed row-major, p = i·W + j. Nothing here shares code with the windowed
// implementation beyond the Tensor type.

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "aewin/tensor.hpp"

namespace aewin::oracle {

// Dense boolean n×n matrix; allowed(p, q) means token p may attend to q.
class AttentionMask {
  public:
    AttentionMask() = default;
    explicit AttentionMask(std::size_t n, bool fill = false) : n_(n), bits_(n * n, fill) {}

    std::size_t size() const { return n_; }
    bool operator()(std::size_t p, std::size_t q) const { return bits_[p * n_ + q] != 0; }
    void set(std::size_t p, std::size_t q, bool v = true) { bits_[p * n_ + q] = v; }

    std::size_t row_count(std::size_t p) const {
        std::size_t c = 0;
        for (std::size_t q = 0; q < n_; ++q)
            c += bits_[p * n_ + q] != 0;
        return c;
    }
    std::size_t count() const {
        std::size_t c = 0;
        for (char b : bits_)
            c += b != 0;
        return c;
    }
    bool all() const { return count() == n_ * n_; }
    bool symmetric() const {
        for (std::size_t p = 0; p < n_; ++p)
            for (std::size_t q = p + 1; q < n_; ++q)
                if ((*this)(p, q) != (*this)(q, p))
                    return false;
        return true;
    }

    friend bool operator==(const AttentionMask &, const AttentionMask &) = default;

  private:
    std::size_t n_ = 0;
    std::vector<char> bits_;
};

using BoolMatrix = AttentionMask;

namespace detail {
template <class SameGroup>
AttentionMask build_mask(std::size_t h, std::size_t w, SameGroup same) {
    AttentionMask m(h * w);
    for (std::size_t p = 0; p < h * w; ++p)
        for (std::size_t q = 0; q < h * w; ++q)
            m.set(p, q, same(p / w, p % w, q / w, q % w));
    return m;
}

inline void check_divisible(std::size_t h, std::size_t w, std::size_t m) {
    if (m == 0 || h % m != 0 || w % m != 0)
        throw DivisibilityError("mask: " + std::to_string(h) + "x" + std::to_string(w) +
                                " grid is not divisible by window " + std::to_string(m));
}

inline std::size_t torus(long v, std::size_t n) {
    const long m = static_cast<long>(n);
    return static_cast<std::size_t>(((v % m) + m) % m);
}
} // namespace detail

inline AttentionMask row_mask(std::size_t h, std::size_t w) {
    return detail::build_mask(h, w, [](auto pi, auto, auto qi, auto) { return pi == qi; });
}

inline AttentionMask col_mask(std::size_t h, std::size_t w) {
    return detail::build_mask(h, w, [](auto, auto pj, auto, auto qj) { return pj == qj; });
}

inline AttentionMask window_mask(std::size_t h, std::size_t w, std::size_t m) {
    detail::check_divisible(h, w, m);
    return detail::build_mask(h, w, [m](auto pi, auto pj, auto qi, auto qj) {
        return pi / m == qi / m && pj / m == qj / m;
    });
}

// Partition lines displaced down by dy and right by dx, windows wrapping
// around the torus: column j belongs to column-window ((j − dx) mod W) / M.
inline AttentionMask shifted_window_mask(std::size_t h, std::size_t w, std::size_t m, long dy,
                                         long dx) {
    detail::check_divisible(h, w, m);
    auto row_group = [=](std::size_t i) { return detail::torus(long(i) - dy, h) / m; };
    auto col_group = [=](std::size_t j) { return detail::torus(long(j) - dx, w) / m; };
    return detail::build_mask(h, w, [&](auto pi, auto pj, auto qi, auto qj) {
        return row_group(pi) == row_group(qi) && col_group(pj) == col_group(qj);
    });
}

inline AttentionMask identity_mask(std::size_t n) {
    AttentionMask m(n);
    for (std::size_t p = 0; p < n; ++p)
        m.set(p, p);
    return m;
}

inline AttentionMask mask_union(const std::vector<AttentionMask> &masks) {
    if (masks.empty())
        throw ShapeError("mask_union: empty list");
    AttentionMask out(masks[0].size());
    for (const AttentionMask &m : masks) {
        if (m.size() != out.size())
            throw ShapeError("mask_union: size mismatch " + std::to_string(m.size()) + " vs " +
                             std::to_string(out.size()));
        for (std::size_t p = 0; p < out.size(); ++p)
            for (std::size_t q = 0; q < out.size(); ++q)
                if (m(p, q))
                    out.set(p, q);
    }
    return out;
}

// (a ∘ b)(p, q) = ∃r: a(p, r) ∧ b(r, q)
inline BoolMatrix bool_product(const BoolMatrix &a, const BoolMatrix &b) {
    if (a.size() != b.size())
        throw ShapeError("bool_product: size mismatch");
    const std::size_t n = a.size();
    BoolMatrix c(n);
    for (std::size_t p = 0; p < n; ++p)
        for (std::size_t r = 0; r < n; ++r)
            if (a(p, r))
                for (std::size_t q = 0; q < n; ++q)
                    if (b(r, q))
                        c.set(p, q);
    return c;
}

// adjacency^steps under the boolean semiring.
inline BoolMatrix reachability_closure(const BoolMatrix &adjacency, std::size_t steps) {
    if (steps == 0)
        return identity_mask(adjacency.size());
    BoolMatrix r = adjacency;
    for (std::size_t s = 1; s < steps; ++s)
        r = bool_product(r, adjacency);
    return r;
}

// ─── Masked attention ────────────────────────────────────────────────────────

struct MaskedAttentionResult {
    Tensor out;   // [n, d]
    Tensor probs; // [n, n]; exact zeros at disallowed positions
};

// softmax(q·kᵀ/√d with disallowed scores forced to the lowest finite value)·v,
// with disallowed probabilities then zeroed explicitly.
inline MaskedAttentionResult masked_attention_full(const Tensor &q, const Tensor &k,
                                                   const Tensor &v, const AttentionMask &mask) {
    require_rank(q, 2, "masked_attention");
    const std::size_t n = q.dim(0), d = q.dim(1);
    if (k.shape() != q.shape() || v.dim(0) != n || mask.size() != n)
        throw ShapeError("masked_attention: q/k/v/mask sizes disagree");
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));
    const std::size_t dv = v.dim(1);
    MaskedAttentionResult r{Tensor({n, dv}), Tensor({n, n})};
    std::vector<double> score(n);
    for (std::size_t p = 0; p < n; ++p) {
        if (mask.row_count(p) == 0)
            throw ShapeError("masked_attention: token " + std::to_string(p) +
                             " has an empty mask row");
        double mx = std::numeric_limits<double>::lowest();
        for (std::size_t q2 = 0; q2 < n; ++q2) {
            if (!mask(p, q2)) {
                score[q2] = std::numeric_limits<double>::lowest();
                continue;
            }
            double s = 0.0;
            for (std::size_t c = 0; c < d; ++c)
                s += q[p * d + c] * k[q2 * d + c];
            score[q2] = s * scale;
            mx = std::max(mx, score[q2]);
        }
        double sum = 0.0;
        for (std::size_t q2 = 0; q2 < n; ++q2) {
            const double e = mask(p, q2) ? std::exp(score[q2] - mx) : 0.0;
            r.probs[p * n + q2] = e;
            sum += e;
        }
        for (std::size_t q2 = 0; q2 < n; ++q2)
            r.probs[p * n + q2] = mask(p, q2) ? r.probs[p * n + q2] / sum : 0.0;
        for (std::size_t c = 0; c < dv; ++c) {
            double acc = 0.0;
            for (std::size_t q2 = 0; q2 < n; ++q2)
                acc += r.probs[p * n + q2] * v[q2 * dv + c];
            r.out[p * dv + c] = acc;
        }
    }
    return r;
}

inline Tensor masked_attention(const Tensor &q, const Tensor &k, const Tensor &v,
                               const AttentionMask &mask) {
    return masked_attention_full(q, k, v, mask).out;
}

// One head's projections: columns of the full C×C matrices that the head owns.
struct HeadWeights {
    Tensor wq, wk, wv; // [C, d]
    Tensor bq, bv;     // [d]
};

inline Tensor project(const Tensor &x, const Tensor &w, const Tensor *bias) {
    const std::size_t n = x.dim(0), c = x.dim(1), d = w.dim(1);
    if (w.dim(0) != c)
        throw ShapeError("oracle projection: weight rows disagree with channels");
    Tensor out({n, d});
    for (std::size_t p = 0; p < n; ++p)
        for (std::size_t j = 0; j < d; ++j) {
            double s = 0.0;
            for (std::size_t i = 0; i < c; ++i)
                s += x[p * c + i] * w[i * d + j];
            out[p * d + j] = s + (bias ? (*bias)[j] : 0.0);
        }
    return out;
}

// x: [n, C] tokens in row-major grid order → [n, d] for a single head.
inline Tensor masked_global_attention(const Tensor &x, const HeadWeights &head,
                                      const AttentionMask &mask) {
    require_rank(x, 2, "masked_global_attention");
    return masked_attention(project(x, head.wq, &head.bq), project(x, head.wk, nullptr),
                            project(x, head.wv, &head.bv), mask);
}

} // namespace aewin::oracle
