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

// Oracle-equivalence suite: every head group of the windowed implementation
// against dense masked attention under the mask that group is meant to
// realize. Shared by the `verify` command and the test suites.

#include <cstdint>
#include <string>
#include <vector>

#include "aewin/attention.hpp"
#include "aewin/oracle.hpp"
#include "aewin/random.hpp"

namespace aewin {

// The region head `head` attends to, as a dense mask over the row-major grid.
inline oracle::AttentionMask head_mask(const AewinConfig &cfg, std::size_t h, std::size_t w,
                                       std::size_t head, WindowMode mode) {
    switch (cfg.group_of(head)) {
    case HeadGroup::horizontal:
        return oracle::row_mask(h, w);
    case HeadGroup::vertical:
        return oracle::col_mask(h, w);
    case HeadGroup::window:
        break;
    }
    if (mode == WindowMode::regular)
        return oracle::window_mask(h, w, cfg.window);
    const long s = static_cast<long>(cfg.shift);
    const bool right = head < cfg.heads / 2 + cfg.window_heads() / 2;
    return right ? oracle::shifted_window_mask(h, w, cfg.window, 0, s)
                 : oracle::shifted_window_mask(h, w, cfg.window, s, 0);
}

// Heads [first, first + count) computed head by head with masked global
// attention; returns [H, W, count·d].
inline Tensor oracle_heads(const Tensor &x, const AttentionWeights &wts, const AewinConfig &cfg,
                           std::size_t first, std::size_t count, WindowMode mode) {
    const std::size_t h = x.dim(0), w = x.dim(1), c = x.dim(2), d = cfg.head_dim();
    const Tensor tokens = x.reshaped({h * w, c});
    Tensor out({h, w, count * d});
    for (std::size_t k = 0; k < count; ++k) {
        const Tensor y = oracle::masked_global_attention(
            tokens, head_weights(wts, first + k, cfg), head_mask(cfg, h, w, first + k, mode));
        for (std::size_t p = 0; p < h * w; ++p)
            for (std::size_t j = 0; j < d; ++j)
                out[p * count * d + k * d + j] = y[p * d + j];
    }
    return out;
}

// Concatenated oracle heads mixed by Wo.
inline Tensor oracle_aewin(const Tensor &x, const AttentionWeights &wts, const AewinConfig &cfg,
                           WindowMode mode) {
    const std::size_t h = x.dim(0), w = x.dim(1), c = x.dim(2);
    const Tensor heads = oracle_heads(x, wts, cfg, 0, cfg.heads, mode).reshaped({h * w, c});
    return oracle::project(heads, wts.wo, &wts.bo).reshaped({h, w, c});
}

struct CheckResult {
    std::string name;
    double max_abs_diff = 0.0;
    double tolerance = 0.0;
    bool passed = true;
};

struct GridSize {
    std::size_t h, w;
};

struct VerifyOptions {
    std::uint64_t seed = 0;
    std::size_t seeds = 10;
    std::vector<GridSize> sizes{{4, 4}, {4, 8}, {8, 8}, {6, 6}};
    std::vector<std::size_t> windows{2, 3, 4};
    std::size_t channels = 8;
    std::size_t heads = 4;
    double tolerance = 1e-10;
    // Fault injection for mutation testing: run the shifted partitions with
    // the roll direction reversed.
    bool flip_shift_sign = false;
};

// Aggregated max abs diff per named check across the whole grid.
class CheckTable {
  public:
    void record(const std::string &name, double diff, double tol) {
        for (CheckResult &r : rows_)
            if (r.name == name) {
                r.max_abs_diff = std::max(r.max_abs_diff, diff);
                r.passed = r.passed && diff < tol;
                return;
            }
        rows_.push_back({name, diff, tol, diff < tol});
    }
    void record_bool(const std::string &name, bool ok) { record(name, ok ? 0.0 : 1.0, 0.5); }
    const std::vector<CheckResult> &rows() const { return rows_; }
    bool all_passed() const {
        for (const CheckResult &r : rows_)
            if (!r.passed)
                return false;
        return true;
    }

  private:
    std::vector<CheckResult> rows_;
};

inline std::vector<CheckResult> run_verify(const VerifyOptions &opt) {
    CheckTable table;
    const double tol = opt.tolerance;
    for (const GridSize &g : opt.sizes)
        for (std::size_t m : opt.windows) {
            if (g.h % m != 0 || g.w % m != 0)
                continue;
            const AewinConfig cfg = AewinConfig::make(opt.channels, opt.heads, m);
            const long shift = opt.flip_shift_sign ? -static_cast<long>(cfg.shift)
                                                   : static_cast<long>(cfg.shift);
            const std::size_t qh = cfg.axial_heads(), half = cfg.window_heads() / 2;
            const std::size_t d = cfg.head_dim();
            for (std::size_t s = 0; s < opt.seeds; ++s) {
                Rng rng = make_rng(opt.seed + s, g.h * 1000 + g.w * 10 + m);
                const Tensor x = normal_tensor({g.h, g.w, cfg.channels}, rng);
                const AttentionWeights wts = random_attention_weights(cfg.channels, rng);

                Tape tape;
                const Var xv = tape.constant(x);
                const AttentionVars wv = bind(tape, wts, false);
                const ad::Projections p = ad::project_qkv(xv, wv);
                const Tensor shifted = ad::shifted_window_group(p, cfg, shift).value();

                table.record("horizontal vs row mask",
                             max_abs_diff(ad::horizontal_group(p, cfg).value(),
                                          oracle_heads(x, wts, cfg, 0, qh, WindowMode::regular)),
                             tol);
                table.record("vertical vs column mask",
                             max_abs_diff(ad::vertical_group(p, cfg).value(),
                                          oracle_heads(x, wts, cfg, qh, qh, WindowMode::regular)),
                             tol);
                table.record("window vs window mask",
                             max_abs_diff(ad::window_group(p, cfg).value(),
                                          oracle_heads(x, wts, cfg, cfg.heads / 2,
                                                       cfg.window_heads(), WindowMode::regular)),
                             tol);
                const Tensor psw_oracle = oracle_heads(x, wts, cfg, cfg.heads / 2,
                                                       cfg.window_heads(), WindowMode::shifted);
                table.record("psw right-displaced vs torus mask",
                             max_abs_diff(ops::slice_cols(shifted, 0, half * d),
                                          ops::slice_cols(psw_oracle, 0, half * d)),
                             tol);
                table.record("psw down-displaced vs torus mask",
                             max_abs_diff(ops::slice_cols(shifted, half * d, half * d),
                                          ops::slice_cols(psw_oracle, half * d, half * d)),
                             tol);
                table.record("aewin_forward vs oracle assembly",
                             max_abs_diff(aewin_forward(x, wts, cfg),
                                          oracle_aewin(x, wts, cfg, WindowMode::regular)),
                             tol);
                const Tensor psw_full =
                    ad::aewin_attention(xv, wv, cfg, WindowMode::shifted, shift).value();
                table.record("psw_aewin_forward vs oracle assembly",
                             max_abs_diff(psw_full, oracle_aewin(x, wts, cfg, WindowMode::shifted)),
                             tol);
                table.record_bool("window partition round-trip (bitwise)",
                                  ops::window_reverse(ops::window_partition(x, m), g.h, g.w) == x);
            }
            table.record_bool(
                "two-layer reachability is complete",
                attention_reachability(cfg, g.h, g.w, {WindowMode::regular, WindowMode::regular})
                        .all() &&
                    attention_reachability(cfg, g.h, g.w,
                                           {WindowMode::regular, WindowMode::shifted})
                        .all() &&
                    attention_reachability(cfg, g.h, g.w,
                                           {WindowMode::shifted, WindowMode::regular})
                        .all() &&
                    attention_reachability(cfg, g.h, g.w,
                                           {WindowMode::shifted, WindowMode::shifted})
                        .all());
        }
    return table.rows();
}

} // namespace aewin
