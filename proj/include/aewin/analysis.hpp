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

// Closed-form cost models and their instrumented cross-checks. All counts
// are multiply-accumulates (one MAC = one "FLOP", the convention vision
// backbones report). Layer norms, softmax, GELU, residual adds and pooling
// are not counted.

#include <cstdint>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "aewin/backbone.hpp"
#include "aewin/counters.hpp"

namespace aewin {

// Global self-attention over H·W tokens: four C×C projections plus the
// (HW)² score and aggregation products.
inline std::uint64_t flops_global(std::uint64_t h, std::uint64_t w, std::uint64_t c) {
    return 4 * h * w * c * c + 2 * (h * w) * (h * w) * c;
}

// Attention core terms of one AEWin layer: C/4 channels attend over W
// tokens, C/4 over H tokens, C/2 over M² tokens, each with a score and an
// aggregation product.
//   HWC·(H/2 + W/2 + M²) = HWC·(H + W + 2M²) / 2
// The division is exact whenever HWC·(H + W) is even, which covers every
// even C; otherwise the result is floored.
inline std::uint64_t aewin_attention_term(std::uint64_t h, std::uint64_t w, std::uint64_t c,
                                          std::uint64_t m) {
    return h * w * c * (h + w + 2 * m * m) / 2;
}

inline std::uint64_t flops_aewin(std::uint64_t h, std::uint64_t w, std::uint64_t c,
                                 std::uint64_t m) {
    return 4 * h * w * c * c + aewin_attention_term(h, w, c, m);
}

struct FlopsEntry {
    std::string layer;     // "stage3.block5.attn"
    std::string mechanism; // patch_embed, cpe, aewin, psw-aewin, mlp, merge, head
    std::size_t h = 0, w = 0, c = 0, m = 0;
    std::uint64_t projection = 0;
    std::uint64_t attention = 0;

    std::uint64_t total() const { return projection + attention; }
};

struct FlopsReport {
    std::string spec;
    std::size_t image_h = 0, image_w = 0;
    std::vector<FlopsEntry> entries;

    std::uint64_t total() const {
        std::uint64_t t = 0;
        for (const FlopsEntry &e : entries)
            t += e.total();
        return t;
    }

    std::uint64_t total_for(const std::string &mechanism) const {
        std::uint64_t t = 0;
        for (const FlopsEntry &e : entries)
            if (e.mechanism == mechanism)
                t += e.total();
        return t;
    }
};

// Per-layer MACs of a full forward pass at `image_h`×`image_w`:
//   patch_embed  (H/4)(W/4)·(16·3)·C1
//   cpe          9HWC per block
//   attention    4HWC² + HWC(H/2 + W/2 + M²) per block
//   mlp          2·r·HWC² per block
//   merge        (H/2)(W/2)·4C·2C
//   head         C4·classes
inline FlopsReport flops_model(const ModelSpec &spec, std::size_t image_h, std::size_t image_w) {
    spec.validate();
    const std::size_t p = spec.patch_size;
    if (image_h % p != 0 || image_w % p != 0)
        throw DivisibilityError("flops_model: image " + std::to_string(image_h) + "x" +
                                std::to_string(image_w) + " is not divisible by patch size " +
                                std::to_string(p));
    FlopsReport r{spec.name, image_h, image_w, {}};
    std::uint64_t h = image_h / p, w = image_w / p;
    const std::uint64_t c1 = spec.stages[0].dim;
    r.entries.push_back({"patch_embed", "patch_embed", h, w, c1, 0,
                         h * w * p * p * spec.in_channels * c1, 0});
    for (std::size_t s = 0; s < 4; ++s) {
        const std::string stage = "stage" + std::to_string(s + 1);
        const std::uint64_t c = spec.stages[s].dim;
        if (s > 0) {
            if (h % 2 != 0 || w % 2 != 0)
                throw DivisibilityError("flops_model: stage " + std::to_string(s + 1) + ": map " +
                                        std::to_string(h) + "x" + std::to_string(w) +
                                        " has an odd side");
            h /= 2;
            w /= 2;
            const std::uint64_t prev = spec.stages[s - 1].dim;
            r.entries.push_back({stage + ".merge", "merge", h, w, c, 0, h * w * 4 * prev * c, 0});
        }
        const std::uint64_t m = stage_window(spec.stages[s].window, h, w);
        if (h % m != 0 || w % m != 0)
            throw DivisibilityError("flops_model: stage " + std::to_string(s + 1) + ": map " +
                                    std::to_string(h) + "x" + std::to_string(w) +
                                    " is not divisible by window " + std::to_string(m));
        for (std::size_t b = 0; b < spec.stages[s].depth; ++b) {
            const std::string block = stage + ".block" + std::to_string(b);
            r.entries.push_back({block + ".cpe", "cpe", h, w, c, 0, 9 * h * w * c, 0});
            r.entries.push_back({block + ".attn", b % 2 == 0 ? "aewin" : "psw-aewin", h, w, c, m,
                                 4 * h * w * c * c, aewin_attention_term(h, w, c, m)});
            r.entries.push_back({block + ".mlp", "mlp", h, w, c, 0, 2 * spec.mlp_ratio * h * w * c * c, 0});
        }
    }
    const std::uint64_t c4 = spec.stages[3].dim;
    r.entries.push_back({"head", "head", 1, 1, c4, 0, c4 * spec.num_classes, 0});
    return r;
}

inline FlopsReport flops_model(const ModelSpec &spec, std::size_t image_size) {
    return flops_model(spec, image_size, image_size);
}

// Instrumented MACs of one aewin_forward call against the closed form.
struct MeasuredFlops {
    MacCounts measured;
    std::uint64_t projection_formula = 0;
    std::uint64_t attention_formula = 0;

    std::uint64_t formula() const { return projection_formula + attention_formula; }
    double ratio() const {
        return static_cast<double>(measured.total()) / static_cast<double>(formula());
    }
};

inline MeasuredFlops measured_flops(const AewinConfig &cfg, std::size_t h, std::size_t w,
                                    WindowMode mode = WindowMode::regular, std::uint64_t seed = 0) {
    Rng rng = make_rng(seed, 0xF10);
    const Tensor x = normal_tensor({h, w, cfg.channels}, rng);
    const AttentionWeights wts = random_attention_weights(cfg.channels, rng);
    MeasuredFlops out;
    {
        MacCounter counter;
        if (mode == WindowMode::regular)
            aewin_forward(x, wts, cfg);
        else
            psw_aewin_forward(x, wts, cfg);
        out.measured = counter.counts();
    }
    out.projection_formula = 4ull * h * w * cfg.channels * cfg.channels;
    out.attention_formula = aewin_attention_term(h, w, cfg.channels, cfg.window);
    return out;
}

inline double measured_flops_check(const AewinConfig &cfg, std::size_t h, std::size_t w) {
    return measured_flops(cfg, h, w).ratio();
}

// ─── Report output ───────────────────────────────────────────────────────────

inline std::string format_giga(std::uint64_t n) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(3) << static_cast<double>(n) / 1e9 << "G";
    return s.str();
}

inline std::string format_mega(std::uint64_t n) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(3) << static_cast<double>(n) / 1e6 << "M";
    return s.str();
}

inline void write_flops_table(std::ostream &out, const FlopsReport &r) {
    out << "spec " << r.spec << " at " << r.image_h << "x" << r.image_w << " (MACs)\n";
    out << std::left << std::setw(24) << "layer" << std::setw(12) << "mechanism" << std::right
        << std::setw(5) << "H" << std::setw(5) << "W" << std::setw(6) << "C" << std::setw(4) << "M"
        << std::setw(16) << "projection" << std::setw(14) << "attention" << std::setw(16)
        << "total" << '\n';
    for (const FlopsEntry &e : r.entries)
        out << std::left << std::setw(24) << e.layer << std::setw(12) << e.mechanism << std::right
            << std::setw(5) << e.h << std::setw(5) << e.w << std::setw(6) << e.c << std::setw(4)
            << e.m << std::setw(16) << e.projection << std::setw(14) << e.attention << std::setw(16)
            << e.total() << '\n';
    out << "\nby mechanism:\n";
    for (const char *mech : {"patch_embed", "cpe", "aewin", "psw-aewin", "mlp", "merge", "head"})
        out << "  " << std::left << std::setw(12) << mech << std::right << std::setw(16)
            << r.total_for(mech) << '\n';
    out << "total " << r.total() << " (" << format_giga(r.total()) << ")\n";
    out << "not counted: layer norms, softmax, GELU, residual adds, pooling\n";
}

inline void write_flops_csv(std::ostream &out, const FlopsReport &r) {
    out << "layer,mechanism,H,W,C,M,projection,attention,total\n";
    for (const FlopsEntry &e : r.entries)
        out << e.layer << ',' << e.mechanism << ',' << e.h << ',' << e.w << ',' << e.c << ','
            << e.m << ',' << e.projection << ',' << e.attention << ',' << e.total() << '\n';
    out << "total,,,,,,,," << r.total() << '\n';
}

inline void write_param_table(std::ostream &out, const ParamReport &r) {
    out << "spec " << r.spec << " parameters\n";
    for (const ParamEntry &e : r.entries)
        out << "  " << std::left << std::setw(20) << e.component << std::right << std::setw(14)
            << e.count << '\n';
    for (std::size_t s = 1; s <= 4; ++s)
        out << "  stage " << s << " total" << std::setw(19) << r.stage_total(s) << '\n';
    out << "total " << r.total << " (" << format_mega(r.total) << ")\n";
}

inline void write_param_csv(std::ostream &out, const ParamReport &r) {
    out << "component,stage,count\n";
    for (const ParamEntry &e : r.entries)
        out << e.component << ',' << e.stage << ',' << e.count << '\n';
    out << "total,," << r.total << '\n';
}

} // namespace aewin
