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

// A short tour: run AEWin attention on a random feature map in both window
// modes, check each head group against dense masked attention, then show how
// far one and two layers reach and what the layer costs against global
// attention.

#include <cstdio>

#include "aewin/analysis.hpp"
#include "aewin/verify.hpp"

using namespace aewin;

int main() {
    const std::size_t h = 8, w = 8, c = 16;
    const AewinConfig cfg = AewinConfig::make(c, 4, 2);
    Rng rng = make_rng(2026);
    const Tensor x = normal_tensor({h, w, c}, rng);
    const AttentionWeights wts = random_attention_weights(c, rng);

    std::printf("AEWin on %zux%zux%zu, K=%zu heads (d=%zu), M=%zu, shift=%zu\n", h, w, c, cfg.heads,
                cfg.head_dim(), cfg.window, cfg.shift);
    for (WindowMode mode : {WindowMode::regular, WindowMode::shifted}) {
        const Tensor y = mode == WindowMode::regular ? aewin_forward(x, wts, cfg) : psw_aewin_forward(x, wts, cfg);
        const Tensor ref = oracle_aewin(x, wts, cfg, mode);
        std::printf("  %-8s output %s, max |impl - dense masked oracle| = %.2e\n", to_string(mode),
                    shape_string(y.shape()).c_str(), max_abs_diff(y, ref));
    }

    std::printf("\nReach from the top-left token on a %zux%zu grid:\n", h, w);
    for (const auto &layers : std::vector<std::vector<WindowMode>>{
             {WindowMode::regular}, {WindowMode::shifted}, {WindowMode::regular, WindowMode::shifted}}) {
        const auto reach = attention_reachability(cfg, h, w, layers);
        std::string name;
        for (WindowMode m : layers)
            name += std::string(name.empty() ? "" : " + ") + to_string(m);
        std::printf("  %-20s %3zu / %zu tokens\n", name.c_str(), reach.row_count(0), h * w);
    }

    std::printf("\nMACs for one layer at 56x56x64, M=7:\n");
    std::printf("  global attention  %12llu\n", static_cast<unsigned long long>(flops_global(56, 56, 64)));
    std::printf("  AEWin attention   %12llu\n", static_cast<unsigned long long>(flops_aewin(56, 56, 64, 7)));
    const MeasuredFlops m = measured_flops(cfg, h, w);
    std::printf("  instrumented / closed form at %zux%zux%zu: %llu / %llu\n", h, w, c,
                static_cast<unsigned long long>(m.measured.total()),
                static_cast<unsigned long long>(m.formula()));
    return 0;
}
