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

// Central-difference checks for every differentiable operation and for a
// whole block in both window modes.

#include <string>
#include <vector>

#include "aewin/backbone.hpp"
#include "aewin/gradcheck.hpp"

namespace aewin {

struct GradCheckEntry {
    std::string name;
    double max_rel_error = 0.0;
    double tolerance = 0.0;
    bool passed = false;
};

// Block parameters drawn from N(0, 0.3²), norm gains centred on 1.
inline BlockParams random_block_params(std::size_t c, std::size_t mlp_ratio, Rng &rng) {
    BlockParams p = zero_block(c, mlp_ratio);
    visit_params(
        [&](const std::string &name, Tensor &t) {
            t = normal_tensor(t.shape(), rng, 0.3);
            if (is_gain_name(name))
                for (double &v : t.data())
                    v += 1.0;
        },
        std::string(), p);
    return p;
}

// 8×8×8 input, K = 4, M = 2: the input and all 17 block tensors.
inline GradCheckResult block_grad_check(WindowMode mode, std::uint64_t seed) {
    const AewinConfig cfg = AewinConfig::make(8, 4, 2);
    Rng rng = make_rng(seed, 0xB10C);
    BlockParams p = random_block_params(8, 4, rng);
    std::vector<Tensor> inputs{normal_tensor({8, 8, 8}, rng)};
    visit_params([&](const std::string &, Tensor &t) { inputs.push_back(t); }, std::string(), p);
    const Tensor probe = normal_tensor({8, 8, 8}, rng);
    return grad_check(
        [&](Tape &, std::span<const Var> v) {
            BlockVars bv;
            std::size_t i = 1;
            visit_params([&](const std::string &, Var &slot) { slot = v[i++]; }, std::string(), bv);
            return ad::weighted_sum(aewin_block(v[0], bv, cfg, mode), probe);
        },
        inputs);
}

inline std::vector<GradCheckEntry> run_gradcheck_suite(std::uint64_t seed, double op_tol = 1e-6,
                                                       double block_tol = 1e-4) {
    std::vector<GradCheckEntry> out;
    Rng rng = make_rng(seed, 0x6AD);
    auto check = [&](const std::string &name, double tol, const ScalarFnN &f,
                     std::vector<Tensor> inputs) {
        const double err = grad_check(f, inputs).max_rel_error;
        out.push_back({name, err, tol, err < tol});
    };
    auto probe = [&](Shape s) { return normal_tensor(std::move(s), rng); };

    const Tensor p35 = probe({3, 5});
    check("matmul", op_tol,
          [&](Tape &, std::span<const Var> v) { return ad::weighted_sum(ad::matmul(v[0], v[1]), p35); },
          {probe({3, 4}), probe({4, 5})});
    check("softmax_rows", op_tol,
          [&](Tape &, std::span<const Var> v) { return ad::weighted_sum(ad::softmax_rows(v[0]), p35); },
          {probe({3, 5})});
    check("layer_norm", op_tol,
          [&](Tape &, std::span<const Var> v) {
              return ad::weighted_sum(ad::layer_norm(v[0], v[1], v[2]), p35);
          },
          {probe({3, 5}), probe({5}), probe({5})});
    check("gelu", op_tol,
          [&](Tape &, std::span<const Var> v) { return ad::weighted_sum(ad::gelu(v[0]), p35); },
          {probe({3, 5})});
    const Tensor p453 = probe({4, 5, 3});
    check("depthwise_conv3x3", op_tol,
          [&](Tape &, std::span<const Var> v) {
              return ad::weighted_sum(ad::depthwise_conv3x3(v[0], v[1]), p453);
          },
          {probe({4, 5, 3}), probe({3, 3, 3})});
    check("cyclic_roll", op_tol,
          [&](Tape &, std::span<const Var> v) { return ad::weighted_sum(ad::cyclic_roll(v[0], 1, -2), p453); },
          {probe({4, 5, 3})});
    check("cross_entropy", op_tol,
          [&](Tape &, std::span<const Var> v) { return ad::cross_entropy(v[0], 2); }, {probe({5})});

    const AewinConfig cfg = AewinConfig::make(8, 4, 2);
    const Tensor p448 = probe({4, 4, 8});
    for (WindowMode mode : {WindowMode::regular, WindowMode::shifted}) {
        const AttentionWeights w = random_attention_weights(8, rng);
        check(std::string("aewin_attention.") + to_string(mode), op_tol,
              [&](Tape &, std::span<const Var> v) {
                  const AttentionVars av{v[1], v[2], v[3], v[4], v[5], v[6], v[7]};
                  return ad::weighted_sum(ad::aewin_attention(v[0], av, cfg, mode), p448);
              },
              {probe({4, 4, 8}), w.wq, w.wk, w.wv, w.wo, w.bq, w.bv, w.bo});
    }
    const Tensor p236 = probe({2, 3, 6});
    check("patch_merge", op_tol,
          [&](Tape &, std::span<const Var> v) {
              return ad::weighted_sum(patch_merge(v[0], v[1], v[2], v[3], v[4]), p236);
          },
          {probe({4, 6, 3}), probe({12}), probe({12}), probe({12, 6}), probe({6})});
    check("cpe", op_tol,
          [&](Tape &, std::span<const Var> v) { return ad::weighted_sum(cpe(v[0], v[1]), p453); },
          {probe({4, 5, 3}), probe({3, 3, 3})});
    for (WindowMode mode : {WindowMode::regular, WindowMode::shifted}) {
        const double err = block_grad_check(mode, seed).max_rel_error;
        out.push_back({std::string("aewin_block.") + to_string(mode), err, block_tol, err < block_tol});
    }
    return out;
}

} // namespace aewin
