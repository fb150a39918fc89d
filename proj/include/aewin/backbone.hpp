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

// Hierarchical backbone: 4×4 patch embedding, four stages of AEWin blocks
// (alternating regular / shifted windows, CPE at block entry), 2×2 patch
// merging between stages, mean pooling and a linear classifier.

#include <algorithm>
#include <array>
#include <cstdint>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "aewin/attention.hpp"
#include "aewin/io.hpp"
#include "aewin/random.hpp"
#include "aewin/tape.hpp"

namespace aewin {

// ─── Specs ───────────────────────────────────────────────────────────────────

struct StageSpec {
    std::size_t depth = 2;
    std::size_t dim = 64;
    std::size_t heads = 4;
    std::size_t window = 7;
};

struct ModelSpec {
    std::string name;
    std::array<StageSpec, 4> stages;
    std::size_t patch_size = 4;
    std::size_t num_classes = 1000;
    std::size_t mlp_ratio = 4;
    std::size_t in_channels = 3;

    std::size_t window() const { return stages[0].window; }

    void validate() const {
        if (patch_size == 0 || num_classes == 0 || mlp_ratio == 0 || in_channels == 0)
            throw ConfigError("model spec '" + name +
                              "': patch_size, num_classes, mlp_ratio must be positive");
        for (std::size_t s = 0; s < 4; ++s) {
            const StageSpec &st = stages[s];
            const std::string where = "model spec '" + name + "' stage " + std::to_string(s + 1);
            if (st.depth == 0)
                throw ConfigError(where + ": depth must be at least 1");
            if (s > 0 && st.dim != 2 * stages[s - 1].dim)
                throw ConfigError(where + ": dim " + std::to_string(st.dim) +
                                  " is not twice the previous stage's " +
                                  std::to_string(stages[s - 1].dim));
            try {
                AewinConfig{st.dim, st.heads, st.window, st.window / 2}.validate(
                    st.depth > 1 ? WindowMode::shifted : WindowMode::regular);
            } catch (const ConfigError &e) {
                throw ConfigError(where + ": " + e.what());
            }
        }
    }
};

inline ModelSpec make_spec(std::string name, std::size_t dim, std::array<std::size_t, 4> depths,
                           std::array<std::size_t, 4> heads, std::size_t window,
                           std::size_t num_classes) {
    ModelSpec spec;
    spec.name = std::move(name);
    for (std::size_t s = 0; s < 4; ++s)
        spec.stages[s] = {depths[s], dim << s, heads[s], window};
    spec.num_classes = num_classes;
    spec.validate();
    return spec;
}

inline ModelSpec aewin_t_spec() { return make_spec("aewin-t", 64, {2, 2, 16, 2}, {4, 4, 8, 16}, 7, 1000); }
inline ModelSpec aewin_b_spec() { return make_spec("aewin-b", 96, {2, 4, 24, 2}, {4, 8, 16, 32}, 7, 1000); }
inline ModelSpec aewin_toy_spec() { return make_spec("aewin-toy", 8, {2, 2, 2, 2}, {4, 4, 4, 4}, 2, 3); }

inline std::vector<std::string> preset_names() { return {"aewin-t", "aewin-b", "aewin-toy"}; }

inline nlohmann::json to_json(const ModelSpec &spec) {
    nlohmann::json j;
    j["name"] = spec.name;
    for (const StageSpec &s : spec.stages) {
        j["dims"].push_back(s.dim);
        j["depths"].push_back(s.depth);
        j["heads"].push_back(s.heads);
    }
    j["window"] = spec.window();
    j["patch_size"] = spec.patch_size;
    j["num_classes"] = spec.num_classes;
    j["mlp_ratio"] = spec.mlp_ratio;
    return j;
}

inline ModelSpec spec_from_json(const nlohmann::json &j) {
    try {
        ModelSpec spec;
        spec.name = j.at("name").get<std::string>();
        const auto dims = j.at("dims").get<std::vector<std::size_t>>();
        const auto depths = j.at("depths").get<std::vector<std::size_t>>();
        const auto heads = j.at("heads").get<std::vector<std::size_t>>();
        if (dims.size() != 4 || depths.size() != 4 || heads.size() != 4)
            throw ConfigError("model spec: dims, depths and heads need exactly 4 entries");
        const auto window = j.at("window").get<std::size_t>();
        for (std::size_t s = 0; s < 4; ++s)
            spec.stages[s] = {depths[s], dims[s], heads[s], window};
        spec.patch_size = j.value("patch_size", std::size_t{4});
        spec.num_classes = j.at("num_classes").get<std::size_t>();
        spec.mlp_ratio = j.value("mlp_ratio", std::size_t{4});
        spec.validate();
        return spec;
    } catch (const nlohmann::json::exception &e) {
        throw ConfigError(std::string("model spec: ") + e.what());
    }
}

// A preset name, or a path to a spec file.
inline ModelSpec load_model_spec(const std::string &name_or_path) {
    if (name_or_path == "aewin-t")
        return aewin_t_spec();
    if (name_or_path == "aewin-b")
        return aewin_b_spec();
    if (name_or_path == "aewin-toy")
        return aewin_toy_spec();
    std::ifstream f(name_or_path);
    if (!f)
        throw ConfigError("unknown spec '" + name_or_path + "' (not a preset, not a readable file)");
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception &e) {
        throw ConfigError("spec file '" + name_or_path + "': " + e.what());
    }
    return spec_from_json(j);
}

// Window actually used at an H×W stage: M, or the map itself when it is
// smaller than M.
inline std::size_t stage_window(std::size_t m, std::size_t h, std::size_t w) {
    return (h < m || w < m) ? std::min(h, w) : m;
}

inline AewinConfig stage_config(const StageSpec &st, std::size_t h, std::size_t w) {
    const std::size_t m = stage_window(st.window, h, w);
    return AewinConfig{st.dim, st.heads, m, m / 2};
}

// ─── Parameters ──────────────────────────────────────────────────────────────

template <class T> struct BlockParamsT {
    T cpe_kernel; // [3, 3, C]
    T norm1_gamma, norm1_beta;
    AttentionWeightsT<T> attn;
    T norm2_gamma, norm2_beta;
    T fc1_weight, fc1_bias; // [C, rC], [rC]
    T fc2_weight, fc2_bias; // [rC, C], [C]
};

template <class T> struct StageParamsT {
    // Stage 1 is fed by the patch embedding and has no merge layer.
    T merge_norm_gamma, merge_norm_beta; // [4C']
    T merge_weight, merge_bias;          // [4C', 2C'], [2C']
    std::vector<BlockParamsT<T>> blocks;
};

template <class T> struct ModelParamsT {
    T patch_weight, patch_bias; // [p·p·3, C1], [C1]
    T patch_norm_gamma, patch_norm_beta;
    std::array<StageParamsT<T>, 4> stages;
    T head_norm_gamma, head_norm_beta;
    T head_weight, head_bias; // [C4, classes], [classes]
};

using BlockParams = BlockParamsT<Tensor>;
using ModelParams = ModelParamsT<Tensor>;
using BlockVars = BlockParamsT<Var>;
using ModelVars = ModelParamsT<Var>;

template <class F, class... P>
void visit_params(F &&f, const std::string &prefix, BlockParamsT<P> &...p) {
    f(prefix + "cpe.kernel", p.cpe_kernel...);
    f(prefix + "norm1.gamma", p.norm1_gamma...);
    f(prefix + "norm1.beta", p.norm1_beta...);
    visit_params(f, prefix + "attn.", p.attn...);
    f(prefix + "norm2.gamma", p.norm2_gamma...);
    f(prefix + "norm2.beta", p.norm2_beta...);
    f(prefix + "mlp.fc1.weight", p.fc1_weight...);
    f(prefix + "mlp.fc1.bias", p.fc1_bias...);
    f(prefix + "mlp.fc2.weight", p.fc2_weight...);
    f(prefix + "mlp.fc2.bias", p.fc2_bias...);
}

// Visits every parameter in a fixed order with its dotted name. Several
// structurally identical parameter sets can be walked in lockstep.
template <class F, class First, class... P>
void visit_params(F &&f, ModelParamsT<First> &first, ModelParamsT<P> &...rest) {
    f("patch_embed.weight", first.patch_weight, rest.patch_weight...);
    f("patch_embed.bias", first.patch_bias, rest.patch_bias...);
    f("patch_embed.norm.gamma", first.patch_norm_gamma, rest.patch_norm_gamma...);
    f("patch_embed.norm.beta", first.patch_norm_beta, rest.patch_norm_beta...);
    for (std::size_t s = 0; s < 4; ++s) {
        const std::string stage = "stages." + std::to_string(s) + ".";
        if (s > 0) {
            f(stage + "merge.norm.gamma", first.stages[s].merge_norm_gamma,
              rest.stages[s].merge_norm_gamma...);
            f(stage + "merge.norm.beta", first.stages[s].merge_norm_beta,
              rest.stages[s].merge_norm_beta...);
            f(stage + "merge.weight", first.stages[s].merge_weight, rest.stages[s].merge_weight...);
            f(stage + "merge.bias", first.stages[s].merge_bias, rest.stages[s].merge_bias...);
        }
        for (std::size_t b = 0; b < first.stages[s].blocks.size(); ++b)
            visit_params(f, stage + "blocks." + std::to_string(b) + ".",
                         first.stages[s].blocks[b], rest.stages[s].blocks[b]...);
    }
    f("head.norm.gamma", first.head_norm_gamma, rest.head_norm_gamma...);
    f("head.norm.beta", first.head_norm_beta, rest.head_norm_beta...);
    f("head.weight", first.head_weight, rest.head_weight...);
    f("head.bias", first.head_bias, rest.head_bias...);
}

// Same structure with default-constructed leaves.
template <class U, class T> ModelParamsT<U> skeleton_like(const ModelParamsT<T> &p) {
    ModelParamsT<U> out;
    for (std::size_t s = 0; s < 4; ++s)
        out.stages[s].blocks.resize(p.stages[s].blocks.size());
    return out;
}

inline BlockParams zero_block(std::size_t c, std::size_t mlp_ratio) {
    const std::size_t hidden = c * mlp_ratio;
    return {Tensor({3, 3, c}),
            Tensor({c}, 1.0),
            Tensor({c}),
            zero_attention_weights(c),
            Tensor({c}, 1.0),
            Tensor({c}),
            Tensor({c, hidden}),
            Tensor({hidden}),
            Tensor({hidden, c}),
            Tensor({c})};
}

// Correctly shaped parameters: zero weights and biases, unit norm gains.
inline ModelParams zero_params(const ModelSpec &spec) {
    spec.validate();
    ModelParams p;
    const std::size_t c1 = spec.stages[0].dim;
    const std::size_t patch_in = spec.patch_size * spec.patch_size * spec.in_channels;
    p.patch_weight = Tensor({patch_in, c1});
    p.patch_bias = Tensor({c1});
    p.patch_norm_gamma = Tensor({c1}, 1.0);
    p.patch_norm_beta = Tensor({c1});
    for (std::size_t s = 0; s < 4; ++s) {
        const std::size_t c = spec.stages[s].dim;
        if (s > 0) {
            const std::size_t prev = spec.stages[s - 1].dim;
            p.stages[s].merge_norm_gamma = Tensor({4 * prev}, 1.0);
            p.stages[s].merge_norm_beta = Tensor({4 * prev});
            p.stages[s].merge_weight = Tensor({4 * prev, c});
            p.stages[s].merge_bias = Tensor({c});
        }
        for (std::size_t b = 0; b < spec.stages[s].depth; ++b)
            p.stages[s].blocks.push_back(zero_block(c, spec.mlp_ratio));
    }
    const std::size_t c4 = spec.stages[3].dim;
    p.head_norm_gamma = Tensor({c4}, 1.0);
    p.head_norm_beta = Tensor({c4});
    p.head_weight = Tensor({c4, spec.num_classes});
    p.head_bias = Tensor({spec.num_classes});
    return p;
}

// Same shapes as zero_params with every entry zero, norm gains included.
inline ModelParams zeros_like(const ModelParams &params) {
    ModelParams out = skeleton_like<Tensor>(params);
    visit_params([](const std::string &, Tensor &src, Tensor &dst) { dst = Tensor(src.shape()); },
                 const_cast<ModelParams &>(params), out);
    return out;
}

inline bool is_bias_name(const std::string &name) {
    auto ends = [&](std::string_view suf) {
        return name.size() >= suf.size() && name.compare(name.size() - suf.size(), suf.size(), suf) == 0;
    };
    return ends(".bias") || ends(".beta") || ends(".bq") || ends(".bv") || ends(".bo");
}

inline bool is_gain_name(const std::string &name) {
    return name.size() >= 6 && name.compare(name.size() - 6, 6, ".gamma") == 0;
}

// Truncated normal (σ = 0.02, ±2σ) for weights and CPE kernels, zeros for
// biases and norm shifts, ones for norm gains.
inline ModelParams init_weights(const ModelSpec &spec, std::uint64_t seed) {
    ModelParams p = zero_params(spec);
    Rng rng = make_rng(seed, 0x1417);
    visit_params(
        [&](const std::string &name, Tensor &t) {
            if (is_gain_name(name))
                t = Tensor(t.shape(), 1.0);
            else if (is_bias_name(name))
                t = Tensor(t.shape());
            else
                t = truncated_normal_tensor(t.shape(), rng, 0.02);
        },
        p);
    return p;
}

inline std::vector<NamedTensor> named_tensors(const ModelParams &params) {
    std::vector<NamedTensor> out;
    visit_params([&](const std::string &name, Tensor &t) { out.push_back({name, t}); },
                 const_cast<ModelParams &>(params));
    return out;
}

inline void save_weights(const std::string &path, const ModelParams &params) {
    save_tensors(path, named_tensors(params));
}

// Loads and checks every tensor against the shapes `spec` implies.
inline ModelParams load_weights(const std::string &path, const ModelSpec &spec) {
    const std::vector<NamedTensor> stored = load_tensors(path);
    ModelParams p = zero_params(spec);
    std::size_t used = 0;
    visit_params(
        [&](const std::string &name, Tensor &t) {
            auto it = std::find_if(stored.begin(), stored.end(),
                                   [&](const NamedTensor &n) { return n.name == name; });
            if (it == stored.end())
                throw IoError("weights '" + path + "': missing tensor '" + name + "'");
            if (it->value.shape() != t.shape())
                throw ShapeError("weights '" + path + "': tensor '" + name + "' has shape " +
                                 shape_string(it->value.shape()) + ", spec '" + spec.name +
                                 "' expects " + shape_string(t.shape()));
            t = it->value;
            ++used;
        },
        p);
    if (used != stored.size())
        throw ShapeError("weights '" + path + "': " + std::to_string(stored.size() - used) +
                         " tensors are not part of spec '" + spec.name + "'");
    return p;
}

inline ModelVars bind(Tape &tape, const ModelParams &params, bool trainable) {
    ModelParams &mut = const_cast<ModelParams &>(params);
    ModelVars vars = skeleton_like<Var>(params);
    visit_params(
        [&](const std::string &, Tensor &t, Var &v) {
            v = trainable ? tape.leaf(t) : tape.constant(t);
        },
        mut, vars);
    return vars;
}

inline BlockVars bind(Tape &tape, const BlockParams &params, bool trainable) {
    BlockParams &mut = const_cast<BlockParams &>(params);
    BlockVars vars;
    visit_params(
        [&](const std::string &, Tensor &t, Var &v) {
            v = trainable ? tape.leaf(t) : tape.constant(t);
        },
        std::string(), mut, vars);
    return vars;
}

// ─── Parameter report ────────────────────────────────────────────────────────

struct ParamEntry {
    std::string component; // "patch_embed", "stage2.merge", "stage3.attention", ...
    std::size_t stage = 0; // 1..4, 0 for embedding and head
    std::uint64_t count = 0;
};

struct ParamReport {
    std::string spec;
    std::vector<ParamEntry> entries;
    std::uint64_t total = 0;

    std::uint64_t stage_total(std::size_t stage) const {
        std::uint64_t s = 0;
        for (const ParamEntry &e : entries)
            if (e.stage == stage)
                s += e.count;
        return s;
    }
};

// Closed-form parameter count. Per block: CPE 9C, two norms 4C, attention
// 4C² + 3C (no key bias), MLP 2rC² + rC + C.
inline ParamReport param_count(const ModelSpec &spec) {
    spec.validate();
    ParamReport r;
    r.spec = spec.name;
    auto add = [&](std::string name, std::size_t stage, std::uint64_t n) {
        r.entries.push_back({std::move(name), stage, n});
        r.total += n;
    };
    const std::uint64_t p = spec.patch_size, c1 = spec.stages[0].dim;
    add("patch_embed", 0, p * p * spec.in_channels * c1 + c1 + 2 * c1);
    for (std::size_t s = 0; s < 4; ++s) {
        const std::uint64_t c = spec.stages[s].dim, depth = spec.stages[s].depth;
        const std::uint64_t hidden = spec.mlp_ratio * c;
        const std::string tag = "stage" + std::to_string(s + 1) + ".";
        if (s > 0) {
            const std::uint64_t prev = spec.stages[s - 1].dim;
            add(tag + "merge", s + 1, 2 * 4 * prev + 4 * prev * c + c);
        }
        add(tag + "cpe", s + 1, depth * 9 * c);
        add(tag + "norms", s + 1, depth * 4 * c);
        add(tag + "attention", s + 1, depth * (4 * c * c + 3 * c));
        add(tag + "mlp", s + 1, depth * (2 * c * hidden + hidden + c));
    }
    const std::uint64_t c4 = spec.stages[3].dim, k = spec.num_classes;
    add("head", 0, 2 * c4 + c4 * k + k);
    return r;
}

// ─── Forward ─────────────────────────────────────────────────────────────────

// Sublayer switches for ablations; all on for the real model.
struct BlockToggles {
    bool cpe = true;
    bool attention = true;
    bool mlp = true;
};

// x + CPE(x), then + AEWin(LN(·)), then + MLP(LN(·)).
inline Var aewin_block(Var x, const BlockVars &p, const AewinConfig &cfg, WindowMode mode,
                       const BlockToggles &toggles = {}) {
    Var y = toggles.cpe ? ad::add(x, ad::depthwise_conv3x3(x, p.cpe_kernel)) : x;
    if (toggles.attention) {
        Var a = ad::aewin_attention(ad::layer_norm(y, p.norm1_gamma, p.norm1_beta), p.attn, cfg, mode);
        y = ad::add(y, a);
    }
    if (toggles.mlp) {
        Var h = ad::layer_norm(y, p.norm2_gamma, p.norm2_beta);
        h = ad::linear(ad::gelu(ad::linear(h, p.fc1_weight, p.fc1_bias)), p.fc2_weight, p.fc2_bias);
        y = ad::add(y, h);
    }
    return y;
}

inline Tensor aewin_block(const Tensor &x, const BlockParams &params, const AewinConfig &cfg,
                          WindowMode mode) {
    Tape tape;
    return aewin_block(tape.constant(x), bind(tape, params, false), cfg, mode).value();
}

inline Var cpe(Var x, Var kernels) { return ad::add(x, ad::depthwise_conv3x3(x, kernels)); }

inline Tensor cpe(const Tensor &x, const Tensor &kernels) {
    Tape tape;
    return cpe(tape.constant(x), tape.constant(kernels)).value();
}

// [H, W, 3] → [H/p, W/p, C1]: flatten each p×p patch (row-major, channels
// last), project, normalize.
inline Var patch_embed(Var image, const ModelVars &p, std::size_t patch) {
    require_rank(image.value(), 3, "patch_embed");
    const Shape s = image.shape();
    if (s[0] % patch != 0 || s[1] % patch != 0)
        throw DivisibilityError("patch_embed: image " + std::to_string(s[0]) + "x" +
                                std::to_string(s[1]) + " is not divisible by patch size " +
                                std::to_string(patch));
    Var flat = ad::gather_tokens(image, ops::patch_index(s[0], s[1], patch),
                                 {s[0] / patch, s[1] / patch, patch * patch * s[2]});
    return ad::layer_norm(ad::linear(flat, p.patch_weight, p.patch_bias), p.patch_norm_gamma,
                          p.patch_norm_beta);
}

// [H, W, C] → [H/2, W/2, 2C]: concatenate each 2×2 neighbourhood as
// (0,0), (0,1), (1,0), (1,1), normalize, project 4C → 2C.
inline Var patch_merge(Var x, Var norm_gamma, Var norm_beta, Var weight, Var bias) {
    require_rank(x.value(), 3, "patch_merge");
    const Shape s = x.shape();
    if (s[0] % 2 != 0 || s[1] % 2 != 0)
        throw DivisibilityError("patch_merge: map " + std::to_string(s[0]) + "x" +
                                std::to_string(s[1]) + " has an odd side");
    Var cat = ad::gather_tokens(x, ops::patch_index(s[0], s[1], 2), {s[0] / 2, s[1] / 2, 4 * s[2]});
    return ad::linear(ad::layer_norm(cat, norm_gamma, norm_beta), weight, bias);
}

struct BlockTrace {
    std::size_t stage;
    std::size_t block;
    WindowMode mode;
    std::size_t window;
};

// Shapes after each stage and the mode every block ran in.
struct ForwardTrace {
    Shape embedding;
    std::vector<Shape> stages;
    std::vector<BlockTrace> blocks;
};

inline Var model_forward(Var image, const ModelVars &p, const ModelSpec &spec,
                         ForwardTrace *trace = nullptr) {
    Var x = patch_embed(image, p, spec.patch_size);
    if (trace)
        *trace = ForwardTrace{x.shape(), {}, {}};
    for (std::size_t s = 0; s < 4; ++s) {
        const StageParamsT<Var> &st = p.stages[s];
        try {
            if (s > 0)
                x = patch_merge(x, st.merge_norm_gamma, st.merge_norm_beta, st.merge_weight,
                                st.merge_bias);
            const Shape xs = x.shape();
            const AewinConfig cfg = stage_config(spec.stages[s], xs[0], xs[1]);
            ops::check_window_divisibility(xs[0], xs[1], cfg.window);
            for (std::size_t b = 0; b < st.blocks.size(); ++b) {
                const WindowMode mode = b % 2 == 0 ? WindowMode::regular : WindowMode::shifted;
                x = aewin_block(x, st.blocks[b], cfg, mode);
                if (trace)
                    trace->blocks.push_back({s + 1, b, mode, cfg.window});
            }
        } catch (const DivisibilityError &e) {
            throw DivisibilityError("stage " + std::to_string(s + 1) + ": " + e.what());
        }
        if (trace)
            trace->stages.push_back(x.shape());
    }
    Var pooled = ad::mean_tokens(x);
    pooled = ad::layer_norm(pooled, p.head_norm_gamma, p.head_norm_beta);
    return ad::linear(ad::reshape(pooled, {1, pooled.shape()[0]}), p.head_weight, p.head_bias);
}

inline Tensor model_forward(const Tensor &image, const ModelParams &params, const ModelSpec &spec,
                            ForwardTrace *trace = nullptr) {
    Tape tape;
    const Var logits = model_forward(tape.constant(image), bind(tape, params, false), spec, trace);
    return logits.value().reshaped({spec.num_classes});
}

} // namespace aewin
