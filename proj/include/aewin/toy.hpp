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

// Synthetic three-class orientation task and a plain SGD trainer for small
// specs. Class 0: horizontal stripes, class 1: vertical stripes, class 2:
// checkerboard of M×M blocks. Each image carries N(0, 0.3²) pixel noise.

#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <vector>

#include "aewin/backbone.hpp"

namespace aewin {

inline constexpr std::size_t kToyClasses = 3;

struct ToyDataConfig {
    std::size_t size = 32;
    std::size_t block = 2; // stripe width and checker block side
    double noise = 0.3;
    // Draw a per-image pattern offset. Off by default: a random offset makes
    // each class sign-ambiguous and plain SGD then needs ~500 steps.
    bool random_phase = false;
};

struct Example {
    Tensor image; // [size, size, 3]
    std::size_t label = 0;
};

// Pure in (seed, index): the label cycles 0, 1, 2 and the phase and noise
// come from a generator seeded by both.
inline Example toy_example(std::uint64_t seed, std::uint64_t index, const ToyDataConfig &cfg = {}) {
    Rng rng = make_rng(seed, 0xDA7A0000ull + index);
    const std::size_t label = index % kToyClasses;
    const std::size_t period = 2 * cfg.block;
    std::uniform_int_distribution<std::size_t> phase(0, period - 1);
    const std::size_t py = cfg.random_phase ? phase(rng) : 0;
    const std::size_t px = cfg.random_phase ? phase(rng) : 0;
    if (cfg.noise < 0.0)
        throw ConfigError("toy_example: noise must be non-negative");
    std::normal_distribution<double> noise(0.0, cfg.noise > 0.0 ? cfg.noise : 1.0);
    const double amplitude = cfg.noise > 0.0 ? 1.0 : 0.0;
    Tensor img({cfg.size, cfg.size, 3});
    for (std::size_t i = 0; i < cfg.size; ++i)
        for (std::size_t j = 0; j < cfg.size; ++j) {
            const bool row_on = ((i + py) / cfg.block) % 2 == 1;
            const bool col_on = ((j + px) / cfg.block) % 2 == 1;
            bool on = false;
            switch (label) {
            case 0: on = row_on; break;
            case 1: on = col_on; break;
            default: on = row_on != col_on; break;
            }
            for (std::size_t ch = 0; ch < 3; ++ch)
                img.at(i, j, ch) = (on ? 1.0 : -1.0) + amplitude * noise(rng);
        }
    return {std::move(img), label};
}

inline std::vector<Example> toy_dataset(std::uint64_t seed, std::size_t n, const ToyDataConfig &cfg = {}) {
    std::vector<Example> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        out.push_back(toy_example(seed, i, cfg));
    return out;
}

inline std::size_t argmax(const Tensor &t) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < t.size(); ++i)
        if (t[i] > t[best])
            best = i;
    return best;
}

// ─── Training ────────────────────────────────────────────────────────────────

struct TrainConfig {
    std::uint64_t seed = 0;
    std::size_t steps = 300;
    double lr = 0.02;
    std::size_t batch = 8;
    std::size_t train_size = 96;
    std::size_t eval_every = 25;
    ToyDataConfig data;
};

struct TrainLogEntry {
    std::size_t step = 0;
    double batch_loss = 0.0;
    // Full training-set metrics, present on evaluation steps.
    std::optional<double> train_loss;
    std::optional<double> train_accuracy;
};

struct TrainResult {
    std::vector<TrainLogEntry> log;
    ModelParams params;
    double initial_loss = 0.0;
    double final_loss = 0.0;
    double final_accuracy = 0.0;
    bool diverged = false;
};

struct Evaluation {
    double loss = 0.0;
    double accuracy = 0.0;
};

inline Evaluation evaluate(const ModelParams &params, const ModelSpec &spec,
                           const std::vector<Example> &data) {
    Evaluation e;
    std::size_t correct = 0;
    for (const Example &ex : data) {
        Tape tape;
        const Var logits =
            ad::reshape(model_forward(tape.constant(ex.image), bind(tape, params, false), spec),
                        {spec.num_classes});
        e.loss += ad::cross_entropy(logits, ex.label).value().item();
        correct += argmax(logits.value()) == ex.label;
    }
    e.loss /= static_cast<double>(data.size());
    e.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
    return e;
}

// Mean loss and summed-then-averaged gradients over a batch. Examples are
// processed in batch order so the sum is reproducible.
inline double batch_gradient(const ModelParams &params, const ModelSpec &spec,
                             const std::vector<const Example *> &batch, ModelParams &grads) {
    grads = zeros_like(params);
    double loss = 0.0;
    for (const Example *ex : batch) {
        Tape tape;
        ModelVars vars = bind(tape, params, true);
        const Var logits =
            ad::reshape(model_forward(tape.constant(ex->image), vars, spec), {spec.num_classes});
        const Var l = ad::cross_entropy(logits, ex->label);
        loss += l.value().item();
        tape.backward(l);
        visit_params([&](const std::string &, Var &v, Tensor &g) { ops::add_inplace(g, tape.grad(v)); },
                     vars, grads);
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    visit_params([&](const std::string &, Tensor &g) { g = ops::scale(g, inv); }, grads);
    return loss * inv;
}

inline void sgd_step(ModelParams &params, ModelParams &grads, double lr) {
    visit_params(
        [&](const std::string &, Tensor &p, Tensor &g) {
            for (std::size_t i = 0; i < p.size(); ++i)
                p[i] -= lr * g[i];
        },
        params, grads);
}

// Trains from init_weights(spec, seed) on toy_dataset(seed, train_size).
// Batches walk a fresh seeded permutation of the training set each epoch.
// `on_log` sees every entry as it is produced.
template <class OnLog>
TrainResult train_toy(const ModelSpec &spec, const TrainConfig &cfg, OnLog &&on_log) {
    if (cfg.batch == 0 || cfg.train_size == 0 || cfg.batch > cfg.train_size)
        throw ConfigError("train_toy: need 0 < batch <= train_size");
    if (spec.num_classes != kToyClasses)
        throw ConfigError("train_toy: spec '" + spec.name + "' has " +
                          std::to_string(spec.num_classes) + " classes, the toy task has 3");
    if (!(cfg.lr > 0.0) || !std::isfinite(cfg.lr))
        throw ConfigError("train_toy: learning rate must be positive");

    const std::vector<Example> data = toy_dataset(cfg.seed, cfg.train_size, cfg.data);
    TrainResult r;
    r.params = init_weights(spec, cfg.seed);
    const Evaluation first = evaluate(r.params, spec, data);
    r.initial_loss = first.loss;
    {
        TrainLogEntry e{0, first.loss, first.loss, first.accuracy};
        on_log(e);
        r.log.push_back(e);
    }

    Rng order_rng = make_rng(cfg.seed, 0x5EED);
    std::vector<std::size_t> order(data.size());
    std::size_t cursor = data.size();
    ModelParams grads;
    Evaluation last = first;
    for (std::size_t step = 1; step <= cfg.steps; ++step) {
        std::vector<const Example *> batch;
        while (batch.size() < cfg.batch) {
            if (cursor == order.size()) {
                std::iota(order.begin(), order.end(), std::size_t{0});
                std::shuffle(order.begin(), order.end(), order_rng);
                cursor = 0;
            }
            batch.push_back(&data[order[cursor++]]);
        }
        TrainLogEntry e;
        e.step = step;
        try {
            e.batch_loss = batch_gradient(r.params, spec, batch, grads);
            sgd_step(r.params, grads, cfg.lr);
        } catch (const NonFiniteError &) {
            e.batch_loss = std::numeric_limits<double>::quiet_NaN();
        }
        if (!std::isfinite(e.batch_loss)) {
            r.diverged = true;
            on_log(e);
            r.log.push_back(e);
            break;
        }
        if (step % cfg.eval_every == 0 || step == cfg.steps) {
            last = evaluate(r.params, spec, data);
            e.train_loss = last.loss;
            e.train_accuracy = last.accuracy;
        }
        on_log(e);
        r.log.push_back(e);
    }
    r.final_loss = last.loss;
    r.final_accuracy = last.accuracy;
    return r;
}

inline TrainResult train_toy(const ModelSpec &spec, const TrainConfig &cfg) {
    return train_toy(spec, cfg, [](const TrainLogEntry &) {});
}

inline void write_log_entry(std::ostream &out, const TrainLogEntry &e) {
    out << "step " << e.step << " loss " << e.batch_loss;
    if (e.train_loss)
        out << " train_loss " << *e.train_loss << " train_acc " << *e.train_accuracy;
    out << '\n';
}

// ─── Baseline ────────────────────────────────────────────────────────────────

// Per-channel spatial mean of the image.
inline Tensor pooled_features(const Tensor &image) {
    Tape tape;
    return ad::mean_tokens(tape.constant(image)).value();
}

// Multinomial logistic regression on pooled features, full-batch gradient
// descent from zero. Returns training accuracy.
inline double logistic_baseline_accuracy(const std::vector<Example> &data, std::size_t iters = 500,
                                         double lr = 0.5) {
    const std::size_t f = 3, k = kToyClasses;
    std::vector<Tensor> feats;
    for (const Example &ex : data)
        feats.push_back(pooled_features(ex.image));
    Tensor w({f, k}), b({k});
    for (std::size_t it = 0; it < iters; ++it) {
        Tensor gw({f, k}), gb({k});
        for (std::size_t n = 0; n < data.size(); ++n) {
            Tensor z = ops::add_row_bias(ops::matmul(feats[n].reshaped({1, f}), w), b);
            ops::softmax_row_inplace(z.data());
            z[data[n].label] -= 1.0;
            for (std::size_t c = 0; c < k; ++c) {
                gb[c] += z[c];
                for (std::size_t i = 0; i < f; ++i)
                    gw.at(i, c) += feats[n][i] * z[c];
            }
        }
        const double s = lr / static_cast<double>(data.size());
        for (std::size_t i = 0; i < w.size(); ++i)
            w[i] -= s * gw[i];
        for (std::size_t i = 0; i < b.size(); ++i)
            b[i] -= s * gb[i];
    }
    std::size_t correct = 0;
    for (std::size_t n = 0; n < data.size(); ++n)
        correct += argmax(ops::add_row_bias(ops::matmul(feats[n].reshaped({1, f}), w), b)) == data[n].label;
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

} // namespace aewin
