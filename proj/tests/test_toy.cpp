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

#include <gtest/gtest.h>

#include <cmath>

#include "aewin/toy.hpp"

using namespace aewin;

TEST(ToyData, PureInSeedAndIndex) {
    const Example a = toy_example(3, 17), b = toy_example(3, 17), c = toy_example(4, 17);
    EXPECT_EQ(a.image, b.image);
    EXPECT_EQ(a.label, c.label);
    EXPECT_FALSE(a.image == c.image);
    EXPECT_EQ(a.image.shape(), (Shape{32, 32, 3}));
}

TEST(ToyData, LabelsCycleThroughClasses) {
    const auto data = toy_dataset(0, 12);
    for (std::size_t i = 0; i < data.size(); ++i)
        EXPECT_EQ(data[i].label, i % 3);
}

TEST(ToyData, NoiseFreePatterns) {
    ToyDataConfig cfg;
    cfg.size = 8;
    cfg.noise = 0.0;
    const Example h = toy_example(0, 0, cfg), v = toy_example(0, 1, cfg), k = toy_example(0, 2, cfg);
    for (std::size_t i = 0; i < 8; ++i)
        for (std::size_t j = 0; j < 8; ++j) {
            const double row = (i / 2) % 2 ? 1.0 : -1.0, col = (j / 2) % 2 ? 1.0 : -1.0;
            for (std::size_t ch = 0; ch < 3; ++ch) {
                EXPECT_EQ(h.image.at(i, j, ch), row);
                EXPECT_EQ(v.image.at(i, j, ch), col);
                EXPECT_EQ(k.image.at(i, j, ch), row * col == 1.0 ? -1.0 : 1.0);
            }
        }
}

TEST(ToyData, NoiseLevel) {
    ToyDataConfig clean;
    clean.noise = 0.0;
    double ss = 0.0;
    std::size_t n = 0;
    for (std::uint64_t i = 0; i < 30; ++i) {
        const Tensor noisy = toy_example(1, i).image, base = toy_example(1, i, clean).image;
        for (std::size_t t = 0; t < noisy.size(); ++t) {
            const double d = noisy[t] - base[t];
            ss += d * d;
            ++n;
        }
    }
    EXPECT_NEAR(std::sqrt(ss / static_cast<double>(n)), 0.3, 0.005);
}

TEST(ToyData, RandomPhaseVariantShiftsPatterns) {
    ToyDataConfig cfg;
    cfg.random_phase = true;
    bool moved = false;
    for (std::uint64_t i = 0; i < 12; i += 3)
        moved |= !(toy_example(0, i, cfg).image == toy_example(0, i).image);
    EXPECT_TRUE(moved);
}

TEST(Baseline, PooledLogisticRegressionStaysBelowNinety) {
    const double acc = logistic_baseline_accuracy(toy_dataset(0, 96));
    EXPECT_LT(acc, 0.9);
}

TEST(Training, ZeroStepsGiveUniformLoss) {
    TrainConfig cfg;
    cfg.steps = 0;
    const TrainResult r = train_toy(aewin_toy_spec(), cfg);
    ASSERT_EQ(r.log.size(), 1u);
    EXPECT_NEAR(r.initial_loss, std::log(3.0), 0.1);
}

TEST(Training, ShortRunsAreBitwiseRepeatable) {
    TrainConfig cfg;
    cfg.steps = 20;
    cfg.eval_every = 10;
    const TrainResult a = train_toy(aewin_toy_spec(), cfg), b = train_toy(aewin_toy_spec(), cfg);
    ASSERT_EQ(a.log.size(), b.log.size());
    for (std::size_t i = 0; i < a.log.size(); ++i) {
        EXPECT_EQ(a.log[i].batch_loss, b.log[i].batch_loss);
        EXPECT_EQ(a.log[i].train_loss, b.log[i].train_loss);
    }
    const auto pa = named_tensors(a.params), pb = named_tensors(b.params);
    for (std::size_t i = 0; i < pa.size(); ++i)
        EXPECT_EQ(pa[i].value, pb[i].value) << pa[i].name;
}

TEST(Training, ReachesNinetyPercentWithinBudget) {
    const TrainResult r = train_toy(aewin_toy_spec(), TrainConfig{});
    EXPECT_FALSE(r.diverged);
    EXPECT_GE(r.final_accuracy, 0.9);
    for (const TrainLogEntry &e : r.log) {
        EXPECT_TRUE(std::isfinite(e.batch_loss)) << e.step;
        if (e.step >= 50 && e.train_loss) {
            EXPECT_LT(*e.train_loss, std::log(3.0)) << e.step;
        }
    }
    EXPECT_EQ(r.log.back().step, 300u);
}

TEST(Training, RejectsBadConfigs) {
    TrainConfig cfg;
    cfg.batch = 200;
    EXPECT_THROW(train_toy(aewin_toy_spec(), cfg), ConfigError);
    cfg = TrainConfig{};
    cfg.lr = -1.0;
    EXPECT_THROW(train_toy(aewin_toy_spec(), cfg), ConfigError);
    EXPECT_THROW(train_toy(make_spec("five", 8, {2, 2, 2, 2}, {4, 4, 4, 4}, 2, 5), TrainConfig{}),
                 ConfigError);
}

TEST(Training, DivergenceIsReported) {
    TrainConfig cfg;
    cfg.steps = 40;
    cfg.lr = 1e6;
    const TrainResult r = train_toy(aewin_toy_spec(), cfg);
    EXPECT_TRUE(r.diverged);
    EXPECT_TRUE(std::isnan(r.log.back().batch_loss));
}
