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
#include <numbers>

#include "aewin/gradcheck.hpp"
#include "aewin/ops.hpp"
#include "aewin/random.hpp"
#include "aewin/tape.hpp"

using namespace aewin;

namespace {

// Reference kernels kept deliberately naive.
Tensor naive_matmul(const Tensor &a, const Tensor &b) {
    Tensor c({a.dim(0), b.dim(1)});
    for (std::size_t i = 0; i < a.dim(0); ++i)
        for (std::size_t j = 0; j < b.dim(1); ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < a.dim(1); ++k)
                s += a.at(i, k) * b.at(k, j);
            c.at(i, j) = s;
        }
    return c;
}

Tensor naive_dwconv(const Tensor &x, const Tensor &k) {
    const long h = long(x.dim(0)), w = long(x.dim(1)), c = long(x.dim(2));
    Tensor y(x.shape());
    for (long i = 0; i < h; ++i)
        for (long j = 0; j < w; ++j)
            for (long ch = 0; ch < c; ++ch)
                for (long a = 0; a < 3; ++a)
                    for (long b = 0; b < 3; ++b) {
                        const long si = i + a - 1, sj = j + b - 1;
                        if (si >= 0 && si < h && sj >= 0 && sj < w)
                            y.at(i, j, ch) += k.at(a, b, ch) * x.at(si, sj, ch);
                    }
    return y;
}

} // namespace

TEST(Matmul, IdentityAndHandProduct) {
    const Tensor id = Tensor::matrix({{1, 0}, {0, 1}});
    const Tensor b = Tensor::matrix({{5, 6}, {7, 8}});
    EXPECT_EQ(ops::matmul(id, b), b);
    EXPECT_EQ(ops::matmul(Tensor::matrix({{1, 2}}), Tensor::matrix({{3}, {4}})),
              Tensor::matrix({{11}}));
}

TEST(Matmul, MatchesTripleLoop) {
    Rng rng = make_rng(7);
    const Tensor a = normal_tensor({3, 4}, rng), b = normal_tensor({4, 2}, rng);
    EXPECT_LT(max_abs_diff(ops::matmul(a, b), naive_matmul(a, b)), 1e-12);
}

TEST(Matmul, ShapeMismatchThrows) {
    EXPECT_THROW(ops::matmul(Tensor({2, 3}), Tensor({2, 3})), ShapeError);
}

TEST(Matmul, BitwiseDeterministic) {
    Rng rng = make_rng(11);
    const Tensor a = normal_tensor({17, 33}, rng), b = normal_tensor({33, 9}, rng);
    const Tensor first = ops::matmul(a, b);
    for (int rep = 0; rep < 5; ++rep)
        EXPECT_EQ(ops::matmul(a, b), first);
}

TEST(Softmax, Examples) {
    const Tensor half = ops::softmax_rows(Tensor::matrix({{0, 0}}));
    EXPECT_DOUBLE_EQ(half[0], 0.5);
    EXPECT_DOUBLE_EQ(half[1], 0.5);
    const Tensor third = ops::softmax_rows(Tensor::matrix({{1000, 1000, 1000}}));
    for (double v : third.data())
        EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
    const Tensor y = ops::softmax_rows(Tensor::matrix({{1, 2, 3}}));
    const double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
    EXPECT_NEAR(y[0], std::exp(1.0) / z, 1e-12);
    EXPECT_NEAR(y[1], std::exp(2.0) / z, 1e-12);
    EXPECT_NEAR(y[2], std::exp(3.0) / z, 1e-12);
}

TEST(Softmax, RowsSumToOneAndShiftInvariant) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng = make_rng(seed);
        Tensor x = normal_tensor({5, 7}, rng, 10.0);
        const Tensor y = ops::softmax_rows(x);
        for (std::size_t i = 0; i < 5; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < 7; ++j) {
                EXPECT_GE(y.at(i, j), 0.0);
                s += y.at(i, j);
            }
            EXPECT_NEAR(s, 1.0, 1e-9);
            for (std::size_t j = 0; j < 7; ++j)
                x.at(i, j) += 3.75 * double(i + 1);
        }
        EXPECT_LT(max_abs_diff(ops::softmax_rows(x), y), 1e-9);
    }
}

TEST(LayerNorm, Examples) {
    const Tensor one = Tensor::vector({1, 1}), zero = Tensor::vector({0, 0});
    const Tensor flat = ops::layer_norm(Tensor::matrix({{4, 4}}), one, zero);
    EXPECT_EQ(flat[0], 0.0);
    EXPECT_EQ(flat[1], 0.0);

    const Tensor y = ops::layer_norm(Tensor::matrix({{1, 3}}), one, zero);
    const double expect = 1.0 / std::sqrt(1.0 + 1e-5);
    EXPECT_NEAR(y[0], -expect, 1e-12);
    EXPECT_NEAR(y[1], expect, 1e-12);
    EXPECT_NEAR(y[0], -1.0, 1e-4);

    const Tensor beta = Tensor::vector({0.25, -2.0});
    const Tensor b = ops::layer_norm(Tensor::matrix({{1, 3}, {-7, 2}}), zero, beta);
    EXPECT_EQ(b, Tensor::matrix({{0.25, -2.0}, {0.25, -2.0}}));
}

TEST(LayerNorm, ChannelMismatchThrows) {
    EXPECT_THROW(ops::layer_norm(Tensor({2, 3}), Tensor({2}), Tensor({2})), ShapeError);
}

TEST(Gelu, Examples) {
    EXPECT_EQ(ops::gelu_scalar(0.0), 0.0);
    EXPECT_NEAR(ops::gelu_scalar(30.0), 30.0, 1e-12);
    const double phi1 = 0.5 * (1.0 + std::erf(1.0 / std::numbers::sqrt2));
    EXPECT_NEAR(ops::gelu_scalar(1.0), phi1, 1e-15);
    EXPECT_NEAR(ops::gelu_scalar(1.0), 0.8413, 1e-3);
}

TEST(DepthwiseConv, IdentityKernel) {
    Rng rng = make_rng(3);
    const Tensor x = normal_tensor({5, 4, 3}, rng);
    Tensor k({3, 3, 3});
    for (std::size_t c = 0; c < 3; ++c)
        k.at(1, 1, c) = 1.0;
    EXPECT_EQ(ops::depthwise_conv3x3(x, k), x);
}

TEST(DepthwiseConv, CountsValidTaps) {
    const Tensor y = ops::depthwise_conv3x3(Tensor({4, 4, 1}, 1.0), Tensor({3, 3, 1}, 1.0));
    EXPECT_EQ(y.at(0, 0, 0), 4.0);
    EXPECT_EQ(y.at(3, 3, 0), 4.0);
    EXPECT_EQ(y.at(0, 2, 0), 6.0);
    EXPECT_EQ(y.at(2, 0, 0), 6.0);
    EXPECT_EQ(y.at(1, 1, 0), 9.0);
    EXPECT_EQ(y.at(2, 2, 0), 9.0);
}

TEST(DepthwiseConv, MatchesNaiveLoops) {
    Rng rng = make_rng(5);
    const Tensor x = normal_tensor({6, 5, 4}, rng), k = normal_tensor({3, 3, 4}, rng);
    EXPECT_LT(max_abs_diff(ops::depthwise_conv3x3(x, k), naive_dwconv(x, k)), 1e-12);
}

TEST(DepthwiseConv, ChannelMismatchThrows) {
    EXPECT_THROW(ops::depthwise_conv3x3(Tensor({4, 4, 2}), Tensor({3, 3, 3})), ShapeError);
}

TEST(CyclicRoll, Examples) {
    Rng rng = make_rng(9);
    const Tensor x = normal_tensor({3, 5, 2}, rng);
    EXPECT_EQ(ops::cyclic_roll(x, 0, 0), x);

    const Tensor row({1, 4, 1}, std::vector<double>{0, 1, 2, 3});
    EXPECT_EQ(ops::cyclic_roll(row, 0, 1), Tensor({1, 4, 1}, std::vector<double>{3, 0, 1, 2}));
}

TEST(CyclicRoll, InverseIsExactIdentity) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng = make_rng(seed);
        const Tensor x = normal_tensor({4 + seed % 3, 3 + seed % 5, 2}, rng);
        const long dy = long(seed) - 7, dx = 3 * long(seed) - 11;
        EXPECT_EQ(ops::cyclic_roll(ops::cyclic_roll(x, dy, dx), -dy, -dx), x);
        const Tensor r = ops::cyclic_roll(x, dy, dx);
        const std::size_t h = x.dim(0), w = x.dim(1);
        for (std::size_t i = 0; i < h; ++i)
            for (std::size_t j = 0; j < w; ++j)
                EXPECT_EQ(r.at(ops::wrap(long(i) + dy, h), ops::wrap(long(j) + dx, w), 1),
                          x.at(i, j, 1));
    }
}

TEST(GradCheck, PolynomialExamples) {
    Rng rng = make_rng(1);
    const Tensor x = normal_tensor({3, 4}, rng);
    EXPECT_LT(grad_check([](Tape &, Var v) { return ad::sum(v); }, x), 1e-10);

    Tape tape;
    const Var v = tape.leaf(Tensor::vector({1, 2}));
    tape.backward(ad::sum_squares(v));
    EXPECT_EQ(tape.grad(v), Tensor::vector({2, 4}));
    EXPECT_LT(grad_check([](Tape &, Var v) { return ad::sum_squares(v); }, Tensor::vector({1, 2})),
              1e-9);
}

TEST(GradCheck, NonScalarOutputThrows) {
    EXPECT_THROW(grad_check([](Tape &, Var v) { return v; }, Tensor({2, 2}, 1.0)), ShapeError);
}

TEST(Tape, NonFiniteIsAnError) {
    Tape tape;
    const Var x = tape.leaf(Tensor::matrix({{1e300, 1e300}}));
    EXPECT_THROW(ad::matmul(x, tape.leaf(Tensor::matrix({{1e300}, {1e300}}))), NonFiniteError);
}

TEST(Tape, LeafGradientsMatchLeafShapes) {
    Rng rng = make_rng(4);
    Tape tape;
    const Var a = tape.leaf(normal_tensor({3, 4}, rng));
    const Var b = tape.leaf(normal_tensor({4, 5}, rng));
    const Var bias = tape.leaf(normal_tensor({5}, rng));
    const Var unused = tape.leaf(normal_tensor({2}, rng));
    tape.backward(ad::sum_squares(ad::linear(ad::matmul(a, b), tape.leaf(normal_tensor({5, 5}, rng)), bias)));
    EXPECT_EQ(tape.grad(a).shape(), a.shape());
    EXPECT_EQ(tape.grad(b).shape(), b.shape());
    EXPECT_EQ(tape.grad(bias).shape(), bias.shape());
    EXPECT_EQ(tape.grad(unused), Tensor({2}));
}

// Every primitive with a VJP against central differences, 20 seeds each.
class OpGradients : public ::testing::TestWithParam<std::uint64_t> {};

TEST_P(OpGradients, PassCentralDifferences) {
    const std::uint64_t seed = GetParam();
    Rng rng = make_rng(seed, 100);
    const double tol = 1e-6;
    auto probe = [&](const Shape &s) { return normal_tensor(s, rng); };

    const Tensor r23 = probe({2, 3});
    EXPECT_LT(grad_check(
                  [&](Tape &, std::span<const Var> v) {
                      return ad::weighted_sum(ad::matmul(v[0], v[1]), r23);
                  },
                  {probe({2, 4}), probe({4, 3})})
                  .max_rel_error,
              tol)
        << "matmul";

    const Tensor r35 = probe({3, 5});
    EXPECT_LT(grad_check([&](Tape &, Var v) { return ad::weighted_sum(ad::softmax_rows(v), r35); },
                         probe({3, 5})),
              tol)
        << "softmax_rows";

    const Tensor r46 = probe({4, 6});
    EXPECT_LT(grad_check(
                  [&](Tape &, std::span<const Var> v) {
                      return ad::weighted_sum(ad::layer_norm(v[0], v[1], v[2]), r46);
                  },
                  {probe({4, 6}), probe({6}), probe({6})})
                  .max_rel_error,
              tol)
        << "layer_norm";

    const Tensor r7 = probe({7});
    EXPECT_LT(grad_check([&](Tape &, Var v) { return ad::weighted_sum(ad::gelu(v), r7); },
                         probe({7})),
              tol)
        << "gelu";

    const Tensor r453 = probe({4, 5, 3});
    EXPECT_LT(grad_check(
                  [&](Tape &, std::span<const Var> v) {
                      return ad::weighted_sum(ad::depthwise_conv3x3(v[0], v[1]), r453);
                  },
                  {probe({4, 5, 3}), probe({3, 3, 3})})
                  .max_rel_error,
              tol)
        << "depthwise_conv3x3";

    EXPECT_LT(grad_check(
                  [&](Tape &, Var v) { return ad::weighted_sum(ad::cyclic_roll(v, 2, -1), r453); },
                  probe({4, 5, 3})),
              tol)
        << "cyclic_roll";

    const Tensor r34 = probe({3, 4});
    EXPECT_LT(grad_check(
                  [&](Tape &, std::span<const Var> v) {
                      return ad::weighted_sum(ad::linear(v[0], v[1], v[2]), r34);
                  },
                  {probe({3, 2}), probe({2, 4}), probe({4})})
                  .max_rel_error,
              tol)
        << "linear";

    EXPECT_LT(grad_check(
                  [&](Tape &, Var v) { return ad::cross_entropy(v, seed % 5); }, probe({5})),
              tol)
        << "cross_entropy";

    const Tensor r3 = probe({3});
    EXPECT_LT(grad_check([&](Tape &, Var v) { return ad::weighted_sum(ad::mean_tokens(v), r3); },
                         probe({2, 4, 3})),
              tol)
        << "mean_tokens";
}

INSTANTIATE_TEST_SUITE_P(Seeds, OpGradients, ::testing::Range<std::uint64_t>(0, 20));
