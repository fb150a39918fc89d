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

#include <cstdint>
#include <random>

#include "aewin/tensor.hpp"

namespace aewin {

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream),
                      static_cast<std::uint32_t>(stream >> 32)};
    return Rng(seq);
}

inline Tensor normal_tensor(Shape shape, Rng &rng, double stddev = 1.0) {
    std::normal_distribution<double> dist(0.0, stddev);
    Tensor t(std::move(shape));
    for (double &v : t.storage())
        v = dist(rng);
    return t;
}

inline Tensor uniform_tensor(Shape shape, Rng &rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> dist(lo, hi);
    Tensor t(std::move(shape));
    for (double &v : t.storage())
        v = dist(rng);
    return t;
}

// Normal(0, stddev) resampled until |v| ≤ 2·stddev.
inline Tensor truncated_normal_tensor(Shape shape, Rng &rng, double stddev = 0.02) {
    std::normal_distribution<double> dist(0.0, stddev);
    Tensor t(std::move(shape));
    for (double &v : t.storage()) {
        do {
            v = dist(rng);
        } while (std::abs(v) > 2.0 * stddev);
    }
    return t;
}

} // namespace aewin
