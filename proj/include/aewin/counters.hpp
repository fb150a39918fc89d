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

namespace aewin {

// Multiply-accumulate tallies, per thread. Dense products land in `matmul`,
// the q·kᵀ and p·v products of windowed attention land in `attention`.
struct MacCounts {
    std::uint64_t matmul = 0;
    std::uint64_t attention = 0;
    std::uint64_t conv = 0;

    std::uint64_t total() const { return matmul + attention + conv; }
};

namespace detail {
inline MacCounts *&active_counts() {
    thread_local MacCounts *counts = nullptr;
    return counts;
}
} // namespace detail

// Collects MAC counts for everything executed on this thread while alive.
class MacCounter {
  public:
    MacCounter() : previous_(detail::active_counts()) { detail::active_counts() = &counts_; }
    ~MacCounter() { detail::active_counts() = previous_; }
    MacCounter(const MacCounter &) = delete;
    MacCounter &operator=(const MacCounter &) = delete;

    const MacCounts &counts() const { return counts_; }

  private:
    MacCounts counts_;
    MacCounts *previous_;
};

inline void count_matmul_macs(std::uint64_t n) {
    if (auto *c = detail::active_counts())
        c->matmul += n;
}
inline void count_attention_macs(std::uint64_t n) {
    if (auto *c = detail::active_counts())
        c->attention += n;
}
inline void count_conv_macs(std::uint64_t n) {
    if (auto *c = detail::active_counts())
        c->conv += n;
}

} // namespace aewin
