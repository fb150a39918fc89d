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

// Tensor container: a text manifest followed by raw payloads.
//
//   aewin-tensors 1
//   count <N>
//   <name> <rank> <d0> ... <d_{rank-1}> <byte offset into payload>
//   ...
//   end
//   <payload: little-endian IEEE-754 doubles, row-major, tensor after tensor>

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "aewin/tensor.hpp"

namespace aewin {

struct NamedTensor {
    std::string name;
    Tensor value;
};

namespace detail {
inline std::uint64_t to_little_endian(std::uint64_t v) {
    if constexpr (std::endian::native == std::endian::little)
        return v;
    std::uint64_t r = 0;
    for (int i = 0; i < 8; ++i)
        r |= ((v >> (8 * i)) & 0xffu) << (8 * (7 - i));
    return r;
}
} // namespace detail

inline void write_tensors(std::ostream &out, const std::vector<NamedTensor> &tensors) {
    out << "aewin-tensors 1\n" << "count " << tensors.size() << '\n';
    std::uint64_t offset = 0;
    for (const NamedTensor &t : tensors) {
        if (t.name.empty() || t.name.find_first_of(" \t\n") != std::string::npos)
            throw IoError("tensor name must be non-empty without whitespace: '" + t.name + "'");
        out << t.name << ' ' << t.value.rank();
        for (std::size_t d : t.value.shape())
            out << ' ' << d;
        out << ' ' << offset << '\n';
        offset += t.value.size() * sizeof(double);
    }
    out << "end\n";
    for (const NamedTensor &t : tensors)
        for (double v : t.value.data()) {
            const std::uint64_t bits = detail::to_little_endian(std::bit_cast<std::uint64_t>(v));
            char buf[8];
            std::memcpy(buf, &bits, 8);
            out.write(buf, 8);
        }
    if (!out)
        throw IoError("failed writing tensor container");
}

inline std::vector<NamedTensor> read_tensors(std::istream &in) {
    std::string line;
    if (!std::getline(in, line) || line != "aewin-tensors 1")
        throw IoError("not an aewin tensor container (bad header)");
    std::size_t count = 0;
    {
        std::getline(in, line);
        std::istringstream ls(line);
        std::string key;
        if (!(ls >> key >> count) || key != "count")
            throw IoError("tensor container: malformed count line");
    }
    struct Entry {
        std::string name;
        Shape shape;
        std::uint64_t offset;
    };
    std::vector<Entry> entries;
    for (std::size_t i = 0; i < count; ++i) {
        if (!std::getline(in, line))
            throw IoError("tensor container: truncated manifest");
        std::istringstream ls(line);
        Entry e;
        std::size_t rank = 0;
        if (!(ls >> e.name >> rank))
            throw IoError("tensor container: malformed manifest line '" + line + "'");
        e.shape.resize(rank);
        for (std::size_t &d : e.shape)
            if (!(ls >> d) || d == 0)
                throw IoError("tensor container: bad shape for '" + e.name + "'");
        if (!(ls >> e.offset))
            throw IoError("tensor container: missing offset for '" + e.name + "'");
        entries.push_back(std::move(e));
    }
    if (!std::getline(in, line) || line != "end")
        throw IoError("tensor container: missing manifest terminator");

    std::vector<char> payload((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::vector<NamedTensor> out;
    out.reserve(entries.size());
    for (const Entry &e : entries) {
        const std::size_t n = shape_numel(e.shape);
        if (e.offset + n * 8 > payload.size())
            throw IoError("tensor container: payload too short for '" + e.name + "'");
        std::vector<double> data(n);
        for (std::size_t i = 0; i < n; ++i) {
            std::uint64_t bits;
            std::memcpy(&bits, payload.data() + e.offset + i * 8, 8);
            data[i] = std::bit_cast<double>(detail::to_little_endian(bits));
        }
        out.push_back({e.name, Tensor(e.shape, std::move(data))});
    }
    return out;
}

inline void save_tensors(const std::string &path, const std::vector<NamedTensor> &tensors) {
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw IoError("cannot open '" + path + "' for writing");
    write_tensors(f, tensors);
}

inline std::vector<NamedTensor> load_tensors(const std::string &path) {
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw IoError("cannot open '" + path + "'");
    return read_tensors(f);
}

} // namespace aewin
