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

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace aewin {

// ─── Errors ──────────────────────────────────────────────────────────────────

class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
  public:
    using Error::Error;
};

class DivisibilityError : public Error {
  public:
    using Error::Error;
};

class ConfigError : public Error {
  public:
    using Error::Error;
};

class NonFiniteError : public Error {
  public:
    using Error::Error;
};

class IoError : public Error {
  public:
    using Error::Error;
};

using Shape = std::vector<std::size_t>;

inline std::string shape_string(const Shape &shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i)
        os << (i ? "," : "") << shape[i];
    os << ']';
    return os.str();
}

inline std::size_t shape_numel(const Shape &shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                           std::multiplies<>());
}

// ─── Tensor ──────────────────────────────────────────────────────────────────

// Dense row-major array of doubles. Value semantics: copies are deep.
class Tensor {
  public:
    Tensor() = default;

    explicit Tensor(Shape shape, double fill = 0.0)
        : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {
        validate_shape();
    }

    Tensor(Shape shape, std::vector<double> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        validate_shape();
        if (data_.size() != shape_numel(shape_))
            throw ShapeError("tensor data length " +
                             std::to_string(data_.size()) +
                             " does not match shape " + shape_string(shape_));
    }

    static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows) {
        const std::size_t m = rows.size();
        const std::size_t n = m ? rows.begin()->size() : 0;
        std::vector<double> data;
        data.reserve(m * n);
        for (const auto &r : rows) {
            if (r.size() != n)
                throw ShapeError("ragged matrix literal");
            data.insert(data.end(), r.begin(), r.end());
        }
        return Tensor({m, n}, std::move(data));
    }

    static Tensor vector(std::initializer_list<double> values) {
        return Tensor({values.size()}, std::vector<double>(values));
    }

    static Tensor scalar(double v) { return Tensor({1}, std::vector<double>{v}); }

    const Shape &shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t dim(std::size_t axis) const {
        if (axis >= shape_.size())
            throw ShapeError("axis " + std::to_string(axis) +
                             " out of range for shape " + shape_string(shape_));
        return shape_[axis];
    }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    std::span<double> data() { return data_; }
    std::span<const double> data() const { return data_; }
    std::vector<double> &storage() { return data_; }
    const std::vector<double> &storage() const { return data_; }

    double &operator[](std::size_t i) { return data_[i]; }
    const double &operator[](std::size_t i) const { return data_[i]; }

    double &at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
    const double &at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }

    double &at(std::size_t i, std::size_t j, std::size_t k) {
        return data_[(i * shape_[1] + j) * shape_[2] + k];
    }
    const double &at(std::size_t i, std::size_t j, std::size_t k) const {
        return data_[(i * shape_[1] + j) * shape_[2] + k];
    }

    double item() const {
        if (data_.size() != 1)
            throw ShapeError("item() on tensor of shape " + shape_string(shape_));
        return data_[0];
    }

    Tensor reshaped(Shape shape) const & {
        Tensor out = *this;
        out.reshape(std::move(shape));
        return out;
    }
    Tensor reshaped(Shape shape) && {
        reshape(std::move(shape));
        return std::move(*this);
    }

    void reshape(Shape shape) {
        if (shape_numel(shape) != data_.size())
            throw ShapeError("cannot reshape " + shape_string(shape_) + " to " +
                             shape_string(shape));
        shape_ = std::move(shape);
        validate_shape();
    }

    bool all_finite() const {
        return std::all_of(data_.begin(), data_.end(),
                           [](double v) { return std::isfinite(v); });
    }

    // Bitwise equality of shape and payload.
    friend bool operator==(const Tensor &a, const Tensor &b) {
        return a.shape_ == b.shape_ && a.data_ == b.data_;
    }

  private:
    void validate_shape() const {
        for (std::size_t d : shape_)
            if (d == 0)
                throw ShapeError("zero-length axis in shape " + shape_string(shape_));
    }

    Shape shape_;
    std::vector<double> data_;
};

inline void require_finite(const Tensor &t, const char *where) {
    if (!t.all_finite())
        throw NonFiniteError(std::string("non-finite value produced by ") + where);
}

inline void require_rank(const Tensor &t, std::size_t rank, const char *where) {
    if (t.rank() != rank)
        throw ShapeError(std::string(where) + ": expected rank " +
                         std::to_string(rank) + ", got " + shape_string(t.shape()));
}

inline double max_abs_diff(const Tensor &a, const Tensor &b) {
    if (a.shape() != b.shape())
        throw ShapeError("max_abs_diff: " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

} // namespace aewin
