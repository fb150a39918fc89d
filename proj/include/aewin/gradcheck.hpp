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

#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "aewin/tape.hpp"

namespace aewin {

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::size_t input = 0; // which input holds the worst coordinate
    std::size_t index = 0; // flat coordinate within that input
    double analytic = 0.0;
    double numeric = 0.0;
    std::size_t coordinates = 0;
};

using ScalarFnN = std::function<Var(Tape &, std::span<const Var>)>;
using ScalarFn = std::function<Var(Tape &, Var)>;

namespace detail {
inline double eval_scalar(const ScalarFnN &f, const std::vector<Tensor> &inputs) {
    Tape tape;
    std::vector<Var> vars;
    vars.reserve(inputs.size());
    for (const Tensor &t : inputs)
        vars.push_back(tape.constant(t));
    const Var out = f(tape, vars);
    if (out.value().size() != 1)
        throw ShapeError("grad_check: function output is not scalar, shape " +
                         shape_string(out.shape()));
    return out.value()[0];
}
} // namespace detail

// Tape gradient against central differences (f(x+h·e) − f(x−h·e)) / 2h for
// every coordinate of every input. Relative error uses the denominator
// max(|analytic|, |numeric|, 1e-8).
inline GradCheckResult grad_check(const ScalarFnN &f, const std::vector<Tensor> &inputs,
                                  double h = 1e-5) {
    std::vector<Tensor> analytic;
    {
        Tape tape;
        std::vector<Var> vars;
        for (const Tensor &t : inputs)
            vars.push_back(tape.leaf(t));
        const Var out = f(tape, vars);
        if (out.value().size() != 1)
            throw ShapeError("grad_check: function output is not scalar, shape " +
                             shape_string(out.shape()));
        tape.backward(out);
        for (const Var &v : vars)
            analytic.push_back(tape.grad(v));
    }

    GradCheckResult result;
    std::vector<Tensor> probe = inputs;
    for (std::size_t in = 0; in < inputs.size(); ++in) {
        for (std::size_t i = 0; i < inputs[in].size(); ++i) {
            const double x0 = inputs[in][i];
            probe[in][i] = x0 + h;
            const double fp = detail::eval_scalar(f, probe);
            probe[in][i] = x0 - h;
            const double fm = detail::eval_scalar(f, probe);
            probe[in][i] = x0;
            const double numeric = (fp - fm) / (2.0 * h);
            const double a = analytic[in][i];
            const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
            const double rel = std::abs(a - numeric) / denom;
            ++result.coordinates;
            if (rel > result.max_rel_error || result.coordinates == 1) {
                result.max_rel_error = std::max(result.max_rel_error, rel);
                result.input = in;
                result.index = i;
                result.analytic = a;
                result.numeric = numeric;
            }
        }
    }
    return result;
}

inline double grad_check(const ScalarFn &f, const Tensor &x, double h = 1e-5) {
    return grad_check([&f](Tape &t, std::span<const Var> v) { return f(t, v[0]); },
                      std::vector<Tensor>{x}, h)
        .max_rel_error;
}

} // namespace aewin
