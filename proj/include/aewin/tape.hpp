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

// Reverse-mode tape. Each recorded node owns its forward value and, when any
// input needs a gradient, a closure that pushes the output cotangent back to
// its inputs. Coverage is limited to the operations the model uses.

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "aewin/ops.hpp"
#include "aewin/tensor.hpp"

namespace aewin {

class Tape;

// Handle to a value recorded on a Tape.
struct Var {
    Tape *tape = nullptr;
    std::size_t id = 0;

    const Tensor &value() const;
    const Shape &shape() const { return value().shape(); }
};

class Tape {
  public:
    using Backward = std::function<void(Tape &, const Tensor &grad_out)>;

    Tape() = default;
    Tape(const Tape &) = delete;
    Tape &operator=(const Tape &) = delete;

    Var leaf(Tensor value) { return push(std::move(value), true, {}); }
    Var constant(Tensor value) { return push(std::move(value), false, {}); }

    // Records an operation output. `inputs` decide whether the node needs a
    // gradient; `backward` is dropped when none of them do.
    Var record(Tensor value, std::span<const Var> inputs, Backward backward, const char *op) {
        require_finite(value, op);
        bool needs = false;
        for (const Var &v : inputs)
            needs = needs || nodes_.at(v.id).needs_grad;
        return push(std::move(value), needs, needs ? std::move(backward) : Backward{});
    }

    Var record(Tensor value, std::initializer_list<Var> inputs, Backward backward,
               const char *op) {
        return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
                      std::move(backward), op);
    }

    const Tensor &value(Var v) const { return nodes_.at(v.id).value; }
    bool needs_grad(Var v) const { return nodes_.at(v.id).needs_grad; }

    // Gradient of the last backward() target w.r.t. v; zeros when v was
    // unreachable.
    Tensor grad(Var v) const {
        const Node &n = nodes_.at(v.id);
        return n.grad.empty() ? Tensor(n.value.shape()) : n.grad;
    }

    void accumulate(Var v, const Tensor &g) {
        Node &n = nodes_.at(v.id);
        if (!n.needs_grad)
            return;
        if (g.shape() != n.value.shape())
            throw ShapeError("gradient shape " + shape_string(g.shape()) +
                             " does not match value " + shape_string(n.value.shape()));
        if (n.grad.empty())
            n.grad = g;
        else
            ops::add_inplace(n.grad, g);
    }

    void backward(Var loss) {
        const Node &root = nodes_.at(loss.id);
        if (root.value.size() != 1)
            throw ShapeError("backward() needs a scalar, got " +
                             shape_string(root.value.shape()));
        for (Node &n : nodes_)
            n.grad = Tensor();
        nodes_[loss.id].grad = Tensor(root.value.shape(), 1.0);
        for (std::size_t i = loss.id + 1; i-- > 0;) {
            Node &n = nodes_[i];
            if (!n.backward || n.grad.empty())
                continue;
            // The closure may append to other nodes' grads but never to nodes_.
            Tensor g = n.grad;
            n.backward(*this, g);
        }
    }

    std::size_t size() const { return nodes_.size(); }

  private:
    struct Node {
        Tensor value;
        Tensor grad;
        Backward backward;
        bool needs_grad = false;
    };

    Var push(Tensor value, bool needs_grad, Backward backward) {
        nodes_.push_back(Node{std::move(value), Tensor(), std::move(backward), needs_grad});
        return Var{this, nodes_.size() - 1};
    }

    std::vector<Node> nodes_;
};

inline const Tensor &Var::value() const { return tape->value(*this); }

// ─── Differentiable operations ───────────────────────────────────────────────

namespace ad {

inline Var reshape(Var x, Shape shape) {
    Tape &t = *x.tape;
    Shape in_shape = x.shape();
    return t.record(x.value().reshaped(std::move(shape)), {x},
                    [x, in_shape](Tape &tp, const Tensor &g) {
                        tp.accumulate(x, g.reshaped(in_shape));
                    },
                    "reshape");
}

inline Var add(Var a, Var b) {
    return a.tape->record(ops::add(a.value(), b.value()), {a, b},
                          [a, b](Tape &tp, const Tensor &g) {
                              tp.accumulate(a, g);
                              tp.accumulate(b, g);
                          },
                          "add");
}

inline Var scale(Var a, double s) {
    return a.tape->record(ops::scale(a.value(), s), {a},
                          [a, s](Tape &tp, const Tensor &g) {
                              tp.accumulate(a, ops::scale(g, s));
                          },
                          "scale");
}

inline Var matmul(Var a, Var b) {
    return a.tape->record(ops::matmul(a.value(), b.value()), {a, b},
                          [a, b](Tape &tp, const Tensor &g) {
                              if (tp.needs_grad(a))
                                  tp.accumulate(a, ops::matmul_nt(g, b.value()));
                              if (tp.needs_grad(b))
                                  tp.accumulate(b, ops::matmul_tn(a.value(), g));
                          },
                          "matmul");
}

// x[..., Cin] · w[Cin, Cout] (+ bias[Cout]); leading axes are flattened to rows.
inline Var linear(Var x, Var w, const Var *bias) {
    const Shape &xs = x.shape();
    const std::size_t cin = xs.back();
    const std::size_t rows = x.value().size() / cin;
    Tensor x2 = x.value().reshaped({rows, cin});
    Tensor y = ops::matmul(x2, w.value());
    if (bias)
        y = ops::add_row_bias(y, bias->value());
    Shape out_shape = xs;
    out_shape.back() = w.value().dim(1);
    y.reshape(out_shape);
    Tape &t = *x.tape;
    const Var b = bias ? *bias : Var{};
    const bool has_bias = bias != nullptr;
    auto backward = [x, w, b, has_bias, rows, cin](Tape &tp, const Tensor &g) {
        const std::size_t cout = w.value().dim(1);
        Tensor g2 = g.reshaped({rows, cout});
        if (tp.needs_grad(x))
            tp.accumulate(x, ops::matmul_nt(g2, w.value()).reshaped(x.shape()));
        if (tp.needs_grad(w))
            tp.accumulate(w, ops::matmul_tn(x.value().reshaped({rows, cin}), g2));
        if (has_bias && tp.needs_grad(b))
            tp.accumulate(b, ops::sum_rows(g2));
    };
    if (has_bias)
        return t.record(std::move(y), {x, w, b}, backward, "linear");
    return t.record(std::move(y), {x, w}, backward, "linear");
}

inline Var linear(Var x, Var w, Var bias) { return linear(x, w, &bias); }
inline Var linear(Var x, Var w) { return linear(x, w, nullptr); }

inline Var softmax_rows(Var x) {
    auto y = std::make_shared<const Tensor>(ops::softmax_rows(x.value()));
    return x.tape->record(*y, {x},
                          [x, y](Tape &tp, const Tensor &g) {
                              tp.accumulate(x, ops::softmax_rows_vjp(*y, g));
                          },
                          "softmax_rows");
}

inline Var layer_norm(Var x, Var gamma, Var beta, double eps = ops::kLayerNormEps) {
    auto fwd = std::make_shared<ops::LayerNormResult>(
        ops::layer_norm_full(x.value(), gamma.value(), beta.value(), eps));
    Tensor out = fwd->out;
    return x.tape->record(std::move(out), {x, gamma, beta},
                          [x, gamma, beta, fwd](Tape &tp, const Tensor &g) {
                              auto grads = ops::layer_norm_vjp(*fwd, gamma.value(), g);
                              tp.accumulate(x, grads.dx);
                              tp.accumulate(gamma, grads.dgamma);
                              tp.accumulate(beta, grads.dbeta);
                          },
                          "layer_norm");
}

inline Var gelu(Var x) {
    return x.tape->record(ops::gelu(x.value()), {x},
                          [x](Tape &tp, const Tensor &g) {
                              tp.accumulate(x, ops::gelu_vjp(x.value(), g));
                          },
                          "gelu");
}

inline Var depthwise_conv3x3(Var x, Var kernels) {
    return x.tape->record(ops::depthwise_conv3x3(x.value(), kernels.value()), {x, kernels},
                          [x, kernels](Tape &tp, const Tensor &g) {
                              auto grads =
                                  ops::depthwise_conv3x3_vjp(x.value(), kernels.value(), g);
                              tp.accumulate(x, grads.dx);
                              tp.accumulate(kernels, grads.dkernels);
                          },
                          "depthwise_conv3x3");
}

inline Var gather_tokens(Var x, ops::TokenIndex src, Shape out_shape) {
    Tensor y = ops::gather_tokens(x.value(), src, std::move(out_shape));
    return x.tape->record(std::move(y), {x},
                          [x, src = std::move(src)](Tape &tp, const Tensor &g) {
                              tp.accumulate(x, ops::scatter_tokens(g, src, x.shape()));
                          },
                          "gather_tokens");
}

inline Var cyclic_roll(Var x, long dy, long dx) {
    require_rank(x.value(), 3, "cyclic_roll");
    const Shape s = x.shape();
    return gather_tokens(x, ops::roll_index(s[0], s[1], dy, dx), s);
}

inline Var window_partition(Var x, std::size_t m) {
    require_rank(x.value(), 3, "window_partition");
    const Shape s = x.shape();
    return gather_tokens(x, ops::window_partition_index(s[0], s[1], m),
                         {(s[0] / m) * (s[1] / m), m * m, s[2]});
}

inline Var window_reverse(Var windows, std::size_t h, std::size_t w) {
    const Shape s = windows.shape();
    const auto m = static_cast<std::size_t>(std::lround(std::sqrt(double(s.at(1)))));
    return gather_tokens(windows, ops::inverse_index(ops::window_partition_index(h, w, m)),
                         {h, w, s[2]});
}

inline Var slice_cols(Var x, std::size_t begin, std::size_t count) {
    const std::size_t c = x.shape().back();
    Tensor y = ops::slice_cols(x.value(), begin, count);
    Shape out_shape = x.shape();
    out_shape.back() = count;
    y.reshape(out_shape);
    return x.tape->record(std::move(y), {x},
                          [x, begin, count, c](Tape &tp, const Tensor &g) {
                              Tensor dx(x.shape());
                              const std::size_t rows = dx.size() / c;
                              for (std::size_t r = 0; r < rows; ++r)
                                  for (std::size_t j = 0; j < count; ++j)
                                      dx[r * c + begin + j] = g[r * count + j];
                              tp.accumulate(x, dx);
                          },
                          "slice_cols");
}

// Concatenates along the trailing axis; leading axes must agree.
inline Var concat_cols(const std::vector<Var> &parts) {
    if (parts.empty())
        throw ShapeError("concat_cols: no inputs");
    Shape lead = parts[0].shape();
    lead.pop_back();
    std::size_t total = 0;
    for (const Var &p : parts) {
        Shape l = p.shape();
        l.pop_back();
        if (l != lead)
            throw ShapeError("concat_cols: leading shape mismatch");
        total += p.shape().back();
    }
    Shape out_shape = lead;
    out_shape.push_back(total);
    Tensor y(out_shape);
    const std::size_t rows = y.size() / total;
    std::size_t offset = 0;
    for (const Var &p : parts) {
        const std::size_t c = p.shape().back();
        for (std::size_t r = 0; r < rows; ++r)
            std::copy_n(p.value().data().data() + r * c, c, y.data().data() + r * total + offset);
        offset += c;
    }
    return parts[0].tape->record(
        std::move(y), std::span<const Var>(parts),
        [parts, rows, total](Tape &tp, const Tensor &g) {
            std::size_t off = 0;
            for (const Var &p : parts) {
                const std::size_t c = p.shape().back();
                if (tp.needs_grad(p)) {
                    Tensor gp(p.shape());
                    for (std::size_t r = 0; r < rows; ++r)
                        std::copy_n(g.data().data() + r * total + off, c,
                                    gp.data().data() + r * c);
                    tp.accumulate(p, gp);
                }
                off += c;
            }
        },
        "concat_cols");
}

// ─── Reductions and losses ───────────────────────────────────────────────────

inline Var sum(Var x) {
    double s = 0.0;
    for (double v : x.value().data())
        s += v;
    return x.tape->record(Tensor::scalar(s), {x},
                          [x](Tape &tp, const Tensor &g) {
                              tp.accumulate(x, Tensor(x.shape(), g.item()));
                          },
                          "sum");
}

inline Var sum_squares(Var x) {
    double s = 0.0;
    for (double v : x.value().data())
        s += v * v;
    return x.tape->record(Tensor::scalar(s), {x},
                          [x](Tape &tp, const Tensor &g) {
                              tp.accumulate(x, ops::scale(x.value(), 2.0 * g.item()));
                          },
                          "sum_squares");
}

// sum(x ⊙ weights) for a fixed weight tensor; the usual probe loss for
// gradient checks.
inline Var weighted_sum(Var x, Tensor weights) {
    if (weights.shape() != x.shape())
        throw ShapeError("weighted_sum: weights " + shape_string(weights.shape()) +
                         " vs " + shape_string(x.shape()));
    double s = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i)
        s += x.value()[i] * weights[i];
    return x.tape->record(Tensor::scalar(s), {x},
                          [x, w = std::move(weights)](Tape &tp, const Tensor &g) {
                              tp.accumulate(x, ops::scale(w, g.item()));
                          },
                          "weighted_sum");
}

// Mean over every axis but the trailing one: [..., C] → [C].
inline Var mean_tokens(Var x) {
    const std::size_t c = x.shape().back();
    const std::size_t n = x.value().size() / c;
    Tensor y = ops::scale(ops::sum_rows(x.value()), 1.0 / static_cast<double>(n));
    return x.tape->record(std::move(y), {x},
                          [x, c, n](Tape &tp, const Tensor &g) {
                              Tensor dx(x.shape());
                              const double inv = 1.0 / static_cast<double>(n);
                              for (std::size_t i = 0; i < dx.size(); ++i)
                                  dx[i] = g[i % c] * inv;
                              tp.accumulate(x, dx);
                          },
                          "mean_tokens");
}

// −log softmax(logits)[label]
inline Var cross_entropy(Var logits, std::size_t label) {
    const Tensor &z = logits.value();
    if (label >= z.size())
        throw ShapeError("cross_entropy: label " + std::to_string(label) + " out of range");
    Tensor p = z.reshaped({1, z.size()});
    ops::softmax_row_inplace(p.data());
    double mx = z[0];
    for (double v : z.data())
        mx = std::max(mx, v);
    double se = 0.0;
    for (double v : z.data())
        se += std::exp(v - mx);
    const double loss = mx + std::log(se) - z[label];
    return logits.tape->record(Tensor::scalar(loss), {logits},
                               [logits, label, p = std::move(p)](Tape &tp, const Tensor &g) {
                                   Tensor d = p.reshaped(logits.shape());
                                   d[label] -= 1.0;
                                   tp.accumulate(logits, ops::scale(d, g.item()));
                               },
                               "cross_entropy");
}

} // namespace ad
} // namespace aewin
