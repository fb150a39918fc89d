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

// The `aewin` command line. Kept in a header so the test suite can drive it
// in-process with string streams.
//
// Exit codes: 0 success, 1 a check failed, 2 usage or configuration error.

#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "aewin/analysis.hpp"
#include "aewin/backbone.hpp"
#include "aewin/gradcheck_suite.hpp"
#include "aewin/toy.hpp"
#include "aewin/verify.hpp"

namespace aewin::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailed = 1;
inline constexpr int kExitUsage = 2;

// "4x4,8x6" → {{4,4},{8,6}}
inline std::vector<GridSize> parse_sizes(const std::string &text) {
    std::vector<GridSize> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto x = item.find('x');
        std::size_t h = 0, w = 0;
        try {
            if (x == std::string::npos)
                throw std::invalid_argument(item);
            std::size_t used_h = 0, used_w = 0;
            h = std::stoul(item.substr(0, x), &used_h);
            w = std::stoul(item.substr(x + 1), &used_w);
            if (used_h != x || used_w != item.size() - x - 1 || h == 0 || w == 0)
                throw std::invalid_argument(item);
        } catch (const std::logic_error &) {
            throw ConfigError("bad size '" + item + "', expected HxW such as 4x8");
        }
        out.push_back({h, w});
    }
    if (out.empty())
        throw ConfigError("empty size list");
    return out;
}

struct Options {
    std::uint64_t seed = 0;
    std::string spec;
    std::string out;
    bool csv = false;

    std::string sizes;
    std::string windows;
    std::size_t seeds = 10;
    bool flip_shift_sign = false;

    std::string spec_arg;
    std::size_t image_size = 224;
    bool compare_global = false;

    TrainConfig train;
    std::string weights;
    std::string image;
    std::size_t example_index = 0;
};

// Writes to --out when given, otherwise to `out`.
class Sink {
  public:
    Sink(const std::string &path, std::ostream &fallback) : stream_(&fallback) {
        if (!path.empty()) {
            file_.open(path);
            if (!file_)
                throw IoError("cannot open '" + path + "' for writing");
            stream_ = &file_;
        }
    }
    std::ostream &get() { return *stream_; }

  private:
    std::ofstream file_;
    std::ostream *stream_;
};

inline ModelSpec resolve_spec(const Options &o, const std::string &fallback) {
    if (!o.spec_arg.empty())
        return load_model_spec(o.spec_arg);
    return load_model_spec(o.spec.empty() ? fallback : o.spec);
}

inline int cmd_verify(const Options &o, std::ostream &out) {
    VerifyOptions v;
    v.seed = o.seed;
    v.seeds = o.seeds;
    v.flip_shift_sign = o.flip_shift_sign;
    if (!o.sizes.empty())
        v.sizes = parse_sizes(o.sizes);
    if (!o.windows.empty()) {
        v.windows.clear();
        std::stringstream ss(o.windows);
        std::string item;
        while (std::getline(ss, item, ','))
            v.windows.push_back(std::stoul(item));
    }
    const std::vector<CheckResult> rows = run_verify(v);
    Sink sink(o.out, out);
    std::ostream &s = sink.get();
    bool ok = !rows.empty();
    if (o.csv) {
        s << "check,max_abs_diff,tolerance,status\n";
    } else {
        s << "grid";
        for (const GridSize &g : v.sizes)
            s << ' ' << g.h << 'x' << g.w;
        s << " | windows";
        for (std::size_t m : v.windows)
            s << ' ' << m;
        s << " | C=" << v.channels << " K=" << v.heads << " seeds " << v.seed << ".."
          << v.seed + v.seeds - 1 << '\n';
    }
    for (const CheckResult &r : rows) {
        ok = ok && r.passed;
        if (o.csv)
            s << r.name << ',' << r.max_abs_diff << ',' << r.tolerance << ','
              << (r.passed ? "PASS" : "FAIL") << '\n';
        else
            s << (r.passed ? "PASS " : "FAIL ") << std::left << std::setw(44) << r.name
              << std::right << " max_abs_diff " << std::scientific << std::setprecision(3)
              << r.max_abs_diff << " tol " << r.tolerance << std::defaultfloat << '\n';
    }
    if (rows.empty())
        s << "FAIL no check ran: no window divides any requested size\n";
    s << (ok ? "verify: all checks passed\n" : "verify: FAILED\n");
    if (!ok && !o.out.empty())
        out << "verify: FAILED (report in " << o.out << ")\n";
    return ok ? kExitOk : kExitCheckFailed;
}

inline int cmd_gradcheck(const Options &o, std::ostream &out) {
    const std::vector<GradCheckEntry> rows = run_gradcheck_suite(o.seed);
    Sink sink(o.out, out);
    std::ostream &s = sink.get();
    bool ok = true;
    if (o.csv)
        s << "check,max_rel_error,tolerance,status\n";
    for (const GradCheckEntry &r : rows) {
        ok = ok && r.passed;
        if (o.csv)
            s << r.name << ',' << r.max_rel_error << ',' << r.tolerance << ','
              << (r.passed ? "PASS" : "FAIL") << '\n';
        else
            s << (r.passed ? "PASS " : "FAIL ") << std::left << std::setw(28) << r.name << std::right
              << " max_rel_error " << std::scientific << std::setprecision(3) << r.max_rel_error
              << " tol " << r.tolerance << std::defaultfloat << '\n';
    }
    s << (ok ? "gradcheck: all checks passed\n" : "gradcheck: FAILED\n");
    return ok ? kExitOk : kExitCheckFailed;
}

inline int cmd_flops(const Options &o, std::ostream &out) {
    const ModelSpec spec = resolve_spec(o, "aewin-t");
    const FlopsReport r = flops_model(spec, o.image_size);
    Sink sink(o.out, out);
    std::ostream &s = sink.get();
    if (o.csv)
        write_flops_csv(s, r);
    else
        write_flops_table(s, r);
    if (o.compare_global) {
        // Final-stage resolution and width.
        const std::uint64_t side = o.image_size / spec.patch_size / 8;
        const std::uint64_t c = spec.stages[3].dim;
        const std::uint64_t m = stage_window(spec.stages[3].window, side, side);
        s << "compare at final stage " << side << "x" << side << "x" << c << ": global "
          << flops_global(side, side, c) << " aewin " << flops_aewin(side, side, c, m) << '\n';
    }
    return kExitOk;
}

inline int cmd_params(const Options &o, std::ostream &out) {
    const ParamReport r = param_count(resolve_spec(o, "aewin-t"));
    Sink sink(o.out, out);
    if (o.csv)
        write_param_csv(sink.get(), r);
    else
        write_param_table(sink.get(), r);
    return kExitOk;
}

inline int cmd_train_toy(const Options &o, std::ostream &out) {
    const ModelSpec spec = resolve_spec(o, "aewin-toy");
    TrainConfig cfg = o.train;
    cfg.seed = o.seed;
    if (o.csv)
        out << "step,batch_loss,train_loss,train_accuracy\n";
    auto log = [&](const TrainLogEntry &e) {
        if (o.csv) {
            out << e.step << ',' << e.batch_loss << ',';
            if (e.train_loss)
                out << *e.train_loss << ',' << *e.train_accuracy;
            else
                out << ',';
            out << '\n';
        } else {
            write_log_entry(out, e);
        }
        out.flush();
    };
    const TrainResult r = train_toy(spec, cfg, log);
    if (!o.out.empty())
        save_weights(o.out, r.params);
    if (r.diverged) {
        out << "train-toy: diverged (non-finite loss at step " << r.log.back().step << ")\n";
        return kExitCheckFailed;
    }
    if (!o.csv)
        out << "final train_loss " << r.final_loss << " train_acc " << r.final_accuracy
            << (o.out.empty() ? "" : " weights " + o.out) << '\n';
    return kExitOk;
}

inline Tensor load_image(const std::string &path) {
    for (NamedTensor &t : load_tensors(path))
        if (t.name == "image") {
            if (t.value.rank() != 3 || t.value.dim(2) != 3)
                throw ShapeError("image '" + path + "' must be [H, W, 3], got " +
                                 shape_string(t.value.shape()));
            return std::move(t.value);
        }
    throw IoError("'" + path + "' holds no tensor named 'image'");
}

inline int cmd_infer(const Options &o, std::ostream &out) {
    const ModelSpec spec = resolve_spec(o, "aewin-toy");
    const ModelParams params = load_weights(o.weights, spec);
    const Tensor logits = model_forward(load_image(o.image), params, spec);
    out << "class " << argmax(logits) << "\nlogits";
    out << std::setprecision(17);
    for (double v : logits.data())
        out << ' ' << v;
    out << '\n';
    return kExitOk;
}

inline int cmd_toy_example(const Options &o, std::ostream &out) {
    if (o.out.empty())
        throw ConfigError("toy-example needs --out PATH");
    const Example ex = toy_example(o.seed, o.example_index, o.train.data);
    save_tensors(o.out, {{"image", ex.image}});
    out << "label " << ex.label << '\n';
    return kExitOk;
}

inline int run(int argc, const char *const *argv, std::ostream &out = std::cout,
               std::ostream &err = std::cerr) {
    CLI::App app{"AEWin reference implementation: verification, cost analysis, toy training", "aewin"};
    app.require_subcommand(1);
    app.fallthrough();
    Options o;
    app.add_option("--seed", o.seed, "seed for every stochastic choice");
    app.add_option("--spec", o.spec, "preset name (aewin-t, aewin-b, aewin-toy) or spec file");
    app.add_option("--out", o.out, "output path (report, weights or image)");
    app.add_flag("--csv", o.csv, "comma-separated output");

    auto *verify = app.add_subcommand("verify", "oracle equivalence, round trips, reachability");
    verify->add_option("--sizes", o.sizes, "grid sizes, e.g. 4x4,8x8");
    verify->add_option("--windows", o.windows, "window sizes, e.g. 2,4");
    verify->add_option("--seeds", o.seeds, "random draws per configuration")->check(CLI::PositiveNumber);
    verify->add_flag("--fault-flip-shift", o.flip_shift_sign)->group("");

    auto *gradcheck = app.add_subcommand("gradcheck", "central-difference gradient checks");

    auto *flops = app.add_subcommand("flops", "itemized multiply-accumulate report");
    flops->add_option("spec", o.spec_arg, "preset or spec file");
    flops->add_option("size", o.image_size, "square image side")->check(CLI::PositiveNumber);
    flops->add_flag("--compare-global", o.compare_global, "also print global attention cost at final stage");

    auto *params = app.add_subcommand("params", "parameter count with per-stage breakdown");
    params->add_option("spec", o.spec_arg, "preset or spec file");

    auto *train = app.add_subcommand("train-toy", "SGD on the synthetic orientation task");
    train->add_option("--steps", o.train.steps, "SGD steps");
    train->add_option("--lr", o.train.lr, "learning rate");
    train->add_option("--batch", o.train.batch, "examples per step")->check(CLI::PositiveNumber);
    train->add_option("--train-size", o.train.train_size, "training examples")->check(CLI::PositiveNumber);
    train->add_option("--eval-every", o.train.eval_every, "steps between full evaluations")
        ->check(CLI::PositiveNumber);
    train->add_flag("--random-phase", o.train.data.random_phase, "random per-image pattern offset");

    auto *infer = app.add_subcommand("infer", "classify an image container");
    infer->add_option("--weights", o.weights, "weights container")->required();
    infer->add_option("--image", o.image, "container with an [H, W, 3] tensor named image")->required();

    auto *example = app.add_subcommand("toy-example", "write one synthetic example to --out");
    example->add_option("--index", o.example_index, "example index");
    example->add_flag("--random-phase", o.train.data.random_phase, "random per-image pattern offset");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp &e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError &e) {
        app.exit(e, out, err);
        return kExitUsage;
    }

    try {
        if (verify->parsed())
            return cmd_verify(o, out);
        if (gradcheck->parsed())
            return cmd_gradcheck(o, out);
        if (flops->parsed())
            return cmd_flops(o, out);
        if (params->parsed())
            return cmd_params(o, out);
        if (train->parsed())
            return cmd_train_toy(o, out);
        if (infer->parsed())
            return cmd_infer(o, out);
        if (example->parsed())
            return cmd_toy_example(o, out);
    } catch (const Error &e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::logic_error &e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    }
    return kExitUsage;
}

} // namespace aewin::cli
