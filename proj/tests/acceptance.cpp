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

// Acceptance suite. Prints one PASS/FAIL line per criterion followed by the
// measured values behind it.
//
//   acceptance            run every criterion
//   acceptance 4          run one criterion
//   acceptance 4 flops-b  run one sub-check of a criterion
//
// Exit status is 0 only when everything selected passed.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "aewin/analysis.hpp"
#include "aewin/cli.hpp"
#include "aewin/gradcheck_suite.hpp"
#include "aewin/toy.hpp"
#include "aewin/verify.hpp"

using namespace aewin;

namespace {

// Pinned tolerances.
constexpr double kOracleTol = 1e-10;
constexpr double kOracleSeconds = 60.0;
constexpr double kBlockGradTol = 1e-4;
constexpr double kOpGradTol = 1e-6;
constexpr double kGradSeconds = 300.0;
constexpr double kMeasuredRatioTol = 0.10;
constexpr double kParamTol = 0.10;
constexpr double kFlopsTol = 0.15;
constexpr double kParamsT = 22e6, kParamsB = 77e6;
constexpr double kFlopsT = 4.0e9, kFlopsB = 14.6e9;
constexpr std::size_t kCornerReach = 11;
constexpr double kToyAccuracy = 0.90;
constexpr std::size_t kToySteps = 300;
constexpr std::size_t kToyLossAfter = 50;
constexpr double kToySeconds = 600.0;

struct SubCheck {
    std::string name;
    bool passed = false;
    std::string detail;
};

using Runner = std::function<void(std::vector<SubCheck> &, const std::string &only)>;

struct Criterion {
    int id;
    std::string title;
    Runner run;
};

std::string fmt(const char *f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

bool wanted(const std::string &only, const std::string &name) { return only.empty() || only == name; }

// ─── 1 ───────────────────────────────────────────────────────────────────────

void oracle_equivalence(std::vector<SubCheck> &out, const std::string &) {
    VerifyOptions opt;
    opt.sizes = {{4, 4}, {4, 8}, {8, 8}};
    opt.windows = {2, 4};
    opt.channels = 8;
    opt.heads = 4;
    opt.seeds = 10;
    opt.tolerance = kOracleTol;
    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<CheckResult> rows = run_verify(opt);
    const double secs = seconds_since(t0);
    for (const CheckResult &r : rows)
        out.push_back({r.name, r.passed, "max abs diff " + fmt("%.3e", r.max_abs_diff)});
    out.push_back({"runtime", secs < kOracleSeconds, fmt("%.2f s", secs)});
}

// ─── 2 ───────────────────────────────────────────────────────────────────────

void gradient_fidelity(std::vector<SubCheck> &out, const std::string &) {
    const auto t0 = std::chrono::steady_clock::now();
    for (const GradCheckEntry &e : run_gradcheck_suite(0, kOpGradTol, kBlockGradTol))
        out.push_back({e.name, e.passed,
                       "max rel error " + fmt("%.3e", e.max_rel_error) + " < " + fmt("%.0e", e.tolerance)});
    const double secs = seconds_since(t0);
    out.push_back({"runtime", secs < kGradSeconds, fmt("%.2f s", secs)});
}

// ─── 3 ───────────────────────────────────────────────────────────────────────

void complexity_formulas(std::vector<SubCheck> &out, const std::string &) {
    out.push_back({"global 8x8 C16", flops_global(8, 8, 16) == 196'608,
                   std::to_string(flops_global(8, 8, 16)) + " == 196608"});
    out.push_back({"aewin 8x8 C16 M2", flops_aewin(8, 8, 16, 2) == 77'824,
                   std::to_string(flops_aewin(8, 8, 16, 2)) + " == 77824"});
    out.push_back({"aewin 56x56 C64 M7", flops_aewin(56, 56, 64, 7) == 72'454'144,
                   std::to_string(flops_aewin(56, 56, 64, 7)) + " == 72454144"});

    struct Case {
        std::size_t h, w, c, k, m;
    };
    for (const Case &cs : {Case{8, 8, 16, 4, 2}, Case{16, 8, 16, 4, 2}, Case{8, 8, 32, 8, 4},
                           Case{14, 14, 16, 4, 7}}) {
        for (WindowMode mode : {WindowMode::regular, WindowMode::shifted}) {
            const MeasuredFlops m = measured_flops(AewinConfig::make(cs.c, cs.k, cs.m), cs.h, cs.w, mode);
            const double ratio = m.ratio();
            std::ostringstream name;
            name << "measured " << cs.h << "x" << cs.w << " C" << cs.c << " M" << cs.m << " "
                 << to_string(mode);
            out.push_back({name.str(), std::abs(ratio - 1.0) <= kMeasuredRatioTol,
                           "ratio " + fmt("%.6f", ratio) + " (" + std::to_string(m.measured.total()) +
                               " / " + std::to_string(m.formula()) + ")"});
        }
    }

    std::size_t cases = 0, violations = 0;
    for (std::uint64_t h = 8; h <= 128; h += 2)
        for (std::uint64_t w = 8; w <= 128; w += 2)
            for (std::uint64_t m : {1u, 7u})
                for (std::uint64_t c : {8u, 64u, 512u}) {
                    ++cases;
                    violations += flops_aewin(h, w, c, m) < flops_global(h, w, c) ? 0 : 1;
                }
    out.push_back({"dominance sweep", violations == 0,
                   std::to_string(cases) + " shapes (H,W even in [8,128], M in {1,7}), " +
                       std::to_string(violations) + " violations"});
}

// ─── 4 ───────────────────────────────────────────────────────────────────────

std::string within(double value, double target, double tol, const char *unit) {
    const double dev = (value - target) / target;
    return fmt("%.3f", value / (unit[0] == 'G' ? 1e9 : 1e6)) + unit + " vs " +
           fmt("%.1f", target / (unit[0] == 'G' ? 1e9 : 1e6)) + unit + ", deviation " +
           fmt("%+.1f%%", 100.0 * dev) + " (tolerance " + fmt("%.0f%%", 100.0 * tol) + ")";
}

void published_size(std::vector<SubCheck> &out, const std::string &only) {
    if (wanted(only, "params-t")) {
        const double p = static_cast<double>(param_count(aewin_t_spec()).total);
        out.push_back({"params-t", std::abs(p - kParamsT) <= kParamTol * kParamsT, within(p, kParamsT, kParamTol, "M")});
    }
    if (wanted(only, "params-b")) {
        const double p = static_cast<double>(param_count(aewin_b_spec()).total);
        out.push_back({"params-b", std::abs(p - kParamsB) <= kParamTol * kParamsB, within(p, kParamsB, kParamTol, "M")});
    }
    if (wanted(only, "flops-t")) {
        const FlopsReport r = flops_model(aewin_t_spec(), 224);
        const double f = static_cast<double>(r.total());
        out.push_back({"flops-t", std::abs(f - kFlopsT) <= kFlopsTol * kFlopsT, within(f, kFlopsT, kFlopsTol, "G")});
    }
    if (wanted(only, "flops-b")) {
        const FlopsReport r = flops_model(aewin_b_spec(), 224);
        const double f = static_cast<double>(r.total());
        out.push_back({"flops-b", std::abs(f - kFlopsB) <= kFlopsTol * kFlopsB, within(f, kFlopsB, kFlopsTol, "G")});
    }
    if (only.empty()) {
        // Itemization behind the B residual: the shortfall is almost entirely
        // stage-3 depth. The same widths with 32 stage-3 blocks land inside both
        // tolerances.
        const ModelSpec b32 = make_spec("aewin-b-depth32", 96, {2, 4, 32, 2}, {4, 8, 16, 32}, 7, 1000);
        const double p = static_cast<double>(param_count(b32).total);
        const double f = static_cast<double>(flops_model(b32, 224).total());
        std::cout << "    note: aewin-b stage-3 blocks: "
                  << fmt("%.2fM", param_count(aewin_b_spec()).stage_total(3) / 1e6) << " params; "
                  << "with depths 2,4,32,2 the totals become " << fmt("%.2fM", p / 1e6) << " and "
                  << fmt("%.2fG", f / 1e9) << '\n';
        const FlopsReport t = flops_model(aewin_t_spec(), 224);
        std::cout << "    note: aewin-t MACs by mechanism: attention "
                  << fmt("%.3fG", (t.total_for("aewin") + t.total_for("psw-aewin")) / 1e9) << ", mlp "
                  << fmt("%.3fG", t.total_for("mlp") / 1e9) << ", cpe " << fmt("%.3fG", t.total_for("cpe") / 1e9)
                  << ", merges " << fmt("%.3fG", t.total_for("merge") / 1e9) << ", patch embed "
                  << fmt("%.3fG", t.total_for("patch_embed") / 1e9) << ", head "
                  << fmt("%.4fG", t.total_for("head") / 1e9) << '\n';
    }
}

// ─── 5 ───────────────────────────────────────────────────────────────────────

void connectivity(std::vector<SubCheck> &out, const std::string &only) {
    if (wanted(only, "corner")) {
        const AewinConfig cfg = AewinConfig::make(8, 4, 2);
        const std::size_t reg = attention_reachability(cfg, 4, 4, {WindowMode::regular}).row_count(0);
        const std::size_t sh = attention_reachability(cfg, 4, 4, {WindowMode::shifted}).row_count(0);
        out.push_back({"corner", reg == kCornerReach,
                       "one REGULAR layer on 4x4, M=2 reaches " + std::to_string(reg) + "/16 from (0,0), expected " +
                           std::to_string(kCornerReach) + "/16 (one SHIFTED layer: " + std::to_string(sh) + "/16)"});
    }
    if (wanted(only, "two-layer")) {
        std::size_t grids = 0, incomplete = 0;
        for (std::size_t h = 1; h <= 8; ++h)
            for (std::size_t w = 1; w <= 8; ++w)
                for (std::size_t m = 1; m <= std::min(h, w); ++m) {
                    if (h % m || w % m)
                        continue;
                    const AewinConfig cfg = AewinConfig::make(8, 4, m);
                    for (WindowMode a : {WindowMode::regular, WindowMode::shifted})
                        for (WindowMode b : {WindowMode::regular, WindowMode::shifted}) {
                            ++grids;
                            incomplete += attention_reachability(cfg, h, w, {a, b}).all() ? 0 : 1;
                        }
                }
        out.push_back({"two-layer", incomplete == 0,
                       std::to_string(grids) + " (H, W, M, mode pair) cases with H, W <= 8; " +
                           std::to_string(incomplete) + " closures not all-true"});
    }
}

// ─── 6 ───────────────────────────────────────────────────────────────────────

void shape_chain(std::vector<SubCheck> &out, const std::string &) {
    const ModelSpec spec = aewin_t_spec();
    Rng rng = make_rng(6);
    ForwardTrace trace;
    const Tensor logits = model_forward(normal_tensor({224, 224, 3}, rng), init_weights(spec, 0), spec, &trace);
    const Shape expect[4] = {{56, 56, 64}, {28, 28, 128}, {14, 14, 256}, {7, 7, 512}};
    for (std::size_t s = 0; s < 4; ++s)
        out.push_back({"stage" + std::to_string(s + 1), trace.stages.size() > s && trace.stages[s] == expect[s],
                       "observed " + (trace.stages.size() > s ? shape_string(trace.stages[s]) : "none") +
                           ", expected " + shape_string(expect[s])});
    out.push_back({"logits", logits.size() == spec.num_classes, "length " + std::to_string(logits.size())});
    std::size_t blocks = 0;
    for (const BlockTrace &b : trace.blocks)
        blocks += b.mode == (b.block % 2 ? WindowMode::shifted : WindowMode::regular);
    out.push_back({"alternation", blocks == 22 && trace.blocks.size() == 22,
                   std::to_string(blocks) + "/22 blocks in the expected mode"});
}

// ─── 7 ───────────────────────────────────────────────────────────────────────

struct ToyRun {
    int code;
    std::string log;
};

ToyRun train_cli() {
    const char *argv[] = {"aewin", "--csv", "--seed", "0", "train-toy"};
    std::ostringstream out, err;
    const int code = cli::run(5, argv, out, err);
    return {code, out.str()};
}

void toy_training(std::vector<SubCheck> &out, const std::string &) {
    const auto t0 = std::chrono::steady_clock::now();
    const ToyRun first = train_cli();
    const double secs = seconds_since(t0);
    const ToyRun second = train_cli();

    std::istringstream lines(first.log);
    std::string line;
    std::getline(lines, line); // header
    bool finite = true, below = true;
    double best_acc = 0.0, last_acc = 0.0, last_loss = 0.0;
    std::size_t last_step = 0, reached_at = 0;
    while (std::getline(lines, line)) {
        std::vector<std::string> f;
        std::stringstream ls(line);
        for (std::string cell; std::getline(ls, cell, ',');)
            f.push_back(cell);
        f.resize(4);
        last_step = std::stoul(f[0]);
        finite = finite && std::isfinite(std::stod(f[1]));
        if (!f[2].empty()) {
            last_loss = std::stod(f[2]);
            last_acc = std::stod(f[3]);
            finite = finite && std::isfinite(last_loss);
            if (last_step >= kToyLossAfter && !(last_loss < std::log(3.0)))
                below = false;
            if (last_acc >= kToyAccuracy && reached_at == 0)
                reached_at = last_step;
            best_acc = std::max(best_acc, last_acc);
        }
    }
    out.push_back({"exit", first.code == 0, "train-toy --seed 0 exit code " + std::to_string(first.code)});
    out.push_back({"accuracy", last_step == kToySteps && last_acc >= kToyAccuracy,
                   "final training accuracy " + fmt("%.3f", last_acc) + " at step " + std::to_string(last_step) +
                       (reached_at ? ", first >= 0.90 at step " + std::to_string(reached_at) : "")});
    out.push_back({"loss", below, "full training-set loss below ln 3 at every evaluation from step 50; final " +
                                      fmt("%.4f", last_loss)});
    out.push_back({"finite", finite, finite ? "no NaN or inf" : "non-finite loss seen"});
    out.push_back({"repeatable", first.log == second.log && !first.log.empty(), "second run log is byte-identical"});
    out.push_back({"runtime", secs < kToySeconds, fmt("%.1f s", secs)});
}

// ─── 8 ───────────────────────────────────────────────────────────────────────

void degeneracy(std::vector<SubCheck> &out, const std::string &) {
    Rng rng = make_rng(8);
    const Tensor x = normal_tensor({4, 8, 8}, rng);
    const AttentionWeights w = random_attention_weights(8, rng);

    AewinConfig zero = AewinConfig::make(8, 4, 2);
    zero.shift = 0;
    out.push_back({"psw s=0", psw_window_attention(x, w, zero) == window_attention(x, w, zero) &&
                                  psw_aewin_forward(x, w, zero) == aewin_forward(x, w, zero),
                   "shift-0 PSW equals regular windows bitwise"});

    const AewinConfig unit = AewinConfig::make(8, 4, 1);
    const Tensor v = ops::add_row_bias(ops::matmul(x.reshaped({32, 8}), w.wv), w.bv);
    const Tensor vw = ops::slice_cols(v, 4, 4).reshaped({4, 8, 4});
    out.push_back({"M=1", window_attention(x, w, unit) == vw, "unit windows return the v-projection bitwise"});

    const Tensor sq = normal_tensor({4, 4, 8}, rng);
    const AewinConfig whole = AewinConfig::make(8, 4, 4);
    const Tensor y = window_attention(sq, w, whole);
    double diff = 0.0;
    for (std::size_t head = 2; head < 4; ++head) {
        const Tensor expect = oracle::masked_global_attention(sq.reshaped({16, 8}), head_weights(w, head, whole),
                                                              oracle::AttentionMask(16, true));
        diff = std::max(diff, max_abs_diff(ops::slice_cols(y, (head - 2) * 2, 2).reshaped({16, 2}), expect));
    }
    out.push_back({"single window", diff < 1e-12, "M=H=W window heads vs global attention, max abs diff " +
                                                        fmt("%.3e", diff)});

    bool round = true;
    for (std::size_t m : {1u, 2u, 4u})
        round = round && ops::window_reverse(ops::window_partition(x, m), 4, 8) == x;
    out.push_back({"round trip", round, "window_reverse(window_partition(x)) == x bitwise for M in {1,2,4}"});
}

const std::vector<Criterion> &criteria() {
    static const std::vector<Criterion> all{
        {1, "oracle equivalence", oracle_equivalence},
        {2, "gradient fidelity", gradient_fidelity},
        {3, "complexity formulas", complexity_formulas},
        {4, "published model size and cost", published_size},
        {5, "connectivity", connectivity},
        {6, "AEWin-T shape chain at 224", shape_chain},
        {7, "toy training", toy_training},
        {8, "degeneracy suite", degeneracy},
    };
    return all;
}

} // namespace

int main(int argc, char **argv) {
    int select = 0;
    std::string only;
    if (argc > 1)
        select = std::atoi(argv[1]);
    if (argc > 2)
        only = argv[2];
    if (argc > 1 && (select < 1 || select > 8)) {
        std::cerr << "usage: acceptance [criterion 1-8 [sub-check]]\n";
        return 2;
    }
    bool all_passed = true;
    for (const Criterion &c : criteria()) {
        if (select != 0 && c.id != select)
            continue;
        std::vector<SubCheck> checks;
        bool ok = true;
        try {
            c.run(checks, only);
        } catch (const std::exception &e) {
            checks.push_back({"exception", false, e.what()});
        }
        if (checks.empty())
            checks.push_back({only, false, "no such sub-check"});
        for (const SubCheck &s : checks)
            ok = ok && s.passed;
        all_passed = all_passed && ok;
        std::cout << (ok ? "PASS" : "FAIL") << " criterion " << c.id << ": " << c.title
                  << (only.empty() ? "" : " [" + only + "]") << '\n';
        for (const SubCheck &s : checks)
            std::cout << "    " << (s.passed ? "ok  " : "FAIL") << ' ' << s.name << ": " << s.detail << '\n';
        std::cout.flush();
    }
    return all_passed ? 0 : 1;
}
