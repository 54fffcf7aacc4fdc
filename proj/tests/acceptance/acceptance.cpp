// Acceptance suite: ten criteria, one PASS/FAIL line each.
//
// Trained artifacts of the ablation study are cached under --workdir and
// reused when their stored config matches. The convergence run and its
// determinism repeat are trained fresh on every invocation.

#include <algorithm>
#include <array>
#include <cstdarg>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "../support/oracles.hpp"
#include "../support/random_init.hpp"
#include "tryon/checkpoint.hpp"
#include "tryon/experiments.hpp"
#include "tryon/image_gen.hpp"
#include "tryon/infer.hpp"
#include "tryon/losses.hpp"
#include "tryon/rejection.hpp"
#include "tryon/train.hpp"
#include "tryon/warp.hpp"

namespace fs = std::filesystem;
using namespace tryon;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
    bool pass = false;
    std::string summary;
};

/// Detail lines go to stdout indented under the criterion being evaluated.
void detail(const char* fmt, ...) __attribute__((format(printf, 1, 2)));
void detail(const char* fmt, ...) {
    std::va_list args;
    va_start(args, fmt);
    std::printf("    ");
    std::vprintf(fmt, args);
    std::printf("\n");
    std::fflush(stdout);
    va_end(args);
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof(buf), f, args...);
    return buf;
}

const LabelPalette& palette() {
    static const auto p = LabelPalette::default_palette();
    return p;
}

// ---------------------------------------------------------------- training runs

/// The desk-scale run shared by the convergence, determinism and ablation criteria.
RunConfig desk_config(std::uint64_t seed) {
    RunConfig c;
    c.seed = seed;
    c.deterministic = true;
    c.iterations = 2000;
    c.synth_n = 256;
    c.synth_test_n = 64;
    c.data_seed = 0;
    c.log_every = 0;
    return c;
}

constexpr int64_t kAblationToigIterations = 400;

struct Variant {
    const char* name;
    bool no_fusion_exchange;
    bool no_condition_align;
    bool no_occlusion_handling;
};

constexpr Variant kFull{"full", false, false, false};
constexpr Variant kNoFusion{"no_fusion_exchange", true, false, false};
constexpr Variant kNoAlign{"no_condition_align", false, true, false};
constexpr Variant kNoBoth{"no_fusion_and_align", true, true, false};
constexpr Variant kNoOcclusion{"no_occlusion_handling", false, false, true};

RunConfig variant_config(const Variant& v, std::uint64_t seed) {
    auto c = desk_config(seed);
    c.no_fusion_exchange = v.no_fusion_exchange;
    c.no_condition_align = v.no_condition_align;
    c.no_occlusion_handling = v.no_occlusion_handling;
    return c;
}

bool cached(const fs::path& checkpoint, const RunConfig& config) {
    if (!fs::exists(checkpoint)) return false;
    try {
        const auto meta = read_checkpoint_meta(checkpoint);
        return meta.config == serialize_run_config(config) && meta.iteration == config.iterations;
    } catch (const std::exception&) {
        return false;
    }
}

/// Bumped whenever a code change invalidates trained artifacts; a workdir
/// stamped with another revision is cleared.
constexpr const char* kArtifactRevision = "2";

class Workdir {
public:
    explicit Workdir(fs::path root) : root_(std::move(root)) {
        const auto stamp = root_ / "REVISION";
        std::string found;
        if (std::ifstream in(stamp); in) std::getline(in, found);
        if (found != kArtifactRevision) fs::remove_all(root_ / "ablation");
        fs::create_directories(root_);
        std::ofstream(stamp) << kArtifactRevision << "\n";
    }

    const fs::path& root() const { return root_; }

    const DataSplits& data() {
        if (!data_) {
            data_ = std::make_unique<DataSplits>(load_data(desk_config(0), palette()));
        }
        return *data_;
    }

    /// Trained condition generator for `v` and `seed`, reusing a matching checkpoint.
    fs::path tocg(const Variant& v, std::uint64_t seed) {
        const auto config = variant_config(v, seed);
        const auto path = root_ / "ablation" / fmt("%s_s%llu.tocg.pt", v.name, static_cast<unsigned long long>(seed));
        if (cached(path, config)) return path;
        fs::create_directories(path.parent_path());
        // The convergence run is the full model at seed 0 under the same config.
        const auto fresh = root_ / "convergence" / "tocg.pt";
        if (cached(fresh, config)) {
            fs::copy_file(fresh, path, fs::copy_options::overwrite_existing);
            return path;
        }
        const auto t0 = Clock::now();
        apply_runtime(config);
        train_tocg(config, data().train, {path, path.string() + ".csv", {}});
        detail("trained %s (%.1f min)", path.filename().c_str(), seconds_since(t0) / 60);
        return path;
    }

    fs::path toig(const Variant& v, std::uint64_t seed) {
        auto config = variant_config(v, seed);
        const auto tocg_path = tocg(v, seed);
        config.iterations = kAblationToigIterations;
        const auto path = root_ / "ablation" / fmt("%s_s%llu.toig.pt", v.name, static_cast<unsigned long long>(seed));
        if (cached(path, config)) return path;
        const auto t0 = Clock::now();
        apply_runtime(config);
        train_toig(config, data().train, tocg_path, {path, path.string() + ".csv", {}});
        detail("trained %s (%.1f min)", path.filename().c_str(), seconds_since(t0) / 60);
        return path;
    }

private:
    fs::path root_;
    std::unique_ptr<DataSplits> data_;
};

// ---------------------------------------------------------------- 1, 2: structural invariants

struct InvariantCounts {
    int64_t zero_mask_pixels = 0;
    int64_t align_violations = 0;
    int64_t body_pixels = 0;
    int64_t occlusion_violations = 0;
    double seconds = 0;
};

InvariantCounts run_invariants(int runs) {
    const auto t0 = Clock::now();
    const Resolution cond{64, 48}, full{128, 96};
    SynthOptions so;
    so.occlusion_probability = 0.5;
    const auto synth = generate_synthetic_dataset(31, runs, full, palette(), so);
    const auto small = resize_records(synth.records, cond, palette());
    const int cloth = palette().clothing_channel();

    InvariantCounts n;
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> gain(0.5, 2.5);
    torch::NoGradGuard ng;
    for (int k = 0; k < runs; ++k) {
        torch::manual_seed(1000 + k);
        ConditionGenerator g(palette());
        testutil::randomize(*g, gain(rng));
        g->eval();
        // Half the runs pair the person with another record's garment.
        const auto other = static_cast<std::size_t>(k % 2 ? (k + 7) % runs : k);
        const auto cp = with_clothes({small[k]}, {small[other]});
        const auto fp = with_clothes({synth.records[k]}, {synth.records[other]});
        const auto t = make_conditions(g, collate(cp), collate(fp));
        const auto& o = t.cond;

        // Condition aligning: where the raw warped mask is exactly zero the
        // clothing logit is zero and the clothing channel cannot win outright.
        const auto zero = (o.raw_warped_mask == 0).squeeze(1);
        const auto logit_c = o.seg_logits.select(1, cloth);
        auto others_logit = o.seg_logits.clone();
        others_logit.select(1, cloth).fill_(-std::numeric_limits<float>::infinity());
        auto others_seg = o.seg.clone();
        others_seg.select(1, cloth).fill_(-1);
        const auto bad = zero & ((logit_c != 0) | (logit_c > std::get<0>(others_logit.max(1))) |
                                 (o.seg.select(1, cloth) > std::get<0>(others_seg.max(1))));
        n.zero_mask_pixels += zero.sum().item<int64_t>();
        n.align_violations += bad.sum().item<int64_t>();

        // Occlusion handling at both resolutions: no warped clothing or mask on
        // pixels whose segmentation argmax is a body part.
        for (const auto& [clothes, mask, seg] :
             {std::tuple{o.warped_clothes, o.warped_mask, o.seg}, std::tuple{t.warped_clothes, t.warped_mask, t.seg}}) {
            const auto body = body_part_mask(seg, palette()) > 0.5;
            const auto support = (clothes != 0).any(1, true) | (mask != 0);
            n.body_pixels += body.sum().item<int64_t>();
            n.occlusion_violations += (support & body).sum().item<int64_t>();
        }
    }
    n.seconds = seconds_since(t0);
    return n;
}

Outcome criterion1(const InvariantCounts& n) {
    detail("%lld pixels with zero raw warped mask checked in %.1f s", static_cast<long long>(n.zero_mask_pixels),
           n.seconds);
    const bool ok = n.align_violations == 0 && n.zero_mask_pixels > 0 && n.seconds < 60;
    return {ok, fmt("misalignment-free invariant: %lld violations over 200 runs, %.1f s (limit 0, 60 s)",
                    static_cast<long long>(n.align_violations), n.seconds)};
}

Outcome criterion2(const InvariantCounts& n) {
    detail("%lld body-part argmax pixels checked", static_cast<long long>(n.body_pixels));
    const bool ok = n.occlusion_violations == 0 && n.body_pixels > 0 && n.seconds < 60;
    return {ok, fmt("occlusion invariant: %lld violations over 200 runs, %.1f s (limit 0, 60 s)",
                    static_cast<long long>(n.occlusion_violations), n.seconds)};
}

// ---------------------------------------------------------------- 3: warp oracle

Outcome criterion3() {
    const auto t0 = Clock::now();
    torch::manual_seed(303);
    double worst = 0, worst32 = 0;
    for (int k = 0; k < 1000; ++k) {
        const int64_t c = 1 + k % 3;
        const auto x = torch::randn({1, c, 8, 8}, torch::kFloat64);
        const auto flow = (torch::rand({1, 2, 8, 8}, torch::kFloat64) * 2 - 1) * (1 + k % 5);
        const auto ref = oracle::warp(x, flow);
        worst = std::max(worst, (warp(x, flow) - ref).abs().max().item<double>());
        const auto w32 = warp(x.to(torch::kFloat32), flow.to(torch::kFloat32)).to(torch::kFloat64);
        worst32 = std::max(worst32, (w32 - ref).abs().max().item<double>());
    }
    const double s = seconds_since(t0);
    detail("float32 module path: max error %.3g", worst32);
    return {worst <= 1e-6 && s < 30,
            fmt("warp oracle: max error %.3g over 1000 cases in float64, %.1f s (limit 1e-6, 30 s)", worst, s)};
}

// ---------------------------------------------------------------- 4: gradients

Outcome criterion4() {
    const auto t0 = Clock::now();
    const double rtol = 1e-3, atol = 1e-8;
    bool all = true;
    auto report = [&](const char* name, const oracle::GradcheckResult& r, double tol) {
        detail("%-28s %s  %d entries, rtol %.0e%s%s", name, r.ok ? "ok  " : "FAIL", r.checked, tol,
               r.ok ? "" : ", ", r.detail.c_str());
        all = all && r.ok && r.checked > 0;
    };
    torch::manual_seed(404);
    const auto f64 = torch::kFloat64;
    {
        const auto x = torch::randn({1, 2, 6, 7}, f64);
        auto flow = torch::rand({1, 2, 6, 7}, f64) * 4 - 2;
        flow = flow.floor() + 0.2 + 0.6 * (flow - flow.floor());  // away from grid lines
        const auto w = torch::randn({1, 2, 6, 7}, f64);
        report("warp (input, flow)",
               oracle::gradcheck([&](const auto& in) { return (warp(in[0], in[1]) * w).sum(); }, {x, flow}, rtol, atol,
                                 40, 1e-4),
               rtol);
    }
    {
        Spade s(3, 4, 5);
        {
            torch::NoGradGuard g;
            for (auto& p : s->parameters()) p.uniform_(-0.5, 0.5);
        }
        s->to(f64);
        const auto w = torch::randn({1, 3, 5, 5}, f64);
        report("spade_norm",
               oracle::gradcheck([&](const auto& in) { return (s->forward(in[0], in[1]) * w).sum(); },
                                 {torch::randn({1, 3, 5, 5}, f64), torch::softmax(torch::randn({1, 4, 5, 5}, f64), 1)},
                                 rtol, atol, 40),
               rtol);
    }
    {
        const auto target = labels_to_onehot(torch::randint(0, 5, {1, 4, 4}, torch::kLong), 5, f64);
        report("loss_ce",
               oracle::gradcheck([&](const auto& in) { return loss_ce(torch::softmax(in[0], 1), target); },
                                 {torch::randn({1, 5, 4, 4}, f64)}, rtol, atol),
               rtol);
    }
    // Piecewise linear, so a wider step costs no truncation error and keeps the
    // rounding of the O(100) sum far below atol.
    for (auto red : {Reduction::Sum, Reduction::Mean}) {
        report(red == Reduction::Sum ? "loss_tv (sum)" : "loss_tv (mean)",
               oracle::gradcheck([&](const auto& in) { return loss_tv(in[0], red); },
                                 {torch::randn({1, 2, 5, 5}, f64)}, rtol, atol, 24, 1e-4),
               rtol);
    }
    {
        const auto cm = torch::rand({1, 1, 16, 16}, f64);
        const auto sc = (torch::rand({1, 1, 16, 16}, f64) > 0.5).to(f64);
        std::vector<torch::Tensor> in;
        for (int i = 0; i < 4; ++i) in.push_back(torch::rand({1, 2, 2 << i, 2 << i}, f64) * 0.6 + 0.2);
        in.push_back(torch::rand({1, 1, 16, 16}, f64) * 0.5 + 0.25);
        report("loss_l1_multiscale",
               oracle::gradcheck(
                   [&](const auto& v) {
                       std::vector<torch::Tensor> flows(v.begin(), v.begin() + 4);
                       return loss_l1_multiscale(flows, v[4], cm, sc, {.1, .2, .3, .4}).square();
                   },
                   in, rtol, atol),
               rtol);
    }
    {
        RandomConvExtractor phi(1234, f64);
        const auto c = torch::rand({1, 3, 16, 16}, f64) * 2 - 1;
        const auto target = torch::rand({1, 3, 16, 16}, f64) * 2 - 1;
        std::vector<torch::Tensor> in;
        for (int i = 0; i < 4; ++i) in.push_back(torch::rand({1, 2, 2 << i, 2 << i}, f64) * 0.6 + 0.2);
        in.push_back(torch::rand({1, 3, 16, 16}, f64) * 2 - 1);
        report("loss_perceptual_multiscale",
               oracle::gradcheck(
                   [&](const auto& v) {
                       std::vector<torch::Tensor> flows(v.begin(), v.begin() + 4);
                       return loss_perceptual_multiscale(flows, v[4], c, target, {.1, .2, .3, .4}, phi);
                   },
                   in, rtol, atol),
               rtol);
    }
    {
        const auto dr = torch::rand({1, 1, 3, 3}, f64) * 0.8 + 0.1;
        const auto df = -torch::rand({1, 1, 3, 3}, f64) * 0.8 - 0.1;  // hinge arguments away from the kinks
        for (auto role : {GanRole::Discriminator, GanRole::Generator}) {
            const char* who = role == GanRole::Discriminator ? "D" : "G";
            report(fmt("loss_lsgan (%s)", who).c_str(),
                   oracle::gradcheck([&](const auto& in) { return loss_lsgan(in[0], in[1], role); }, {dr, df}, rtol,
                                     atol),
                   rtol);
            report(fmt("loss_hinge (%s)", who).c_str(),
                   oracle::gradcheck([&](const auto& in) { return loss_hinge(in[0], in[1], role); }, {dr, df}, rtol,
                                     atol),
                   rtol);
        }
    }
    {
        // Full forward at a point where no argmax sits on a tie.
        torch::manual_seed(13);
        CondGenOptions o;
        o.widths = {4, 4, 8, 8, 8};
        ConditionGenerator g(palette(), o);
        testutil::randomize(*g, 0.8);
        g->to(f64);
        const auto clothes = torch::rand({1, 3, 16, 16}, f64) * 2 - 1;
        const auto mask = (torch::rand({1, 1, 16, 16}) < 0.6).to(f64);
        const auto sa = labels_to_onehot(torch::randint(0, 7, {1, 16, 16}, torch::kLong), 7, f64);
        const auto pose = torch::rand({1, 3, 16, 16}, f64) * 2 - 1;
        const auto target = torch::rand({1, 7, 16, 16}, f64);
        auto forward = [&] { return g->forward(clothes, mask, sa, pose); };
        const auto body0 = body_part_mask(forward().seg, palette());
        auto loss = [&] {
            const auto out = forward();
            return (out.seg * target).sum() + out.warped_clothes.square().sum() + out.warped_mask.sum() +
                   0.1 * loss_tv(out.flows.back());
        };
        std::vector<torch::Tensor> params;
        for (const auto& kv : g->named_parameters()) {
            const auto& name = kv.key();
            if (name.find("flow_out") != std::string::npos || name.find("flow_init") != std::string::npos ||
                name.find("fusion4.seg2") != std::string::npos ||
                name.find("clothing_encoder.block0") != std::string::npos)
                params.push_back(kv.value());
        }
        auto r = oracle::gradcheck_parameters(loss, params, 1e-2, 1e-6, 6);
        if (!torch::equal(body_part_mask(forward().seg, palette()), body0)) {
            r.ok = false;
            r.detail = "argmax flipped while probing";
        }
        report("cond_gen_forward composite", r, 1e-2);
    }
    const double s = seconds_since(t0);
    return {all && s < 300, fmt("gradient suite: %s, %.1f s (limit 300 s)", all ? "all checks pass" : "failures", s)};
}

// ---------------------------------------------------------------- 5: rejection math

Outcome criterion5() {
    const auto t0 = Clock::now();
    struct Case {
        const char* what;
        double got, want;
    };
    RejectionCalibration l1, l4;
    l1.L = 1;
    l4.L = 4;
    const std::vector<Case> cases{
        {"estimate_L {0.2, 0.5, 0.8}", estimate_L({0.2, 0.5, 0.8}).L, 4},
        {"estimate_L {0.5, 0.5, 0.5}", estimate_L({0.5, 0.5, 0.5}).L, 1},
        {"estimate_L {0.9}", estimate_L({0.9}).L, 9},
        {"p_accept D=0.5 L=1", p_accept(0.5, l1), 1},
        {"p_accept D=0.8 L=4", p_accept(0.8, l4), 1},
        {"p_accept D=0.2 L=4", p_accept(0.2, l4), 0.0625},
    };
    bool exact = true;
    for (const auto& c : cases) {
        // Exact up to the last bit of the decimal inputs: 0.8/0.2 is not 4 in binary.
        const bool ok = std::abs(c.got - c.want) <= 4 * std::numeric_limits<double>::epsilon() * c.want;
        detail("%-28s %.17g (expected %g)%s", c.what, c.got, c.want, ok ? "" : "  MISMATCH");
        exact = exact && ok;
    }
    bool threw = false;
    try {
        estimate_L({});
    } catch (const CalibrationError&) {
        threw = true;
    }
    detail("estimate_L {} throws CalibrationError: %s", threw ? "yes" : "no");

    const std::array<double, 4> pd{0.1, 0.2, 0.3, 0.4}, pg{0.4, 0.3, 0.2, 0.1};
    std::vector<double> dvals;
    for (int k = 0; k < 4; ++k) dvals.push_back(pd[k] / (pd[k] + pg[k]));
    const auto cal = estimate_L(dvals);
    std::mt19937_64 rng(2024);
    std::discrete_distribution<int> proposal(pg.begin(), pg.end());
    std::uniform_real_distribution<double> psi(0.0, 1.0);
    std::array<int, 4> accepted{};
    int total = 0;
    for (int draw = 0; draw < 10000; ++draw) {
        const int k = proposal(rng);
        if (psi(rng) <= p_accept(dvals[static_cast<std::size_t>(k)], cal)) {
            ++accepted[static_cast<std::size_t>(k)];
            ++total;
        }
    }
    double worst_sigmas = 0;
    for (int k = 0; k < 4; ++k) {
        const double freq = static_cast<double>(accepted[static_cast<std::size_t>(k)]) / total;
        const double sigma = std::sqrt(pd[k] * (1 - pd[k]) / total);
        worst_sigmas = std::max(worst_sigmas, std::abs(freq - pd[k]) / sigma);
        detail("toy value %d: accepted frequency %.4f, p_d %.1f (%.2f sigma)", k, freq, pd[k],
               std::abs(freq - pd[k]) / sigma);
    }
    const double s = seconds_since(t0);
    const bool ok = exact && threw && worst_sigmas <= 3 && s < 60;
    return {ok, fmt("rejection math: examples %s, toy oracle worst %.2f sigma over %d accepted of 10000, %.2f s "
                    "(limit 3 sigma, 60 s)",
                    exact && threw ? "exact" : "mismatch", worst_sigmas, total, s)};
}

// ---------------------------------------------------------------- 6, 10: convergence and determinism

struct ConvergenceRun {
    fs::path checkpoint, metrics;
    double seconds = 0;
};

ConvergenceRun train_convergence(const fs::path& dir) {
    fs::remove_all(dir);
    fs::create_directories(dir);
    const auto t0 = Clock::now();
    const auto config = desk_config(0);
    apply_runtime(config);
    const auto data = load_data(config, palette());
    ConvergenceRun r{dir / "tocg.pt", dir / "tocg.csv", 0};
    train_tocg(config, data.train, {r.checkpoint, r.metrics, {}});
    r.seconds = seconds_since(t0);
    return r;
}

double mean_of(const std::vector<double>& v, std::size_t from, std::size_t to) {
    return std::accumulate(v.begin() + static_cast<std::ptrdiff_t>(from), v.begin() + static_cast<std::ptrdiff_t>(to),
                           0.0) /
           static_cast<double>(to - from);
}

Outcome criterion6(const ConvergenceRun& run) {
    const auto table = read_metrics(run.metrics);
    const auto ce = table.column("ce");
    const auto l1 = table.column("l1");
    if (ce.size() != 2000) return {false, fmt("convergence: metrics log has %zu rows, expected 2000", ce.size())};
    const double ce0 = mean_of(ce, 0, 100), ce1 = mean_of(ce, ce.size() - 100, ce.size());
    const double l10 = mean_of(l1, 0, 100), l11 = mean_of(l1, l1.size() - 100, l1.size());
    const double drop = 1 - l11 / l10;
    detail("CE first-100 mean %.4f, final-100 mean %.4f", ce0, ce1);
    detail("L1 first-100 mean %.4f, final-100 mean %.4f", l10, l11);
    const bool ok = ce1 < 0.5 * ce0 && drop >= 0.30 && run.seconds < 1800;
    return {ok, fmt("TOCG convergence: CE final/first %.3f, L1 drop %.1f%%, %.1f min (limits < 0.5, >= 30%%, 30 min)",
                    ce1 / ce0, 100 * drop, run.seconds / 60)};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

Outcome criterion10(const ConvergenceRun& first, const ConvergenceRun& second) {
    const auto a = slurp(first.metrics), b = slurp(second.metrics);
    const auto ta = read_metrics(first.metrics), tb = read_metrics(second.metrics);
    bool values_equal = ta.rows.size() == tb.rows.size();
    for (std::size_t i = 0; values_equal && i < ta.rows.size(); ++i) values_equal = ta.rows[i] == tb.rows[i];
    detail("logs: %zu and %zu bytes, %zu rows each", a.size(), b.size(), ta.rows.size());
    const bool ok = !a.empty() && a == b && values_equal;
    return {ok, fmt("determinism: repeated seed-0 run %s the metrics log", ok ? "reproduces bit-identically" : "differs from")};
}

// ---------------------------------------------------------------- 7: ablation ordering

Outcome criterion7(Workdir& work) {
    const std::array<Variant, 4> variants{kFull, kNoFusion, kNoAlign, kNoBoth};
    const auto& test = work.data().test;
    std::map<std::string, double> mean;
    for (const auto& v : variants) {
        double sum = 0;
        std::string per_seed;
        for (std::uint64_t seed = 0; seed < 3; ++seed) {
            const auto toig = work.toig(v, seed);
            TryOnPipeline pipe(variant_config(v, seed), work.tocg(v, seed), toig);
            const double s = evaluate(pipe, test).paired_ssim;
            sum += s;
            per_seed += fmt(" %.4f", s);
        }
        mean[v.name] = sum / 3;
        detail("%-22s paired SSIM mean %.4f (seeds:%s)", v.name, mean[v.name], per_seed.c_str());
    }
    const double full = mean[kFull.name], nf = mean[kNoFusion.name], na = mean[kNoAlign.name],
                 both = mean[kNoBoth.name];
    const bool ok = full >= nf && full >= na && nf >= both && na >= both;
    return {ok, fmt("ablation ordering: full %.4f, no fusion %.4f, no align %.4f, neither %.4f "
                    "(need full >= each single >= double)",
                    full, nf, na, both)};
}

// ---------------------------------------------------------------- 8: pixel squeezing

double stripe_deviation(TryOnPipeline& pipe, const SynthDataset& samples, const std::vector<std::size_t>& picks) {
    double total = 0;
    for (auto i : picks) {
        const auto& r = samples.records[i];
        const auto& m = samples.meta[i];
        torch::NoGradGuard ng;
        const auto res = pipe.run({r}, {r});
        const auto stat = stripe_period_near_occluder(res.conditions.warped_clothes[0], r.parse, palette(),
                                                      m.occluding_arm);
        // No measurable stripes next to the arm counts as a total loss of the pattern.
        total += stat.valid() ? std::abs(stat.period - m.person_stripe_period) / m.person_stripe_period : 1.0;
    }
    return total / static_cast<double>(picks.size());
}

Outcome criterion8(Workdir& work) {
    SynthOptions so;
    so.occlusion_probability = 1.0;
    const auto samples = generate_synthetic_dataset(808, 60, desk_config(0).output, palette(), so);
    // Keep samples where the statistic is measurable on the ground-truth person.
    std::vector<std::size_t> picks;
    double gt_dev = 0;
    for (std::size_t i = 0; i < samples.records.size() && picks.size() < 20; ++i) {
        const auto& m = samples.meta[i];
        if (!m.occluded) continue;
        const auto stat =
            stripe_period_near_occluder(samples.records[i].person, samples.records[i].parse, palette(), m.occluding_arm);
        if (!stat.valid()) continue;
        gt_dev += std::abs(stat.period - m.person_stripe_period) / m.person_stripe_period;
        picks.push_back(i);
    }
    if (picks.size() < 20) return {false, fmt("pixel squeezing: only %zu measurable samples", picks.size())};
    detail("statistic on the ground-truth person: mean deviation %.2f%%", 100 * gt_dev / 20);

    TryOnPipeline full(desk_config(0), work.tocg(kFull, 0));
    TryOnPipeline ablated(desk_config(0), work.tocg(kNoOcclusion, 0));
    const double d_full = stripe_deviation(full, samples, picks);
    const double d_abl = stripe_deviation(ablated, samples, picks);
    const bool ok = d_full < 0.15 && d_abl > d_full;
    return {ok, fmt("pixel squeezing: period deviation %.1f%% with occlusion handling, %.1f%% without "
                    "(need < 15%% and strictly more without), 20 samples",
                    100 * d_full, 100 * d_abl)};
}

// ---------------------------------------------------------------- 9: rejection separation

Outcome criterion9(Workdir& work) {
    const auto config = desk_config(0);
    TryOnPipeline pipe(config, work.tocg(kFull, 0));
    const auto& train = work.data().train;
    std::vector<double> scores;
    for (std::size_t s = 0; s < train.size(); s += 32) {
        const std::vector<SampleRecord> chunk(train.begin() + static_cast<std::ptrdiff_t>(s),
                                              train.begin() + static_cast<std::ptrdiff_t>(std::min(s + 32, train.size())));
        const auto d = pipe.discriminator_scores(chunk, chunk);
        scores.insert(scores.end(), d.begin(), d.end());
    }
    const auto cal = estimate_L(scores, config.reject_threshold, config.reject_epsilon);
    detail("L = %.4g from %zu training scores", cal.L, scores.size());

    const auto pairs = generate_synthetic_dataset(909, 100, config.condition, palette()).records;
    std::mt19937_64 rng(99);
    std::vector<SampleRecord> corrupted;
    for (const auto& r : pairs) corrupted.push_back(corrupt_clothes_mask(r, random_corruption(rng)));
    const auto d_clean = pipe.discriminator_scores(collate(pairs));
    const auto d_bad = pipe.discriminator_scores(collate(corrupted));
    int lower = 0, saturated = 0;
    double mean_clean = 0, mean_bad = 0;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const double pc = p_accept(d_clean[i], cal), pb = p_accept(d_bad[i], cal);
        lower += pb < pc;
        saturated += pc == 1 && pb == 1;
        mean_clean += pc / 100;
        mean_bad += pb / 100;
    }
    detail("mean p_accept clean %.4f, corrupted %.4f; %d pairs both saturated at 1", mean_clean, mean_bad, saturated);
    return {lower >= 90, fmt("rejection separation: corrupted p_accept lower in %d of 100 pairs (need >= 90)", lower)};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance criteria"};
    std::string workdir = "acceptance_work";
    std::vector<int> only;
    bool strict = false;
    app.add_option("--workdir", workdir, "directory for trained artifacts");
    app.add_option("--only", only, "criteria to evaluate (default: all)")->check(CLI::Range(1, 10));
    app.add_flag("--strict", strict, "exit nonzero when any criterion fails");
    CLI11_PARSE(app, argc, argv);

    const std::set<int> selected = only.empty() ? std::set<int>{1, 2, 3, 4, 5, 6, 7, 8, 9, 10}
                                                : std::set<int>(only.begin(), only.end());
    torch::set_num_threads(1);
    Workdir work(workdir);
    std::map<int, Outcome> results;

    auto run = [&](int id, const std::function<Outcome()>& f) {
        if (!selected.count(id)) return;
        std::printf("criterion %d\n", id);
        std::fflush(stdout);
        try {
            results[id] = f();
        } catch (const std::exception& e) {
            results[id] = {false, std::string("error: ") + e.what()};
        }
        std::printf("%s criterion %d: %s\n", results[id].pass ? "PASS" : "FAIL", id, results[id].summary.c_str());
        std::fflush(stdout);
    };

    if (selected.count(1) || selected.count(2)) {
        InvariantCounts counts;
        try {
            counts = run_invariants(200);
        } catch (const std::exception& e) {
            counts.align_violations = counts.occlusion_violations = -1;
            std::printf("    error: %s\n", e.what());
        }
        run(1, [&] { return criterion1(counts); });
        run(2, [&] { return criterion2(counts); });
    }
    run(3, criterion3);
    run(4, criterion4);
    run(5, criterion5);

    ConvergenceRun first;
    if (selected.count(6) || selected.count(10)) {
        std::printf("training the seed-0 convergence run\n");
        std::fflush(stdout);
        first = train_convergence(work.root() / "convergence");
    }
    run(6, [&] { return criterion6(first); });
    run(10, [&] { return criterion10(first, train_convergence(work.root() / "convergence_repeat")); });
    run(9, [&] { return criterion9(work); });
    run(8, [&] { return criterion8(work); });
    run(7, [&] { return criterion7(work); });

    std::printf("\nsummary\n");
    int passed = 0;
    for (const auto& [id, r] : results) {
        std::printf("%s criterion %d: %s\n", r.pass ? "PASS" : "FAIL", id, r.summary.c_str());
        passed += r.pass;
    }
    std::printf("%d of %zu criteria pass\n", passed, results.size());
    // A completed run reports failures on stdout; --strict turns them into the exit code.
    return strict && passed != static_cast<int>(results.size()) ? 1 : 0;
}
