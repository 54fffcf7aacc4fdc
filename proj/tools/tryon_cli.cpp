// Command-line front end: dataset synthesis, both training stages, rejection
// calibration, inference and evaluation.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "tryon/checkpoint.hpp"
#include "tryon/grid.hpp"
#include "tryon/image_io.hpp"
#include "tryon/infer.hpp"
#include "tryon/rejection.hpp"
#include "tryon/ssim.hpp"
#include "tryon/train.hpp"

namespace fs = std::filesystem;
using namespace tryon;

namespace {

/// RunConfig options shared by every subcommand. Values given on the command
/// line override the config file, which overrides the built-in defaults.
struct ConfigOptions {
    std::string config_file;
    std::map<std::string, std::string> values;
    std::map<std::string, bool> flags;
    std::map<std::string, CLI::Option*> options;

    void attach(CLI::App& app) {
        app.add_option("--config", config_file, "flat key = value config file")->check(CLI::ExistingFile);
        for (const auto& f : config_fields()) {
            if (f.is_flag) {
                options[f.key] = app.add_flag("--" + f.key, flags[f.key], f.help);
            } else {
                options[f.key] = app.add_option("--" + f.key, values[f.key], f.help);
            }
        }
    }

    RunConfig resolve() const {
        RunConfig c = config_file.empty() ? RunConfig{} : load_run_config(config_file);
        for (const auto& f : config_fields()) {
            if (options.at(f.key)->count() == 0) continue;
            f.set(c, f.is_flag ? (flags.at(f.key) ? "true" : "false") : values.at(f.key));
        }
        c.validate();
        return c;
    }
};

struct Loaded {
    RunConfig config;
    LabelPalette palette;
    DataSplits data;
};

Loaded load(const ConfigOptions& opts) {
    Loaded l{opts.resolve(), LabelPalette::default_palette(), {}};
    apply_runtime(l.config);
    l.palette = load_palette(l.config);
    l.data = load_data(l.config, l.palette);
    for (const auto& e : l.data.errors) std::fprintf(stderr, "skipped %s: %s\n", e.pair_id.c_str(), e.message.c_str());
    std::fprintf(stderr, "data: %zu train, %zu test records at %s\n", l.data.train.size(), l.data.test.size(),
                 l.config.output.str().c_str());
    return l;
}

std::vector<SampleRecord> head(const std::vector<SampleRecord>& v, int limit) {
    if (limit <= 0 || static_cast<std::size_t>(limit) >= v.size()) return v;
    return {v.begin(), v.begin() + limit};
}

std::vector<GridRow> grid_rows(const std::vector<SampleRecord>& persons, const std::vector<SampleRecord>& garments,
                               const InferResult& r) {
    std::vector<GridRow> rows;
    for (std::size_t i = 0; i < persons.size(); ++i) {
        const auto k = static_cast<int64_t>(i);
        rows.push_back({persons[i].person, garments[i].clothes, r.conditions.seg[k], r.conditions.warped_clothes[k],
                        r.accepted[i] ? r.images[k] : torch::Tensor()});
    }
    return rows;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Two-stage virtual try-on: condition generator, image generator, discriminator rejection"};
    app.require_subcommand(1);

    // make-synth
    ConfigOptions synth_opts;
    std::string synth_out;
    auto* synth = app.add_subcommand("make-synth", "write a synthetic dataset in the directory layout");
    synth_opts.attach(*synth);
    synth->add_option("--out", synth_out, "dataset root")->required();

    // train-tocg
    ConfigOptions tocg_opts;
    std::string tocg_out, tocg_metrics, tocg_resume;
    auto* train_tocg_cmd = app.add_subcommand("train-tocg", "train the try-on condition generator");
    tocg_opts.attach(*train_tocg_cmd);
    train_tocg_cmd->add_option("--out", tocg_out, "checkpoint to write")->required();
    train_tocg_cmd->add_option("--metrics", tocg_metrics, "metrics CSV (default: <out>.csv)");
    train_tocg_cmd->add_option("--resume", tocg_resume, "checkpoint to continue from")->check(CLI::ExistingFile);

    // train-toig
    ConfigOptions toig_opts;
    std::string toig_tocg, toig_out, toig_metrics, toig_resume;
    auto* train_toig_cmd = app.add_subcommand("train-toig", "train the try-on image generator");
    toig_opts.attach(*train_toig_cmd);
    train_toig_cmd->add_option("--tocg", toig_tocg, "trained condition-generator checkpoint")
        ->required()
        ->check(CLI::ExistingFile);
    train_toig_cmd->add_option("--out", toig_out, "checkpoint to write")->required();
    train_toig_cmd->add_option("--metrics", toig_metrics, "metrics CSV (default: <out>.csv)");
    train_toig_cmd->add_option("--resume", toig_resume, "checkpoint to continue from")->check(CLI::ExistingFile);

    // calibrate-reject
    ConfigOptions cal_opts;
    std::string cal_tocg, cal_out;
    auto* calibrate = app.add_subcommand("calibrate-reject", "estimate the rejection normalizer L on the training set");
    cal_opts.attach(*calibrate);
    calibrate->add_option("--tocg", cal_tocg, "trained condition-generator checkpoint")
        ->required()
        ->check(CLI::ExistingFile);
    calibrate->add_option("--out", cal_out, "calibration JSON to write")->required();

    // infer
    ConfigOptions inf_opts;
    std::string inf_tocg, inf_toig, inf_cal, inf_out;
    bool inf_unpaired = false;
    int inf_limit = 8;
    auto* infer_cmd = app.add_subcommand("infer", "run the pipeline on the test split and write images");
    inf_opts.attach(*infer_cmd);
    infer_cmd->add_option("--tocg", inf_tocg, "condition-generator checkpoint")->required()->check(CLI::ExistingFile);
    infer_cmd->add_option("--toig", inf_toig, "image-generator checkpoint")->required()->check(CLI::ExistingFile);
    infer_cmd->add_option("--calibration", inf_cal, "rejection calibration JSON")->check(CLI::ExistingFile);
    infer_cmd->add_option("--out", inf_out, "output directory")->required();
    infer_cmd->add_flag("--unpaired", inf_unpaired, "swap garments by the seeded permutation");
    infer_cmd->add_option("--limit", inf_limit, "number of test records (0 = all)");

    // eval
    ConfigOptions ev_opts;
    std::string ev_tocg, ev_toig, ev_cal, ev_grid;
    auto* eval_cmd = app.add_subcommand("eval", "paired SSIM and unpaired acceptance rate on the test split");
    ev_opts.attach(*eval_cmd);
    eval_cmd->add_option("--tocg", ev_tocg, "condition-generator checkpoint")->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--toig", ev_toig, "image-generator checkpoint")->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--calibration", ev_cal, "rejection calibration JSON")->check(CLI::ExistingFile);
    eval_cmd->add_option("--grid", ev_grid, "write a result panel of the first test records");

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) {
            const auto c = synth_opts.resolve();
            if (c.dataset != DatasetSource::Synthetic) throw ConfigError("make-synth needs dataset = synthetic");
            const auto palette = load_palette(c);
            const auto data = load_data(c, palette);
            const fs::path root = synth_out;
            write_dataset(root, data.train, palette, root / c.pairs);
            if (!data.test.empty()) write_dataset(root, data.test, palette, root / c.test_pairs, data.train.size());
            std::ofstream(root / "palette.txt") << palette.serialize();
            std::printf("wrote %zu train + %zu test records to %s\n", data.train.size(), data.test.size(),
                        root.string().c_str());
        } else if (train_tocg_cmd->parsed()) {
            const auto l = load(tocg_opts);
            TrainPaths p{tocg_out, tocg_metrics.empty() ? tocg_out + ".csv" : tocg_metrics, tocg_resume};
            const auto r = train_tocg(l.config, l.data.train, p);
            std::printf("tocg: iterations %lld..%lld, checkpoint %s, metrics %s\n",
                        static_cast<long long>(r.start_iteration), static_cast<long long>(r.end_iteration),
                        p.checkpoint.string().c_str(), p.metrics.string().c_str());
        } else if (train_toig_cmd->parsed()) {
            const auto l = load(toig_opts);
            TrainPaths p{toig_out, toig_metrics.empty() ? toig_out + ".csv" : toig_metrics, toig_resume};
            const auto r = train_toig(l.config, l.data.train, toig_tocg, p);
            std::printf("toig: iterations %lld..%lld, checkpoint %s, metrics %s\n",
                        static_cast<long long>(r.start_iteration), static_cast<long long>(r.end_iteration),
                        p.checkpoint.string().c_str(), p.metrics.string().c_str());
        } else if (calibrate->parsed()) {
            const auto l = load(cal_opts);
            TryOnPipeline pipe(l.config, cal_tocg);
            std::vector<double> scores;
            for (std::size_t s = 0; s < l.data.train.size(); s += 32) {
                const std::vector<SampleRecord> chunk(
                    l.data.train.begin() + static_cast<std::ptrdiff_t>(s),
                    l.data.train.begin() + static_cast<std::ptrdiff_t>(std::min(s + 32, l.data.train.size())));
                const auto d = pipe.discriminator_scores(chunk, chunk);
                scores.insert(scores.end(), d.begin(), d.end());
            }
            const auto cal = estimate_L(scores, l.config.reject_threshold, l.config.reject_epsilon);
            save_calibration(cal_out, cal);
            std::printf("L = %.6g over %zu samples, tau = %.3g\nthreshold  accept_rate\n", cal.L, scores.size(),
                        cal.threshold);
            for (const auto& row : threshold_sweep(cal, {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0})) {
                std::printf("%9.2f  %.4f\n", row.threshold, row.accept_rate);
            }
        } else if (infer_cmd->parsed()) {
            const auto l = load(inf_opts);
            TryOnPipeline pipe(l.config, inf_tocg, inf_toig);
            std::optional<RejectionCalibration> cal;
            if (!inf_cal.empty()) cal = load_calibration(inf_cal);
            const auto persons = head(l.data.test.empty() ? l.data.train : l.data.test, inf_limit);
            std::vector<SampleRecord> garments = persons;
            if (inf_unpaired) {
                const auto perm = unpaired_assignment(persons.size(), l.config.seed);
                for (std::size_t i = 0; i < persons.size(); ++i) garments[i] = persons[static_cast<std::size_t>(perm[i])];
            }
            const auto r = pipe.run(persons, garments, cal);
            fs::create_directories(inf_out);
            for (std::size_t i = 0; i < persons.size(); ++i) {
                const auto name = std::to_string(i) + ".png";
                if (r.accepted[i]) write_png(fs::path(inf_out) / name, image_to_raster(r.images[static_cast<int64_t>(i)]));
                std::printf("%s  D=%.4f  %s%s\n", persons[i].pair_id.c_str(), r.d[i], r.accepted[i] ? "accepted" : "rejected",
                            r.p_accept.empty() ? "" : ("  p=" + std::to_string(r.p_accept[i])).c_str());
            }
            emit_grid(grid_rows(persons, garments, r), pipe.palette(), fs::path(inf_out) / "grid.png");
        } else if (eval_cmd->parsed()) {
            const auto l = load(ev_opts);
            TryOnPipeline pipe(l.config, ev_tocg, ev_toig);
            std::optional<RejectionCalibration> cal;
            if (!ev_cal.empty()) cal = load_calibration(ev_cal);
            const auto& split = l.data.test.empty() ? l.data.train : l.data.test;
            const auto rep = evaluate(pipe, split, cal);
            std::printf("samples %zu\npaired_ssim %.6f\n", rep.samples, rep.paired_ssim);
            if (cal) std::printf("unpaired_accept_rate %.4f\n", rep.unpaired_accept_rate);
            if (!ev_grid.empty()) {
                const auto persons = head(split, 4);
                emit_grid(grid_rows(persons, persons, pipe.run(persons, persons)), pipe.palette(), ev_grid);
            }
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
