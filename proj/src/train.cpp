#include "tryon/train.hpp"

#include <cinttypes>
#include <cmath>
#include <fstream>
#include <sstream>

#include "tryon/checkpoint.hpp"
#include "tryon/infer.hpp"
#include "tryon/losses.hpp"
#include "tryon/warp.hpp"

namespace tryon {

// ---------------------------------------------------------------- metrics log

std::vector<double> MetricsTable::column(const std::string& name) const {
    for (std::size_t c = 0; c < columns.size(); ++c) {
        if (columns[c] != name) continue;
        std::vector<double> out;
        out.reserve(rows.size());
        for (const auto& r : rows) out.push_back(r[c]);
        return out;
    }
    throw std::out_of_range("metrics log has no column '" + name + "'");
}

MetricsTable read_metrics(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw TrainingError("cannot read metrics log " + path.string());
    MetricsTable t;
    std::string line;
    if (!std::getline(in, line)) throw TrainingError("metrics log is empty: " + path.string());
    {
        std::stringstream ss(line);
        std::string name;
        std::getline(ss, name, ',');
        if (name != "iteration") throw TrainingError("metrics log header must start with 'iteration'");
        while (std::getline(ss, name, ',')) t.columns.push_back(name);
    }
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::getline(ss, cell, ',');
        t.iterations.push_back(std::stoll(cell));
        std::vector<double> row;
        while (std::getline(ss, cell, ',')) row.push_back(std::strtod(cell.c_str(), nullptr));
        if (row.size() != t.columns.size()) throw TrainingError("metrics log row has the wrong width: " + line);
        t.rows.push_back(std::move(row));
    }
    return t;
}

MetricsLog::MetricsLog(const std::filesystem::path& path, std::vector<std::string> columns, int64_t first_iteration)
    : width_(columns.size()) {
    MetricsTable keep;
    if (first_iteration > 0 && std::filesystem::exists(path)) {
        keep = read_metrics(path);
        if (keep.columns != columns) throw TrainingError("existing metrics log has different columns: " + path.string());
    }
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    file_ = std::fopen(path.string().c_str(), "w");
    if (!file_) throw TrainingError("cannot write metrics log " + path.string());
    std::fputs("iteration", file_);
    for (const auto& c : columns) std::fprintf(file_, ",%s", c.c_str());
    std::fputc('\n', file_);
    for (std::size_t r = 0; r < keep.rows.size(); ++r) {
        if (keep.iterations[r] < first_iteration) append(keep.iterations[r], keep.rows[r]);
    }
    std::fflush(file_);
}

MetricsLog::~MetricsLog() {
    if (file_) std::fclose(file_);
}

void MetricsLog::append(int64_t iteration, const std::vector<double>& values) {
    if (values.size() != width_) throw TrainingError("metrics row has the wrong width");
    std::fprintf(file_, "%" PRId64, iteration);
    for (double v : values) std::fprintf(file_, ",%.17g", v);
    std::fputc('\n', file_);
    std::fflush(file_);
}

// ---------------------------------------------------------------- helpers

const std::vector<std::string>& tocg_metric_columns() {
    static const std::vector<std::string> c{"ce", "gan", "l1", "vgg", "tv", "total", "d_loss"};
    return c;
}

const std::vector<std::string>& toig_metric_columns() {
    static const std::vector<std::string> c{"gan", "vgg", "fm", "total", "d_loss"};
    return c;
}

std::uint64_t iteration_seed(std::uint64_t seed, int64_t iteration) {
    std::uint64_t z = seed * 0x9E3779B97F4A7C15ull + static_cast<std::uint64_t>(iteration) + 0x632BE59BD9B4E019ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return (z ^ (z >> 31)) & 0x7FFFFFFFFFFFFFFFull;
}

namespace {

Batch select(const Batch& b, const torch::Tensor& idx) {
    return {b.person.index_select(0, idx),         b.clothes.index_select(0, idx),
            b.clothes_mask.index_select(0, idx),   b.pose.index_select(0, idx),
            b.parse.index_select(0, idx),          b.agnostic_image.index_select(0, idx),
            b.agnostic_parse.index_select(0, idx)};
}

torch::Tensor draw_batch(int64_t n, int batch) {
    return torch::randperm(n, torch::kLong).slice(0, 0, std::min<int64_t>(batch, n));
}

void set_requires_grad(torch::nn::Module& m, bool on) {
    for (auto& p : m.parameters()) p.set_requires_grad(on);
}

double value(const torch::Tensor& t) { return t.item<double>(); }

bool all_finite(const std::vector<double>& v) {
    for (double x : v) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

std::string describe(const std::vector<std::string>& cols, const std::vector<double>& vals) {
    std::string s;
    for (std::size_t i = 0; i < cols.size(); ++i) s += (i ? " " : "") + cols[i] + "=" + std::to_string(vals[i]);
    return s;
}

CheckpointMeta make_meta(const char* kind, const RunConfig& config, const LabelPalette& palette, int64_t iteration) {
    CheckpointMeta m;
    m.kind = kind;
    m.palette = palette.serialize();
    m.config = serialize_run_config(config);
    m.condition = config.condition;
    m.output = config.output;
    m.iteration = iteration;
    return m;
}

int64_t resume_if_requested(const TrainPaths& paths, const char* kind, const RunConfig& config,
                            const LabelPalette& palette, const std::vector<NamedModule>& modules,
                            const std::vector<NamedOptimizer>& optimizers) {
    if (paths.resume.empty()) return 0;
    const auto meta = load_checkpoint(paths.resume, modules, optimizers);
    if (meta.kind != kind) throw ConfigError("cannot resume a " + std::string(kind) + " run from a " + meta.kind + " checkpoint");
    if (!(meta.condition == config.condition) || !(meta.output == config.output)) {
        throw ConfigError("resume checkpoint resolution differs from the configuration");
    }
    if (!(LabelPalette::parse(meta.palette) == palette)) throw ConfigError("resume checkpoint palette differs");
    return meta.iteration;
}

void progress(const char* stage, const RunConfig& config, int64_t it, const std::vector<std::string>& cols,
              const std::vector<double>& vals) {
    if (config.log_every > 0 && (it + 1) % config.log_every == 0) {
        std::fprintf(stderr, "[%s] iter %" PRId64 "/%" PRId64 " %s\n", stage, it + 1, config.iterations,
                     describe(cols, vals).c_str());
    }
}

torch::optim::Adam adam(const std::vector<torch::Tensor>& params, double lr, const RunConfig& c) {
    return torch::optim::Adam(params, torch::optim::AdamOptions(lr).betas({c.beta1, c.beta2}));
}

}  // namespace

// ---------------------------------------------------------------- condition generator

TrainResult train_tocg(const RunConfig& config, const std::vector<SampleRecord>& records, const TrainPaths& paths) {
    config.validate();
    require(!records.empty(), "train_tocg: no training records");
    apply_runtime(config);
    const auto palette = load_palette(config);
    const auto data = collate(resize_records(records, config.condition, palette));
    const auto extractor = make_feature_extractor(config);
    const auto& w = config.weights;

    torch::manual_seed(config.seed);
    auto g = make_condition_generator(config, palette);
    auto d = make_tocg_discriminator(palette);
    auto opt_g = adam(g->parameters(), config.lr_tocg_g, config);
    auto opt_d = adam(d->parameters(), config.lr_tocg_d, config);
    const std::vector<NamedModule> modules{{"tocg", g.ptr().get()}, {"tocg_d", d.ptr().get()}};
    const std::vector<NamedOptimizer> optimizers{{"tocg_g", &opt_g}, {"tocg_d", &opt_d}};

    TrainResult result;
    result.start_iteration = resume_if_requested(paths, "tocg", config, palette, modules, optimizers);
    result.metrics.columns = tocg_metric_columns();
    MetricsLog log(paths.metrics, tocg_metric_columns(), result.start_iteration);
    g->train();
    d->train();

    for (int64_t it = result.start_iteration; it < config.iterations; ++it) {
        torch::manual_seed(iteration_seed(config.seed, it));
        const auto b = select(data, draw_batch(data.size(), config.batch_tocg));
        const auto c = masked_clothes(b);
        const auto target_mask = clothing_region(b.parse, palette);
        const auto target_clothes = b.person * target_mask;

        auto out = g->forward(b.clothes, b.clothes_mask, b.agnostic_parse, b.pose);
        const auto x_real = build_rejection_input(b.parse, b.pose, b.agnostic_parse, b.clothes, b.clothes_mask);
        const auto x_fake = build_rejection_input(out.seg, b.pose, b.agnostic_parse, b.clothes, b.clothes_mask);
        std::vector<torch::Tensor> intermediate;
        if (!config.no_multiscale_losses) intermediate.assign(out.flows.begin(), out.flows.end() - 1);

        set_requires_grad(*d, false);
        TocgLossTerms terms;
        terms.ce = loss_ce(out.seg, b.parse);
        terms.gan = sum_over_scales(nullptr, d->forward(x_fake), GanRole::Generator, loss_lsgan);
        terms.l1 = loss_l1_multiscale(intermediate, out.warped_mask, b.clothes_mask, target_mask, w.scale);
        terms.vgg = loss_perceptual_multiscale(intermediate, out.warped_clothes, c, target_clothes, w.scale, *extractor);
        terms.tv = loss_tv(out.flows.back(), Reduction::Mean);
        const auto total = loss_tocg_total(terms, w);
        opt_g.zero_grad();
        total.backward();
        opt_g.step();
        set_requires_grad(*d, true);

        const auto real_out = d->forward(x_real);
        const auto fake_out = d->forward(x_fake.detach());
        const auto d_loss = sum_over_scales(&real_out, fake_out, GanRole::Discriminator, loss_lsgan);
        opt_d.zero_grad();
        d_loss.backward();
        opt_d.step();

        std::vector<double> row{value(terms.ce), value(terms.gan), value(terms.l1), value(terms.vgg),
                                value(terms.tv),  value(total),     value(d_loss)};
        if (!all_finite(row)) {
            const auto snapshot = paths.checkpoint.string() + ".nan";
            save_checkpoint(snapshot, make_meta("tocg", config, palette, it), modules, optimizers);
            throw TrainingError("non-finite loss at iteration " + std::to_string(it) + " (" +
                                describe(tocg_metric_columns(), row) + "); snapshot written to " + snapshot);
        }
        log.append(it, row);
        result.metrics.iterations.push_back(it);
        result.metrics.rows.push_back(row);
        progress("tocg", config, it, tocg_metric_columns(), row);
    }
    result.end_iteration = std::max(result.start_iteration, config.iterations);
    save_checkpoint(paths.checkpoint, make_meta("tocg", config, palette, result.end_iteration), modules, optimizers);
    return result;
}

// ---------------------------------------------------------------- image generator

TrainResult train_toig(const RunConfig& config, const std::vector<SampleRecord>& records,
                       const std::filesystem::path& tocg_checkpoint, const TrainPaths& paths) {
    config.validate();
    require(!records.empty(), "train_toig: no training records");
    apply_runtime(config);
    const auto palette = load_palette(config);
    for (const auto& r : records) {
        if (!(r.resolution() == config.output)) {
            throw ConfigError("training record " + r.pair_id + " is " + r.resolution().str() + ", expected " +
                              config.output.str());
        }
    }
    const auto full = collate(records);
    torch::Tensor seg, warped;
    {
        // Frozen condition generator: its outputs are fixed, so compute them once.
        TryOnPipeline tocg(config, tocg_checkpoint);
        const auto cond = collate(resize_records(records, config.condition, palette));
        torch::NoGradGuard no_grad;
        std::vector<torch::Tensor> segs, warps;
        for (int64_t s = 0; s < full.size(); s += 16) {
            const auto idx = torch::arange(s, std::min<int64_t>(s + 16, full.size()), torch::kLong);
            const auto t = make_conditions(tocg.condition_generator(), select(cond, idx), select(full, idx));
            segs.push_back(t.seg);
            warps.push_back(t.warped_clothes);
        }
        seg = torch::cat(segs);
        warped = torch::cat(warps);
    }
    const auto extractor = make_feature_extractor(config);
    const auto& w = config.weights;

    torch::manual_seed(config.seed);
    auto g = make_image_generator(palette);
    auto d = make_toig_discriminator(palette);
    g->check_resolution(config.output);
    auto opt_g = adam(g->parameters(), config.lr_toig_g, config);
    auto opt_d = adam(d->parameters(), config.lr_toig_d, config);
    const std::vector<NamedModule> modules{{"toig", g.ptr().get()}, {"toig_d", d.ptr().get()}};
    const std::vector<NamedOptimizer> optimizers{{"toig_g", &opt_g}, {"toig_d", &opt_d}};

    TrainResult result;
    result.start_iteration = resume_if_requested(paths, "toig", config, palette, modules, optimizers);
    result.metrics.columns = toig_metric_columns();
    MetricsLog log(paths.metrics, toig_metric_columns(), result.start_iteration);
    g->train();
    d->train();

    for (int64_t it = result.start_iteration; it < config.iterations; ++it) {
        torch::manual_seed(iteration_seed(config.seed, it));
        const auto idx = draw_batch(full.size(), config.batch_toig);
        const auto person = full.person.index_select(0, idx);
        const auto agnostic = full.agnostic_image.index_select(0, idx);
        const auto pose = full.pose.index_select(0, idx);
        const auto s = seg.index_select(0, idx);
        const auto ic = warped.index_select(0, idx);

        const auto fake = g->forward(agnostic, ic, pose, s);
        const auto cond = torch::cat({s, agnostic, ic, pose}, 1);
        const auto x_real = torch::cat({cond, person}, 1);
        const auto x_fake = torch::cat({cond, fake}, 1);

        set_requires_grad(*d, false);
        const auto fake_out = d->forward(x_fake);
        DiscriminatorOutput real_feat;
        {
            torch::NoGradGuard no_grad;
            real_feat = d->forward(x_real);
        }
        const auto gan = sum_over_scales(nullptr, fake_out, GanRole::Generator, loss_hinge);
        const auto fm = loss_feature_matching(real_feat.features, fake_out.features);
        const auto vgg = perceptual_distance(*extractor, fake, person);
        const auto total = gan + w.toig_fm * fm + w.toig_vgg * vgg;
        opt_g.zero_grad();
        total.backward();
        opt_g.step();
        set_requires_grad(*d, true);

        const auto real_out = d->forward(x_real);
        const auto fake_d = d->forward(x_fake.detach());
        const auto d_loss = sum_over_scales(&real_out, fake_d, GanRole::Discriminator, loss_hinge);
        opt_d.zero_grad();
        d_loss.backward();
        opt_d.step();

        std::vector<double> row{value(gan), value(vgg), value(fm), value(total), value(d_loss)};
        if (!all_finite(row)) {
            const auto snapshot = paths.checkpoint.string() + ".nan";
            save_checkpoint(snapshot, make_meta("toig", config, palette, it), modules, optimizers);
            throw TrainingError("non-finite loss at iteration " + std::to_string(it) + " (" +
                                describe(toig_metric_columns(), row) + "); snapshot written to " + snapshot);
        }
        log.append(it, row);
        result.metrics.iterations.push_back(it);
        result.metrics.rows.push_back(row);
        progress("toig", config, it, toig_metric_columns(), row);
    }
    result.end_iteration = std::max(result.start_iteration, config.iterations);
    save_checkpoint(paths.checkpoint, make_meta("toig", config, palette, result.end_iteration), modules, optimizers);
    return result;
}

}  // namespace tryon
