#include "tryon/infer.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "tryon/checkpoint.hpp"
#include "tryon/ssim.hpp"
#include "tryon/warp.hpp"

namespace tryon {

// ---------------------------------------------------------------- models

LabelPalette load_palette(const RunConfig& config) {
    return config.palette.empty() ? LabelPalette::default_palette() : LabelPalette::load(config.palette);
}

CondGenOptions cond_gen_options(const RunConfig& config) {
    CondGenOptions o;
    o.no_fusion_exchange = config.no_fusion_exchange;
    o.no_condition_align = config.no_condition_align;
    o.no_occlusion_handling = config.no_occlusion_handling;
    return o;
}

ConditionGenerator make_condition_generator(const RunConfig& config, const LabelPalette& palette) {
    return ConditionGenerator(palette, cond_gen_options(config));
}

MultiScaleDiscriminator make_tocg_discriminator(const LabelPalette& palette) {
    DiscriminatorOptions o;
    o.downsample_input = true;
    o.dropout = 0.5;
    return MultiScaleDiscriminator(2 * palette.num_channels() + 7, o);
}

ImageGenerator make_image_generator(const LabelPalette& palette) { return ImageGenerator(palette.num_channels()); }

MultiScaleDiscriminator make_toig_discriminator(const LabelPalette& palette) {
    return MultiScaleDiscriminator(palette.num_channels() + 12);
}

std::unique_ptr<FeatureExtractor> make_feature_extractor(const RunConfig& config) {
    if (!config.perceptual_model.empty()) return std::make_unique<ScriptedExtractor>(config.perceptual_model);
    return std::make_unique<RandomConvExtractor>();
}

void apply_runtime(const RunConfig& config) {
    if (config.deterministic) {
        torch::set_num_threads(1);
        at::globalContext().setDeterministicAlgorithms(true, false);
    } else if (config.threads > 0) {
        torch::set_num_threads(config.threads);
    }
}

// ---------------------------------------------------------------- data

DataSplits load_data(const RunConfig& config, const LabelPalette& palette) {
    DataSplits d;
    if (config.dataset == DatasetSource::Synthetic) {
        auto all = generate_synthetic_dataset(config.data_seed, config.synth_n + config.synth_test_n, config.output,
                                              palette);
        const auto split = static_cast<std::ptrdiff_t>(config.synth_n);
        d.train.assign(all.records.begin(), all.records.begin() + split);
        d.test.assign(all.records.begin() + split, all.records.end());
        d.train_meta.assign(all.meta.begin(), all.meta.begin() + split);
        d.test_meta.assign(all.meta.begin() + split, all.meta.end());
        return d;
    }
    const std::filesystem::path root = config.data_root;
    LoadOptions lo;
    lo.workers = config.workers;
    auto train = load_dataset(root, root / config.pairs, palette, config.output, lo);
    d.train = std::move(train.records);
    d.errors = std::move(train.errors);
    if (std::filesystem::exists(root / config.test_pairs)) {
        auto test = load_dataset(root, root / config.test_pairs, palette, config.output, lo);
        d.test = std::move(test.records);
        d.errors.insert(d.errors.end(), test.errors.begin(), test.errors.end());
    }
    return d;
}

std::vector<SampleRecord> resize_records(const std::vector<SampleRecord>& records, Resolution to,
                                         const LabelPalette& palette) {
    std::vector<SampleRecord> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back(resize_record(r, to, palette));
    return out;
}

torch::Tensor masked_clothes(const Batch& batch) { return batch.clothes * batch.clothes_mask; }

torch::Tensor clothing_target(const Batch& batch, const LabelPalette& palette) {
    return batch.person * clothing_region(batch.parse, palette);
}

// ---------------------------------------------------------------- conditions

TryOnConditions make_conditions(ConditionGenerator& generator, const Batch& cb, const Batch& fb) {
    const auto& palette = generator->palette();
    TryOnConditions t;
    t.cond = generator->forward(cb.clothes, cb.clothes_mask, cb.agnostic_parse, cb.pose);
    t.rejection_input = build_rejection_input(t.cond.seg, cb.pose, cb.agnostic_parse, cb.clothes, cb.clothes_mask);

    const auto full = spatial_size(fb.person);
    const auto cond = spatial_size(cb.person);
    if (full.height % cond.height || full.height / cond.height != full.width / cond.width) {
        throw ConfigError("output resolution " + full.str() + " is not a multiple of " + cond.str());
    }
    const int factor = full.height / cond.height;
    t.seg = resize_soft_seg(t.cond.seg, full);
    const auto flow = upsample_flow(t.cond.flows.back(), factor);
    auto warped = warp(masked_clothes(fb), flow);
    auto mask = warp(fb.clothes_mask, flow);
    if (generator->options().no_occlusion_handling) {
        t.warped_clothes = warped;
        t.warped_mask = mask;
    } else {
        std::tie(t.warped_clothes, t.warped_mask) = occlusion_handle(warped, mask, t.seg, palette);
    }
    return t;
}

// ---------------------------------------------------------------- pipeline

namespace {

void check_meta(const CheckpointMeta& meta, const char* kind, const RunConfig& config, const LabelPalette& palette) {
    if (meta.kind != kind) {
        throw ConfigError(std::string("expected a ") + kind + " checkpoint, found '" + meta.kind + "'");
    }
    if (!(meta.condition == config.condition) || !(meta.output == config.output)) {
        throw ConfigError("checkpoint resolution " + meta.condition.str() + " -> " + meta.output.str() +
                          " differs from the configured " + config.condition.str() + " -> " + config.output.str());
    }
    if (!(LabelPalette::parse(meta.palette) == palette)) throw ConfigError("checkpoint palette differs from the configured one");
}

}  // namespace

TryOnPipeline::TryOnPipeline(const RunConfig& config, const std::filesystem::path& tocg_checkpoint,
                             const std::filesystem::path& toig_checkpoint)
    : config_(config), palette_(load_palette(config)) {
    config_.validate();
    const auto meta = read_checkpoint_meta(tocg_checkpoint);
    check_meta(meta, "tocg", config_, palette_);
    // Architecture toggles travel with the checkpoint.
    const auto trained = parse_run_config(meta.config);
    config_.no_fusion_exchange = trained.no_fusion_exchange;
    config_.no_condition_align = trained.no_condition_align;
    config_.no_occlusion_handling = trained.no_occlusion_handling;

    tocg_ = make_condition_generator(config_, palette_);
    tocg_d_ = make_tocg_discriminator(palette_);
    load_checkpoint(tocg_checkpoint, {{"tocg", tocg_.ptr().get()}, {"tocg_d", tocg_d_.ptr().get()}});
    tocg_->eval();
    tocg_d_->eval();
    if (!toig_checkpoint.empty()) {
        check_meta(read_checkpoint_meta(toig_checkpoint), "toig", config_, palette_);
        toig_ = make_image_generator(palette_);
        load_checkpoint(toig_checkpoint, {{"toig", toig_.ptr().get()}});
        toig_->eval();
    }
}

std::pair<Batch, Batch> TryOnPipeline::prepare(const std::vector<SampleRecord>& persons,
                                               const std::vector<SampleRecord>& clothes_source) const {
    const auto pairs = with_clothes(persons, clothes_source);
    for (const auto& r : pairs) {
        if (!(r.resolution() == config_.output)) {
            throw ConfigError("input resolution " + r.resolution().str() + " differs from the configured output " +
                              config_.output.str());
        }
    }
    return {collate(resize_records(pairs, config_.condition, palette_)), collate(pairs)};
}

std::vector<double> TryOnPipeline::discriminator_scores(const Batch& cond_batch) {
    torch::NoGradGuard no_grad;
    const auto& cb = cond_batch;
    const auto out = tocg_->forward(cb.clothes, cb.clothes_mask, cb.agnostic_parse, cb.pose);
    const auto x = build_rejection_input(out.seg, cb.pose, cb.agnostic_parse, cb.clothes, cb.clothes_mask);
    return d_scalar(tocg_d_->forward(x).scores, config_.reject_epsilon);
}

std::vector<double> TryOnPipeline::discriminator_scores(const std::vector<SampleRecord>& persons,
                                                        const std::vector<SampleRecord>& clothes_source) {
    const auto pairs = with_clothes(persons, clothes_source);
    return discriminator_scores(collate(resize_records(pairs, config_.condition, palette_)));
}

InferResult TryOnPipeline::run(const std::vector<SampleRecord>& persons, const std::vector<SampleRecord>& clothes_source,
                               const std::optional<RejectionCalibration>& calibration) {
    torch::NoGradGuard no_grad;
    const auto [cb, fb] = prepare(persons, clothes_source);
    InferResult r;
    r.conditions = make_conditions(tocg_, cb, fb);
    const auto n = static_cast<std::size_t>(fb.size());
    r.d = d_scalar(tocg_d_->forward(r.conditions.rejection_input).scores, config_.reject_epsilon);
    r.accepted.assign(n, true);
    if (calibration) {
        for (std::size_t i = 0; i < n; ++i) {
            const auto g = gate(r.d[i], *calibration);
            r.p_accept.push_back(g.p);
            r.accepted[i] = g.accept;
        }
    }
    r.images = torch::zeros_like(fb.person);
    if (!has_image_generator()) return r;
    std::vector<int64_t> keep;
    for (std::size_t i = 0; i < n; ++i) {
        if (r.accepted[i]) keep.push_back(static_cast<int64_t>(i));
    }
    if (keep.empty()) return r;
    const auto idx = torch::tensor(keep);
    const auto& t = r.conditions;
    const auto out = toig_->forward(fb.agnostic_image.index_select(0, idx), t.warped_clothes.index_select(0, idx),
                                    fb.pose.index_select(0, idx), t.seg.index_select(0, idx));
    r.images.index_copy_(0, idx, out);
    return r;
}

std::vector<SampleRecord> with_clothes(const std::vector<SampleRecord>& persons,
                                       const std::vector<SampleRecord>& clothes_source) {
    require(persons.size() == clothes_source.size(), "with_clothes: length mismatch");
    std::vector<SampleRecord> out = persons;
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (&persons[i] == &clothes_source[i]) continue;
        out[i].clothes = clothes_source[i].clothes;
        out[i].clothes_mask = clothes_source[i].clothes_mask;
        out[i].pair_id = persons[i].pair_id + "|" + clothes_source[i].pair_id;
    }
    return out;
}

std::vector<int64_t> unpaired_assignment(std::size_t n, std::uint64_t seed) {
    std::vector<int64_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 rng(seed);
    // Fisher-Yates with an explicit index draw; std::shuffle's sequence is implementation-defined.
    for (std::size_t i = n; i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng() % i);
        std::swap(perm[i - 1], perm[j]);
    }
    return perm;
}

EvalReport evaluate(TryOnPipeline& pipeline, const std::vector<SampleRecord>& records,
                    const std::optional<RejectionCalibration>& calibration, int batch) {
    require(!records.empty(), "evaluate: no records");
    require(pipeline.has_image_generator(), "evaluate: paired SSIM needs an image-generator checkpoint");
    EvalReport rep;
    rep.samples = records.size();
    const auto perm = unpaired_assignment(records.size(), pipeline.config().seed);
    std::size_t accepted = 0;
    for (std::size_t start = 0; start < records.size(); start += static_cast<std::size_t>(batch)) {
        const auto end = std::min(records.size(), start + static_cast<std::size_t>(batch));
        std::vector<SampleRecord> chunk(records.begin() + static_cast<std::ptrdiff_t>(start),
                                        records.begin() + static_cast<std::ptrdiff_t>(end));
        const auto paired = pipeline.run(chunk, chunk);
        const auto s = ssim_per_sample(paired.images, collate(chunk).person);
        rep.per_sample_ssim.insert(rep.per_sample_ssim.end(), s.begin(), s.end());
        if (calibration) {
            std::vector<SampleRecord> garments;
            for (std::size_t i = start; i < end; ++i) garments.push_back(records[static_cast<std::size_t>(perm[i])]);
            const auto d = pipeline.discriminator_scores(chunk, garments);
            for (double v : d) accepted += gate(v, *calibration).accept;
        }
    }
    rep.paired_ssim = std::accumulate(rep.per_sample_ssim.begin(), rep.per_sample_ssim.end(), 0.0) /
                      static_cast<double>(rep.per_sample_ssim.size());
    if (calibration) rep.unpaired_accept_rate = static_cast<double>(accepted) / static_cast<double>(records.size());
    return rep;
}

}  // namespace tryon
