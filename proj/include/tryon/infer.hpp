#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include <torch/torch.h>

#include "tryon/cond_gen.hpp"
#include "tryon/config.hpp"
#include "tryon/dataset.hpp"
#include "tryon/discriminator.hpp"
#include "tryon/image_gen.hpp"
#include "tryon/palette.hpp"
#include "tryon/perceptual.hpp"
#include "tryon/rejection.hpp"

namespace tryon {

// ---------------------------------------------------------------- models

LabelPalette load_palette(const RunConfig& config);
CondGenOptions cond_gen_options(const RunConfig& config);

ConditionGenerator make_condition_generator(const RunConfig& config, const LabelPalette& palette);
/// Input is the rejection stack x; input x1/2 downsampling and dropout 0.5.
MultiScaleDiscriminator make_tocg_discriminator(const LabelPalette& palette);
ImageGenerator make_image_generator(const LabelPalette& palette);
/// Input is concat(S^, I_a, I^_c, P, image).
MultiScaleDiscriminator make_toig_discriminator(const LabelPalette& palette);
std::unique_ptr<FeatureExtractor> make_feature_extractor(const RunConfig& config);

/// Applies the thread settings; deterministic mode pins one thread.
void apply_runtime(const RunConfig& config);

// ---------------------------------------------------------------- data

struct DataSplits {
    std::vector<SampleRecord> train, test;       // output resolution
    std::vector<SynthMeta> train_meta, test_meta;  // synthetic source only
    std::vector<LoadError> errors;
};

/// Synthetic: records 0..synth_n-1 of data_seed train, the next synth_test_n test.
/// Directory: data_root/pairs and data_root/test_pairs.
DataSplits load_data(const RunConfig& config, const LabelPalette& palette);

std::vector<SampleRecord> resize_records(const std::vector<SampleRecord>& records, Resolution to,
                                         const LabelPalette& palette);

/// Cloth image with everything outside its mask zeroed; the warped garment is
/// compared against I * S_c, which is zero outside the clothing region too.
torch::Tensor masked_clothes(const Batch& batch);

/// I_c = I * S_c.
torch::Tensor clothing_target(const Batch& batch, const LabelPalette& palette);

// ---------------------------------------------------------------- conditions

/// Condition-generator outputs lifted to the output resolution.
struct TryOnConditions {
    CondGenOutput cond;            // at condition resolution
    torch::Tensor seg;             // S^ upsampled and renormalized
    torch::Tensor warped_clothes;  // I^_c at output resolution
    torch::Tensor warped_mask;     // S^_c at output resolution
    torch::Tensor rejection_input; // x at condition resolution
};

/// `cond_batch` is `full_batch` resized to the condition resolution.
TryOnConditions make_conditions(ConditionGenerator& generator, const Batch& cond_batch, const Batch& full_batch);

// ---------------------------------------------------------------- pipeline

struct InferResult {
    torch::Tensor images;  // [B, 3, H, W]; zeros where rejected
    TryOnConditions conditions;
    std::vector<double> d;         // D(x), filled when the discriminator is loaded
    std::vector<double> p_accept;  // filled when a calibration is given
    std::vector<bool> accepted;
};

/// Frozen two-stage pipeline built from checkpoints.
class TryOnPipeline {
public:
    /// `toig_checkpoint` may be empty to run the condition stage only.
    TryOnPipeline(const RunConfig& config, const std::filesystem::path& tocg_checkpoint,
                  const std::filesystem::path& toig_checkpoint = {});

    /// persons[i] wears clothes_source[i]'s garment. Records at output resolution.
    InferResult run(const std::vector<SampleRecord>& persons, const std::vector<SampleRecord>& clothes_source,
                    const std::optional<RejectionCalibration>& calibration = std::nullopt);

    /// D(x) for each pair, from the condition discriminator in eval mode.
    std::vector<double> discriminator_scores(const std::vector<SampleRecord>& persons,
                                             const std::vector<SampleRecord>& clothes_source);

    /// D(x) for a prepared condition-resolution batch.
    std::vector<double> discriminator_scores(const Batch& cond_batch);

    const LabelPalette& palette() const { return palette_; }
    const RunConfig& config() const { return config_; }
    ConditionGenerator& condition_generator() { return tocg_; }
    bool has_image_generator() const { return !toig_.is_empty(); }

private:
    std::pair<Batch, Batch> prepare(const std::vector<SampleRecord>& persons,
                                    const std::vector<SampleRecord>& clothes_source) const;

    RunConfig config_;
    LabelPalette palette_;
    ConditionGenerator tocg_{nullptr};
    MultiScaleDiscriminator tocg_d_{nullptr};
    ImageGenerator toig_{nullptr};
};

/// Records with the garment of another record swapped in.
std::vector<SampleRecord> with_clothes(const std::vector<SampleRecord>& persons,
                                       const std::vector<SampleRecord>& clothes_source);

/// Unpaired garment assignment: a permutation fixed by `seed`.
std::vector<int64_t> unpaired_assignment(std::size_t n, std::uint64_t seed);

struct EvalReport {
    double paired_ssim = 0;
    std::vector<double> per_sample_ssim;
    double unpaired_accept_rate = 1;
    std::size_t samples = 0;
};

/// Paired SSIM(I^, I) over `records` and, when `calibration` is set, the
/// unpaired acceptance rate. Runs in batches of `batch`.
EvalReport evaluate(TryOnPipeline& pipeline, const std::vector<SampleRecord>& records,
                    const std::optional<RejectionCalibration>& calibration = std::nullopt, int batch = 16);

}  // namespace tryon
