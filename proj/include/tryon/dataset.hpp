#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <torch/torch.h>

#include "tryon/fields.hpp"
#include "tryon/palette.hpp"

namespace tryon {

/// One training example. Tensors carry no batch dimension and share H x W.
struct SampleRecord {
    torch::Tensor person;          // I    [3, H, W]
    torch::Tensor clothes;         // c    [3, H, W]
    torch::Tensor clothes_mask;    // c_m  [1, H, W]
    torch::Tensor pose;            // P    [3, H, W]
    torch::Tensor parse;           // S    [C_seg, H, W] one-hot
    torch::Tensor agnostic_image;  // I_a  [3, H, W]
    torch::Tensor agnostic_parse;  // S_a  [C_seg, H, W] one-hot
    std::string pair_id;

    Resolution resolution() const { return spatial_size(person); }
};

/// Throws ContractError describing the first violated field invariant.
void validate_record(const SampleRecord& record, const LabelPalette& palette);

/// Clothing-agnostic pair (I_a, S_a): pixels labelled clothing or body part
/// become neutral gray in the image and the agnostic label in the parse.
/// Accepts single [C, H, W] or batched [B, C, H, W] inputs.
std::pair<torch::Tensor, torch::Tensor> make_agnostic(const torch::Tensor& person, const torch::Tensor& parse,
                                                      const LabelPalette& palette);

/// Ground-truth clothing region S_c = S[clothing_channel], kept as [.., 1, H, W].
torch::Tensor clothing_region(const torch::Tensor& parse, const LabelPalette& palette);

/// Resamples a record: images bicubic, masks bicubic + re-binarized, parse maps
/// by per-label area vote, then the agnostic pair is rebuilt.
SampleRecord resize_record(const SampleRecord& record, Resolution to, const LabelPalette& palette);

/// Stacked mini-batch of records.
struct Batch {
    torch::Tensor person, clothes, clothes_mask, pose, parse, agnostic_image, agnostic_parse;
    int64_t size() const { return person.size(0); }
};
Batch collate(const std::vector<SampleRecord>& records, const std::vector<int64_t>& indices);
Batch collate(const std::vector<SampleRecord>& records);

// ---------------------------------------------------------------- loading

struct LoadError {
    std::string pair_id;
    std::string message;
};

struct LoadResult {
    std::vector<SampleRecord> records;
    std::vector<LoadError> errors;
};

struct LoadOptions {
    int workers = 1;
};

/// Reads a VITON-HD style tree:
///   root/{person,cloth,cloth_mask,parse,pose}/<name>.{png,jpg}
/// driven by a pairs file with "person_name cloth_name" per line. Records come
/// back in pairs-file order regardless of `workers`; a record that fails to
/// load is reported in `errors` and skipped. Label ids outside the palette
/// throw PaletteError.
LoadResult load_dataset(const std::filesystem::path& root, const std::filesystem::path& pairs_file,
                        const LabelPalette& palette, Resolution resolution, LoadOptions options = {});

/// Writes records in the layout load_dataset reads and a matching pairs file.
/// Parse maps are paletted PNGs whose pixel values are label ids. Files are
/// named by record index, counting from `first_index`.
void write_dataset(const std::filesystem::path& root, const std::vector<SampleRecord>& records,
                   const LabelPalette& palette, const std::filesystem::path& pairs_file, std::size_t first_index = 0);

// ---------------------------------------------------------------- synthetic

struct SynthOptions {
    /// Probability that an arm swings in front of the torso garment.
    double occlusion_probability = 0.35;
    /// Stripe period of the garment in product-view pixels at 64 px height; scales with resolution.
    double min_stripe_period = 5.0;
    double max_stripe_period = 7.0;
};

/// Ground truth the generator knows but a record does not carry.
struct SynthMeta {
    /// Stripe period of the garment as it appears on the person, in pixels.
    double person_stripe_period = 0;
    double product_stripe_period = 0;
    bool occluded = false;
    /// Which arm crosses the torso (label id), or -1.
    int occluding_arm = -1;
};

struct SynthDataset {
    std::vector<SampleRecord> records;
    std::vector<SynthMeta> meta;
};

/// Procedural people wearing striped tops plus the flat product view of the
/// same garment. Deterministic in `seed`; record i depends only on (seed, i).
/// Requires the default palette layout (names are looked up).
SynthDataset generate_synthetic_dataset(std::uint64_t seed, int n, Resolution resolution,
                                        const LabelPalette& palette, const SynthOptions& options = {});

}  // namespace tryon
