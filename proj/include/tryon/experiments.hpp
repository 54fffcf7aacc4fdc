#pragma once

#include <cstdint>
#include <random>

#include <torch/torch.h>

#include "tryon/dataset.hpp"
#include "tryon/palette.hpp"

namespace tryon {

// ---------------------------------------------------------------- mask corruption

/// Binary erosion with a 3x3 square element, applied `iterations` times. [B, 1, H, W] or [1, H, W].
torch::Tensor erode_mask(const torch::Tensor& mask, int iterations);

/// Integer translation by (dy, dx) pixels with zero fill.
torch::Tensor shift_mask(const torch::Tensor& mask, int dy, int dx);

struct MaskCorruption {
    int erode = 0;
    int dy = 0;
    int dx = 0;
};

/// Erosion of 1..max_erode steps followed by a shift of 1..max_shift pixels
/// along a random non-zero direction.
MaskCorruption random_corruption(std::mt19937_64& rng, int max_erode = 3, int max_shift = 4);

/// Copy of `record` whose clothes mask is corrupted; everything else shared.
SampleRecord corrupt_clothes_mask(const SampleRecord& record, const MaskCorruption& corruption);

// ---------------------------------------------------------------- stripe period

struct StripeStat {
    double period = 0;  // pixels
    int rows = 0;       // rows that contributed
    bool valid() const { return rows > 0; }
};

/// Stripe period of vertically striped `warped_clothes` [3, H, W] measured on
/// the rows where the arm `occluding_arm` (label id) overlaps the torso, over
/// the run of ground-truth clothing pixels that touches the arm on each row.
/// The luminance of the run minus its mean is scanned for sign changes; each
/// row with >= 2 changes gives 2 * (last - first) / (changes - 1), and rows
/// are combined weighted by their change count.
StripeStat stripe_period_near_occluder(const torch::Tensor& warped_clothes, const torch::Tensor& parse,
                                       const LabelPalette& palette, int occluding_arm, int min_run = 6);

}  // namespace tryon
