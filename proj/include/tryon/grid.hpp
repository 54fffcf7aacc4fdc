#pragma once

#include <filesystem>
#include <vector>

#include <torch/torch.h>

#include "tryon/palette.hpp"

namespace tryon {

/// One row of a result panel; tensors carry no batch dimension.
struct GridRow {
    torch::Tensor person;          // [3, H, W] in [-1, 1]
    torch::Tensor clothes;         // [3, h, w]
    torch::Tensor seg;             // [C_seg, h, w], drawn by argmax colour
    torch::Tensor warped_clothes;  // [3, h, w]
    torch::Tensor output;          // [3, H, W]; undefined draws a black tile (rejected sample)
};

/// Renders rows x 5 tiles (person, cloth, S^, I^_c, I^) at the person's
/// resolution into an RGB tensor [3, rows*H, 5*W] in [-1, 1].
torch::Tensor render_grid(const std::vector<GridRow>& rows, const LabelPalette& palette);

/// render_grid written as a PNG. Empty input throws ContractError.
void emit_grid(const std::vector<GridRow>& rows, const LabelPalette& palette, const std::filesystem::path& path);

/// Palette colours of the per-pixel argmax, as an image in [-1, 1].
torch::Tensor colorize_seg(const torch::Tensor& seg, const LabelPalette& palette);

}  // namespace tryon
