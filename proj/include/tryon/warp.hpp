#pragma once

#include <torch/torch.h>

namespace tryon {

/// Backward-warps `x` [B, C, H, W] by an appearance flow [B, 2, H, W]:
///
///   out[b, c, i, j] = bilinear sample of x[b, c] at (j + flow[b,0,i,j], i + flow[b,1,i,j])
///
/// Coordinates are pixel indices; samples outside the grid read zeros. The
/// operation is differentiable in both `x` and `flow` (float32 or float64).
torch::Tensor warp(const torch::Tensor& x, const torch::Tensor& flow);

/// Bilinear spatial upsampling by an integer factor, with displacements scaled
/// by the same factor so they stay in pixel units of the finer grid.
torch::Tensor upsample_flow(const torch::Tensor& flow, int factor);

enum class Reduction { Sum, Mean };

/// Total variation ||grad F||_1: absolute forward differences along both axes,
/// both channels, no wraparound. `Sum` adds every difference; `Mean` averages
/// each axis separately and adds the two means.
torch::Tensor loss_tv(const torch::Tensor& flow, Reduction reduction = Reduction::Sum);

}  // namespace tryon
