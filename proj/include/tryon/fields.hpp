#pragma once

// Tensor layouts used throughout the pipeline. Everything is a torch::Tensor
// whose layout is fixed by role:
//
//   image     [B, 3, H, W]     values in [-1, 1]
//   mask      [B, 1, H, W]     values in [0, 1]
//   seg       [B, C_seg, H, W] one-hot (ground truth) or soft (predicted)
//   pose      [B, 3, H, W]     values in [-1, 1]
//   flow      [B, 2, h, w]     channel 0 = horizontal, channel 1 = vertical
//                              displacement in pixels of the grid's own scale
//
// Single records drop the leading batch dimension.

#include <stdexcept>
#include <string>

#include <torch/torch.h>

#include "tryon/palette.hpp"

namespace tryon {

/// Raised when tensor arguments violate an operation's shape contract.
class ContractError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised for inconsistent configurations (resolutions, widths, flags).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Resolution {
    int height = 0;
    int width = 0;
    bool operator==(const Resolution&) const = default;
    std::string str() const { return std::to_string(height) + "x" + std::to_string(width); }
};

void require(bool condition, const std::string& message);
void require_rank(const torch::Tensor& t, int64_t rank, const char* what);
void require_same_spatial(const torch::Tensor& a, const torch::Tensor& b, const char* what);

/// [B, H, W] integer labels -> [B, C, H, W] one-hot in `dtype`.
torch::Tensor labels_to_onehot(const torch::Tensor& labels, int num_channels,
                               torch::Dtype dtype = torch::kFloat32);
/// Channel argmax, ties resolved to the lowest index. [B, C, H, W] -> [B, H, W] int64.
torch::Tensor onehot_to_labels(const torch::Tensor& seg);

/// True when every pixel column holds exactly one 1 and zeros elsewhere.
bool is_onehot(const torch::Tensor& seg);
/// True when entries are >= 0 and each pixel column sums to 1 within `tol`.
bool is_soft_seg(const torch::Tensor& seg, double tol = 1e-5);

/// Bicubic resize for images and masks (masks are clamped back into [0, 1]).
torch::Tensor resize_bicubic(const torch::Tensor& x, Resolution to);
torch::Tensor resize_bilinear(const torch::Tensor& x, Resolution to);
/// Mode-preserving resize of a one-hot map: area-average each channel, then
/// take the argmax so the result is one-hot again.
torch::Tensor resize_onehot(const torch::Tensor& seg, Resolution to);
/// Bilinear resize followed by per-pixel renormalization to unit channel sum.
torch::Tensor resize_soft_seg(const torch::Tensor& seg, Resolution to);

Resolution spatial_size(const torch::Tensor& t);

}  // namespace tryon
