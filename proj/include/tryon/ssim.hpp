#pragma once

#include <vector>

#include <torch/torch.h>

namespace tryon {

struct SsimOptions {
    int window = 11;
    double sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
};

/// Windowed SSIM of two image batches in [-1, 1] (mapped to [0, 1] with data
/// range 1), Gaussian window over valid positions only. Returns one value per
/// batch element: the mean over channels and windows.
std::vector<double> ssim_per_sample(const torch::Tensor& a, const torch::Tensor& b, const SsimOptions& options = {});

/// Mean of ssim_per_sample over the batch. Accepts [3, H, W] or [B, 3, H, W].
double ssim(const torch::Tensor& a, const torch::Tensor& b, const SsimOptions& options = {});

}  // namespace tryon
