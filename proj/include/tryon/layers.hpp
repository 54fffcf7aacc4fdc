#pragma once

#include <torch/torch.h>

namespace tryon {

/// 2-D convolution whose weight is divided by its largest singular value,
/// estimated by power iteration on the reshaped [out, in*k*k] matrix. One
/// iteration runs per training-mode forward; eval mode reuses the last
/// estimate.
class SpectralConv2dImpl : public torch::nn::Module {
public:
    SpectralConv2dImpl(int64_t in, int64_t out, int64_t kernel, int64_t stride = 1, int64_t padding = 0,
                       bool bias = true, int power_iterations = 1);

    torch::Tensor forward(const torch::Tensor& x);
    /// Weight after normalization, using the current singular-vector estimate.
    torch::Tensor normalized_weight();
    /// Runs `n` extra power iterations without touching the weight.
    void refine(int n);

    torch::Tensor weight_orig, bias, u, v;

private:
    void power_iterate(int n);
    int64_t stride_, padding_;
    int power_iterations_;
};
TORCH_MODULE(SpectralConv2d);

/// Conv with optional spectral normalization behind one interface.
class ConvImpl : public torch::nn::Module {
public:
    ConvImpl(int64_t in, int64_t out, int64_t kernel, int64_t stride = 1, int64_t padding = 0, bool spectral = false,
             bool bias = true);
    torch::Tensor forward(const torch::Tensor& x);
    /// Zeroes weight and bias.
    void zero_();

private:
    torch::nn::Conv2d plain_{nullptr};
    SpectralConv2d spectral_{nullptr};
};
TORCH_MODULE(Conv);

/// Pre-activation-free residual block used by both encoders:
/// out = lrelu(conv2(lrelu(conv1(x))) + shortcut(x)), where conv1 carries the stride.
class ResBlockImpl : public torch::nn::Module {
public:
    ResBlockImpl(int64_t in, int64_t out, int64_t stride);
    torch::Tensor forward(const torch::Tensor& x);

private:
    torch::nn::Conv2d conv1_{nullptr}, conv2_{nullptr}, shortcut_{nullptr};
};
TORCH_MODULE(ResBlock);

torch::Tensor lrelu(const torch::Tensor& x, double slope = 0.2);

/// Zero every bias of every Conv2d in `module`.
void zero_biases(torch::nn::Module& module);

}  // namespace tryon
