#include "tryon/layers.hpp"

#include <cmath>

namespace tryon {

namespace F = torch::nn::functional;

torch::Tensor lrelu(const torch::Tensor& x, double slope) {
    return F::leaky_relu(x, F::LeakyReLUFuncOptions().negative_slope(slope));
}

SpectralConv2dImpl::SpectralConv2dImpl(int64_t in, int64_t out, int64_t kernel, int64_t stride, int64_t padding,
                                       bool with_bias, int power_iterations)
    : stride_(stride), padding_(padding), power_iterations_(power_iterations) {
    // Same initialisation as torch::nn::Conv2d.
    weight_orig = register_parameter("weight_orig", torch::empty({out, in, kernel, kernel}));
    torch::nn::init::kaiming_uniform_(weight_orig, std::sqrt(5.0));
    if (with_bias) {
        bias = register_parameter("bias", torch::zeros({out}));
    }
    u = register_buffer("u", F::normalize(torch::randn({out}), F::NormalizeFuncOptions().dim(0)));
    v = register_buffer("v", F::normalize(torch::randn({in * kernel * kernel}), F::NormalizeFuncOptions().dim(0)));
    power_iterate(5);
}

void SpectralConv2dImpl::power_iterate(int n) {
    torch::NoGradGuard no_grad;
    auto mat = weight_orig.reshape({weight_orig.size(0), -1});
    for (int k = 0; k < n; ++k) {
        auto nv = F::normalize(torch::mv(mat.t(), u), F::NormalizeFuncOptions().dim(0).eps(1e-12));
        auto nu = F::normalize(torch::mv(mat, nv), F::NormalizeFuncOptions().dim(0).eps(1e-12));
        v.copy_(nv);
        u.copy_(nu);
    }
}

void SpectralConv2dImpl::refine(int n) { power_iterate(n); }

torch::Tensor SpectralConv2dImpl::normalized_weight() {
    auto mat = weight_orig.reshape({weight_orig.size(0), -1});
    // Clones: later forwards update u and v in place while this graph may still need them.
    auto sigma = torch::dot(u.clone(), torch::mv(mat, v.clone()));
    return weight_orig / sigma.clamp_min(1e-12);
}

torch::Tensor SpectralConv2dImpl::forward(const torch::Tensor& x) {
    if (is_training()) power_iterate(power_iterations_);
    return F::conv2d(x, normalized_weight(), F::Conv2dFuncOptions().bias(bias).stride(stride_).padding(padding_));
}

ConvImpl::ConvImpl(int64_t in, int64_t out, int64_t kernel, int64_t stride, int64_t padding, bool spectral,
                   bool bias) {
    if (spectral) {
        spectral_ = register_module("sn", SpectralConv2d(in, out, kernel, stride, padding, bias));
    } else {
        plain_ = register_module(
            "conv", torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, kernel).stride(stride).padding(padding).bias(bias)));
        if (bias) torch::nn::init::zeros_(plain_->bias);
    }
}

torch::Tensor ConvImpl::forward(const torch::Tensor& x) { return plain_ ? plain_->forward(x) : spectral_->forward(x); }

void ConvImpl::zero_() {
    torch::NoGradGuard no_grad;
    for (auto& p : parameters()) p.zero_();
}

ResBlockImpl::ResBlockImpl(int64_t in, int64_t out, int64_t stride) {
    using torch::nn::Conv2dOptions;
    conv1_ = register_module("conv1", torch::nn::Conv2d(Conv2dOptions(in, out, 3).stride(stride).padding(1)));
    conv2_ = register_module("conv2", torch::nn::Conv2d(Conv2dOptions(out, out, 3).padding(1)));
    shortcut_ = register_module("shortcut", torch::nn::Conv2d(Conv2dOptions(in, out, 1).stride(stride)));
    zero_biases(*this);
}

torch::Tensor ResBlockImpl::forward(const torch::Tensor& x) {
    return lrelu(conv2_->forward(lrelu(conv1_->forward(x))) + shortcut_->forward(x));
}

void zero_biases(torch::nn::Module& module) {
    torch::NoGradGuard no_grad;
    for (auto& p : module.named_parameters(/*recurse=*/true)) {
        const auto& key = p.key();
        if (key == "bias" || (key.size() > 5 && key.compare(key.size() - 5, 5, ".bias") == 0)) p.value().zero_();
    }
}

}  // namespace tryon
