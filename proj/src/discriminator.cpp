#include "tryon/discriminator.hpp"

namespace tryon {

namespace F = torch::nn::functional;

PatchDiscriminatorImpl::PatchDiscriminatorImpl(int64_t in_channels, const DiscriminatorOptions& o)
    : dropout_(o.dropout) {
    const int64_t w = o.base_width;
    hidden_.push_back(register_module("conv0", Conv(in_channels, w, 4, 2, 1, o.spectral)));
    hidden_.push_back(register_module("conv1", Conv(w, 2 * w, 4, 2, 1, o.spectral)));
    hidden_.push_back(register_module("conv2", Conv(2 * w, 4 * w, 3, 1, 1, o.spectral)));
    out_ = register_module("out", Conv(4 * w, 1, 3, 1, 1, o.spectral));
}

std::pair<torch::Tensor, std::vector<torch::Tensor>> PatchDiscriminatorImpl::forward(const torch::Tensor& x) {
    std::vector<torch::Tensor> features;
    auto h = x;
    for (auto& conv : hidden_) {
        h = lrelu(conv->forward(h));
        if (dropout_ > 0) h = F::dropout(h, F::DropoutFuncOptions().p(dropout_).training(is_training()));
        features.push_back(h);
    }
    return {out_->forward(h), std::move(features)};
}

MultiScaleDiscriminatorImpl::MultiScaleDiscriminatorImpl(int64_t in_channels, DiscriminatorOptions options)
    : options_(options) {
    for (int s = 0; s < options_.num_scales; ++s) {
        scales_.push_back(register_module("scale" + std::to_string(s), PatchDiscriminator(in_channels, options_)));
    }
}

DiscriminatorOutput MultiScaleDiscriminatorImpl::forward(const torch::Tensor& x) {
    DiscriminatorOutput out;
    auto h = options_.downsample_input ? F::avg_pool2d(x, F::AvgPool2dFuncOptions(2)) : x;
    for (std::size_t s = 0; s < scales_.size(); ++s) {
        auto [score, features] = scales_[s]->forward(h);
        out.scores.push_back(score);
        out.features.push_back(std::move(features));
        if (s + 1 < scales_.size()) {
            h = F::avg_pool2d(h, F::AvgPool2dFuncOptions(3).stride(2).padding(1).count_include_pad(false));
        }
    }
    return out;
}

}  // namespace tryon
