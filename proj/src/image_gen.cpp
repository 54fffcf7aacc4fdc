#include "tryon/image_gen.hpp"

namespace tryon {

namespace F = torch::nn::functional;
using torch::nn::Conv2dOptions;

namespace {
constexpr int64_t kConditionChannels = 9;  // I_a, I^_c, P
}

torch::Tensor instance_normalize(const torch::Tensor& x, double eps) {
    auto mean = x.mean({2, 3}, true);
    auto var = (x - mean).pow(2).mean({2, 3}, true);
    return (x - mean) / torch::sqrt(var + eps);
}

SpadeImpl::SpadeImpl(int64_t norm_channels, int64_t label_channels, int64_t hidden) {
    shared = register_module("shared", torch::nn::Conv2d(Conv2dOptions(label_channels, hidden, 3).padding(1)));
    gamma = register_module("gamma", torch::nn::Conv2d(Conv2dOptions(hidden, norm_channels, 3).padding(1)));
    beta = register_module("beta", torch::nn::Conv2d(Conv2dOptions(hidden, norm_channels, 3).padding(1)));
    zero_biases(*this);
}

torch::Tensor SpadeImpl::forward(const torch::Tensor& x, const torch::Tensor& seg) {
    const auto s = resize_bilinear(seg, spatial_size(x));
    const auto actv = torch::relu(shared->forward(s));
    return instance_normalize(x) * (1 + gamma->forward(actv)) + beta->forward(actv);
}

SpadeResBlockImpl::SpadeResBlockImpl(int64_t in, int64_t out, int64_t label_channels, bool spectral)
    : learned_shortcut_(in != out) {
    const int64_t mid = std::min(in, out);
    norm0_ = register_module("norm0", Spade(in, label_channels));
    conv0_ = register_module("conv0", Conv(in, mid, 3, 1, 1, spectral));
    norm1_ = register_module("norm1", Spade(mid, label_channels));
    conv1_ = register_module("conv1", Conv(mid, out, 3, 1, 1, spectral));
    if (learned_shortcut_) {
        norm_s_ = register_module("norm_s", Spade(in, label_channels));
        conv_s_ = register_module("conv_s", Conv(in, out, 1, 1, 0, spectral, false));
    }
}

torch::Tensor SpadeResBlockImpl::forward(const torch::Tensor& x, const torch::Tensor& seg) {
    auto shortcut = learned_shortcut_ ? conv_s_->forward(norm_s_->forward(x, seg)) : x;
    auto dx = conv0_->forward(lrelu(norm0_->forward(x, seg)));
    dx = conv1_->forward(lrelu(norm1_->forward(dx, seg)));
    return shortcut + dx;
}

ImageGeneratorImpl::ImageGeneratorImpl(int64_t label_channels, ImageGenOptions options) : options_(std::move(options)) {
    if (options_.widths.empty()) throw ConfigError("image generator needs at least one block");
    const auto& w = options_.widths;
    head_ = register_module("head", Conv(kConditionChannels, w.front(), 3, 1, 1, options_.spectral));
    int64_t in = w.front();
    for (std::size_t b = 0; b < w.size(); ++b) {
        blocks_.push_back(register_module("block" + std::to_string(b),
                                          SpadeResBlock(in + kConditionChannels, w[b], label_channels, options_.spectral)));
        in = w[b];
    }
    tail_ = register_module("tail", Conv(in, 3, 3, 1, 1, options_.spectral));
}

void ImageGeneratorImpl::check_resolution(Resolution res) const {
    const int factor = 1 << (options_.widths.size() - 1);
    if (res.height <= 0 || res.width <= 0 || res.height % factor || res.width % factor) {
        throw ConfigError("output resolution " + res.str() + " must be divisible by " + std::to_string(factor));
    }
}

torch::Tensor ImageGeneratorImpl::forward(const torch::Tensor& agnostic_image, const torch::Tensor& warped_clothes,
                                          const torch::Tensor& pose, const torch::Tensor& seg) {
    require_same_spatial(agnostic_image, warped_clothes, "image_gen_forward");
    require_same_spatial(agnostic_image, pose, "image_gen_forward");
    const auto res = spatial_size(agnostic_image);
    check_resolution(res);
    const auto cond = torch::cat({agnostic_image, warped_clothes, pose}, 1);
    const int steps = static_cast<int>(blocks_.size()) - 1;
    Resolution cur{res.height >> steps, res.width >> steps};

    auto x = head_->forward(resize_bicubic(cond, cur));
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
        x = blocks_[b]->forward(torch::cat({x, resize_bicubic(cond, cur)}, 1), seg);
        if (b + 1 < blocks_.size()) {
            cur = {cur.height * 2, cur.width * 2};
            x = F::interpolate(x, F::InterpolateFuncOptions()
                                      .size(std::vector<int64_t>{cur.height, cur.width})
                                      .mode(torch::kNearest));
        }
    }
    return torch::tanh(tail_->forward(lrelu(x)));
}

}  // namespace tryon
