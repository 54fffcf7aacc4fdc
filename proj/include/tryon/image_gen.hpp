#pragma once

#include <vector>

#include <torch/torch.h>

#include "tryon/fields.hpp"
#include "tryon/layers.hpp"

namespace tryon {

/// Per-channel instance normalization over the spatial dims (biased variance).
torch::Tensor instance_normalize(const torch::Tensor& x, double eps = 1e-5);

/// Spatially-adaptive normalization: normalize(x) * (1 + gamma(seg)) + beta(seg),
/// with gamma/beta predicted per pixel from the segmentation map resized to x.
class SpadeImpl : public torch::nn::Module {
public:
    SpadeImpl(int64_t norm_channels, int64_t label_channels, int64_t hidden = 16);
    torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& seg);

    torch::nn::Conv2d shared{nullptr}, gamma{nullptr}, beta{nullptr};
};
TORCH_MODULE(Spade);

class SpadeResBlockImpl : public torch::nn::Module {
public:
    SpadeResBlockImpl(int64_t in, int64_t out, int64_t label_channels, bool spectral);
    torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& seg);

private:
    bool learned_shortcut_;
    Spade norm0_{nullptr}, norm1_{nullptr}, norm_s_{nullptr};
    Conv conv0_{nullptr}, conv1_{nullptr}, conv_s_{nullptr};
};
TORCH_MODULE(SpadeResBlock);

struct ImageGenOptions {
    /// Output widths of the residual blocks, coarse to fine.
    std::vector<int64_t> widths{128, 64, 32, 16};
    bool spectral = true;
};

/// Try-on image generator: SPADE residual blocks with x2 upsampling between
/// them; (I_a, I^_c, P) are resized and concatenated before every block.
class ImageGeneratorImpl : public torch::nn::Module {
public:
    ImageGeneratorImpl(int64_t label_channels, ImageGenOptions options = {});

    /// All conditions at the output resolution; returns [B, 3, H, W] in [-1, 1].
    torch::Tensor forward(const torch::Tensor& agnostic_image, const torch::Tensor& warped_clothes,
                          const torch::Tensor& pose, const torch::Tensor& seg);

    /// Throws ConfigError unless `res` is divisible by 2^(blocks-1).
    void check_resolution(Resolution res) const;
    const ImageGenOptions& options() const { return options_; }

private:
    ImageGenOptions options_;
    Conv head_{nullptr}, tail_{nullptr};
    std::vector<SpadeResBlock> blocks_;
};
TORCH_MODULE(ImageGenerator);

}  // namespace tryon
