#pragma once

#include <vector>

#include <torch/torch.h>

#include "tryon/layers.hpp"
#include "tryon/losses.hpp"

namespace tryon {

struct DiscriminatorOptions {
    int64_t base_width = 32;
    int num_scales = 2;
    bool spectral = true;
    /// Average-pool the input by 2 before the first scale.
    bool downsample_input = false;
    /// Dropout rate after every hidden activation while training; 0 disables.
    double dropout = 0.0;
};

/// PatchGAN-style discriminator exposing its hidden activations.
class PatchDiscriminatorImpl : public torch::nn::Module {
public:
    PatchDiscriminatorImpl(int64_t in_channels, const DiscriminatorOptions& options);
    /// Returns (score map, hidden features).
    std::pair<torch::Tensor, std::vector<torch::Tensor>> forward(const torch::Tensor& x);

private:
    double dropout_;
    std::vector<Conv> hidden_;
    Conv out_{nullptr};
};
TORCH_MODULE(PatchDiscriminator);

struct DiscriminatorOutput {
    std::vector<torch::Tensor> scores;  // one score map per scale, finest first
    FeatureStack features;              // [scale][layer]
};

/// Bank of patch discriminators; scale k sees the input average-pooled k times.
class MultiScaleDiscriminatorImpl : public torch::nn::Module {
public:
    MultiScaleDiscriminatorImpl(int64_t in_channels, DiscriminatorOptions options = {});
    DiscriminatorOutput forward(const torch::Tensor& x);
    const DiscriminatorOptions& options() const { return options_; }

private:
    DiscriminatorOptions options_;
    std::vector<PatchDiscriminator> scales_;
};
TORCH_MODULE(MultiScaleDiscriminator);

/// Applies `loss` to every scale and sums the results.
template <typename LossFn>
torch::Tensor sum_over_scales(const DiscriminatorOutput* real, const DiscriminatorOutput& fake, GanRole role,
                              LossFn loss) {
    torch::Tensor total;
    for (std::size_t s = 0; s < fake.scores.size(); ++s) {
        auto term = loss(real ? real->scores[s] : torch::Tensor(), fake.scores[s], role);
        total = total.defined() ? total + term : term;
    }
    return total;
}

}  // namespace tryon
