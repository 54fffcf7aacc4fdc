#pragma once

#include <array>
#include <vector>

#include <torch/torch.h>

#include "tryon/perceptual.hpp"

namespace tryon {

/// Relative weights of the training objectives.
struct LossWeights {
    double ce = 10;
    double l1 = 10;
    double vgg = 1;
    double tv = 2;
    /// Weights of the intermediate flows F_f0..F_f3 in the multi-scale terms.
    std::array<double, 4> scale{0.25, 0.25, 0.25, 0.25};
    double toig_vgg = 10;
    double toig_fm = 10;

    /// Throws ConfigError when a weight is negative.
    void validate() const;
};

enum class GanRole { Discriminator, Generator };

/// Mean over pixels of -sum_k S[k] log(S^[k] + 1e-8).
torch::Tensor loss_ce(const torch::Tensor& pred, const torch::Tensor& target);

/// sum_i w_i * |W(c_m_i, F_fi) - S_c_i| + |S^_c - S_c| (mean absolute errors).
/// Masks are bicubically resampled to each intermediate flow's own scale.
torch::Tensor loss_l1_multiscale(const std::vector<torch::Tensor>& intermediate_flows, const torch::Tensor& warped_mask,
                                 const torch::Tensor& clothes_mask, const torch::Tensor& target_mask,
                                 const std::array<double, 4>& w);

/// sum_i w_i * phi(W(c_i, F_fi), I_c_i) + phi(I^_c, I_c), images resampled per scale.
torch::Tensor loss_perceptual_multiscale(const std::vector<torch::Tensor>& intermediate_flows,
                                         const torch::Tensor& warped_clothes, const torch::Tensor& clothes,
                                         const torch::Tensor& target_clothes, const std::array<double, 4>& w,
                                         FeatureExtractor& extractor);

/// Least-squares GAN. Discriminator: mean (d_real-1)^2 + mean d_fake^2.
/// Generator: mean (d_fake-1)^2 (`d_real` unused, may be undefined).
torch::Tensor loss_lsgan(const torch::Tensor& d_real, const torch::Tensor& d_fake, GanRole role);

/// Hinge GAN. Discriminator: mean max(0, 1-d_real) + mean max(0, 1+d_fake).
/// Generator: -mean d_fake.
torch::Tensor loss_hinge(const torch::Tensor& d_real, const torch::Tensor& d_fake, GanRole role);

/// Per-scale, per-layer discriminator features.
using FeatureStack = std::vector<std::vector<torch::Tensor>>;

/// Sum over scales and layers of the mean absolute feature difference.
torch::Tensor loss_feature_matching(const FeatureStack& real, const FeatureStack& fake);

/// The five weighted components of the condition-generator objective.
struct TocgLossTerms {
    torch::Tensor ce, gan, l1, vgg, tv;
};

/// lambda_CE*CE + GAN + lambda_L1*L1 + lambda_VGG*VGG + lambda_TV*TV.
torch::Tensor loss_tocg_total(const TocgLossTerms& terms, const LossWeights& weights);

}  // namespace tryon
