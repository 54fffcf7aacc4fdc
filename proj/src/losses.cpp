#include "tryon/losses.hpp"

#include "tryon/fields.hpp"
#include "tryon/warp.hpp"

namespace tryon {

void LossWeights::validate() const {
    bool ok = ce >= 0 && l1 >= 0 && vgg >= 0 && tv >= 0 && toig_vgg >= 0 && toig_fm >= 0;
    for (double s : scale) ok = ok && s >= 0;
    if (!ok) throw ConfigError("loss weights must be non-negative");
}

torch::Tensor loss_ce(const torch::Tensor& pred, const torch::Tensor& target) {
    require_rank(pred, 4, "loss_ce");
    require(pred.sizes() == target.sizes(), "loss_ce: shape mismatch");
    return -(target * torch::log(pred + 1e-8)).sum(1).mean();
}

torch::Tensor loss_l1_multiscale(const std::vector<torch::Tensor>& intermediate_flows, const torch::Tensor& warped_mask,
                                 const torch::Tensor& clothes_mask, const torch::Tensor& target_mask,
                                 const std::array<double, 4>& w) {
    require(intermediate_flows.size() <= w.size(), "loss_l1_multiscale: at most four intermediate flows");
    require(warped_mask.sizes() == target_mask.sizes(), "loss_l1_multiscale: mask shape mismatch");
    auto total = (warped_mask - target_mask).abs().mean();
    for (std::size_t i = 0; i < intermediate_flows.size(); ++i) {
        if (w[i] == 0) continue;
        const auto& flow = intermediate_flows[i];
        const auto res = spatial_size(flow);
        auto source = resize_bicubic(clothes_mask, res).clamp(0, 1);
        auto target = resize_bicubic(target_mask, res).clamp(0, 1);
        total = total + w[i] * (warp(source, flow) - target).abs().mean();
    }
    return total;
}

torch::Tensor loss_perceptual_multiscale(const std::vector<torch::Tensor>& intermediate_flows,
                                         const torch::Tensor& warped_clothes, const torch::Tensor& clothes,
                                         const torch::Tensor& target_clothes, const std::array<double, 4>& w,
                                         FeatureExtractor& extractor) {
    require(intermediate_flows.size() <= w.size(), "loss_perceptual_multiscale: at most four intermediate flows");
    auto total = perceptual_distance(extractor, warped_clothes, target_clothes);
    for (std::size_t i = 0; i < intermediate_flows.size(); ++i) {
        if (w[i] == 0) continue;
        const auto& flow = intermediate_flows[i];
        const auto res = spatial_size(flow);
        auto source = resize_bicubic(clothes, res);
        auto target = resize_bicubic(target_clothes, res);
        total = total + w[i] * perceptual_distance(extractor, warp(source, flow), target);
    }
    return total;
}

torch::Tensor loss_lsgan(const torch::Tensor& d_real, const torch::Tensor& d_fake, GanRole role) {
    if (role == GanRole::Generator) return (d_fake - 1).pow(2).mean();
    return (d_real - 1).pow(2).mean() + d_fake.pow(2).mean();
}

torch::Tensor loss_hinge(const torch::Tensor& d_real, const torch::Tensor& d_fake, GanRole role) {
    if (role == GanRole::Generator) return -d_fake.mean();
    return torch::relu(1 - d_real).mean() + torch::relu(1 + d_fake).mean();
}

torch::Tensor loss_feature_matching(const FeatureStack& real, const FeatureStack& fake) {
    require(real.size() == fake.size(), "loss_feature_matching: scale count differs");
    torch::Tensor total;
    for (std::size_t s = 0; s < real.size(); ++s) {
        require(real[s].size() == fake[s].size(), "loss_feature_matching: layer count differs");
        for (std::size_t l = 0; l < real[s].size(); ++l) {
            auto term = (real[s][l] - fake[s][l]).abs().mean();
            total = total.defined() ? total + term : term;
        }
    }
    require(total.defined(), "loss_feature_matching: no features");
    return total;
}

torch::Tensor loss_tocg_total(const TocgLossTerms& t, const LossWeights& w) {
    return w.ce * t.ce + t.gan + w.l1 * t.l1 + w.vgg * t.vgg + w.tv * t.tv;
}

}  // namespace tryon
