#pragma once

#include <array>
#include <utility>
#include <vector>

#include <torch/torch.h>

#include "tryon/fields.hpp"
#include "tryon/layers.hpp"
#include "tryon/palette.hpp"

namespace tryon {

constexpr int kPyramidLevels = 5;
constexpr int kFusionBlocks = kPyramidLevels - 1;

struct CondGenOptions {
    /// Channel widths of pyramid levels 0 (finest) .. 4 (coarsest).
    std::array<int64_t, kPyramidLevels> widths{16, 32, 64, 128, 128};
    /// Drop the flow<->seg information exchange inside fusion blocks.
    bool no_fusion_exchange = false;
    /// Skip masking the clothing logits with the warped clothing mask.
    bool no_condition_align = false;
    /// Skip removing body-part pixels from the warped clothes and mask.
    bool no_occlusion_handling = false;
};

/// Flow and segmentation-feature state passed between fusion blocks.
struct FusionState {
    torch::Tensor flow;         // F_f [B, 2, h, w]
    torch::Tensor seg_feature;  // F_s [B, *, h, w]
};

struct CondGenOutput {
    torch::Tensor warped_clothes;      // I^_c
    torch::Tensor warped_mask;         // S^_c
    torch::Tensor seg;                 // S^ (softmax)
    torch::Tensor seg_logits;          // S^_logit
    torch::Tensor seg_raw;             // F_s4 before ReLU
    std::vector<torch::Tensor> flows;  // F_f0 (coarsest) .. F_f4 (condition resolution)
    torch::Tensor raw_warped_clothes;  // W(c * c_m, F_f4)
    torch::Tensor raw_warped_mask;     // W(c_m, F_f4)
};

/// Condition aligning: r = ReLU(S_raw); the clothing channel of r is multiplied by
/// the warped clothing mask; S^ is the channel softmax of the result. With
/// `enabled` false the mask is not applied. Returns (S^, S^_logit).
std::pair<torch::Tensor, torch::Tensor> condition_align(const torch::Tensor& seg_raw,
                                                        const torch::Tensor& raw_warped_mask, int clothing_channel,
                                                        bool enabled = true);

/// 1 where the channel argmax of `seg` (lowest index on ties) is a body part. [B, 1, H, W].
torch::Tensor body_part_mask(const torch::Tensor& seg, const LabelPalette& palette);

/// Removes body-part pixels of `seg` from the warped clothes and mask.
/// Returns (I^_c, S^_c).
std::pair<torch::Tensor, torch::Tensor> occlusion_handle(const torch::Tensor& raw_warped_clothes,
                                                         const torch::Tensor& raw_warped_mask,
                                                         const torch::Tensor& seg, const LabelPalette& palette);

/// Five residual blocks; the first keeps the input resolution, the others halve it.
class PyramidEncoderImpl : public torch::nn::Module {
public:
    PyramidEncoderImpl(int64_t in_channels, const std::array<int64_t, kPyramidLevels>& widths);
    std::vector<torch::Tensor> forward(const torch::Tensor& x);

private:
    std::vector<ResBlock> blocks_;
};
TORCH_MODULE(PyramidEncoder);

/// One decoder stage: refines the flow (flow pathway) and the segmentation
/// feature (seg pathway) at twice the spatial size of its input state.
class FusionBlockImpl : public torch::nn::Module {
public:
    FusionBlockImpl(int64_t clothing_width, int64_t seg_level_width, int64_t prev_seg_width, int64_t out_seg_width,
                    bool exchange, bool last);
    FusionState forward(const FusionState& state, const torch::Tensor& clothing_level,
                        const torch::Tensor& seg_level);

    /// Final conv of the flow pathway; zero at construction.
    Conv delta_head() { return flow_out_; }

private:
    bool exchange_, last_;
    torch::nn::Conv2d flow1_{nullptr}, flow2_{nullptr};
    Conv flow_out_{nullptr};
    torch::nn::Conv2d seg1_{nullptr}, seg2_{nullptr};
};
TORCH_MODULE(FusionBlock);

/// Try-on condition generator: clothing and segmentation encoders, four
/// fusion blocks, condition aligning and body-part occlusion handling.
class ConditionGeneratorImpl : public torch::nn::Module {
public:
    ConditionGeneratorImpl(LabelPalette palette, CondGenOptions options = {});

    std::vector<torch::Tensor> encode_clothing(const torch::Tensor& clothes, const torch::Tensor& clothes_mask);
    std::vector<torch::Tensor> encode_segmentation(const torch::Tensor& agnostic_parse, const torch::Tensor& pose);
    FusionState init_fusion(const std::vector<torch::Tensor>& clothing_pyramid,
                            const std::vector<torch::Tensor>& seg_pyramid);
    /// block_index in 1..4; levels are the pyramid entries one scale finer than `state`.
    FusionState fusion_block(const FusionState& state, const torch::Tensor& clothing_level,
                             const torch::Tensor& seg_level, int block_index);

    /// `clothes` is the product image with its background; the encoders see it
    /// as is and the warp moves only the masked garment.
    CondGenOutput forward(const torch::Tensor& clothes, const torch::Tensor& clothes_mask,
                          const torch::Tensor& agnostic_parse, const torch::Tensor& pose);

    const LabelPalette& palette() const { return palette_; }
    const CondGenOptions& options() const { return options_; }
    FusionBlock block(int block_index) { return blocks_.at(static_cast<std::size_t>(block_index - 1)); }

private:
    LabelPalette palette_;
    CondGenOptions options_;
    PyramidEncoder clothing_encoder_{nullptr}, seg_encoder_{nullptr};
    torch::nn::Conv2d flow_init_{nullptr};
    ResBlock seg_init1_{nullptr}, seg_init2_{nullptr};
    std::vector<FusionBlock> blocks_;
};
TORCH_MODULE(ConditionGenerator);

/// Throws ConfigError unless both dimensions are divisible by 2^4.
void check_condition_resolution(Resolution res);

}  // namespace tryon
