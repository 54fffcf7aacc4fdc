#include "tryon/cond_gen.hpp"

#include "tryon/warp.hpp"

namespace tryon {

namespace F = torch::nn::functional;
using torch::nn::Conv2dOptions;

std::pair<torch::Tensor, torch::Tensor> condition_align(const torch::Tensor& seg_raw,
                                                        const torch::Tensor& raw_warped_mask, int clothing_channel,
                                                        bool enabled) {
    require_rank(seg_raw, 4, "condition_align(seg_raw)");
    require(clothing_channel >= 0 && clothing_channel < seg_raw.size(1), "condition_align: bad clothing channel");
    auto r = torch::relu(seg_raw);
    torch::Tensor logits = r;
    if (enabled) {
        require_rank(raw_warped_mask, 4, "condition_align(mask)");
        require_same_spatial(seg_raw, raw_warped_mask, "condition_align");
        const int64_t c = seg_raw.size(1);
        std::vector<torch::Tensor> parts;
        if (clothing_channel > 0) parts.push_back(r.narrow(1, 0, clothing_channel));
        parts.push_back(r.narrow(1, clothing_channel, 1) * raw_warped_mask);
        if (clothing_channel + 1 < c) parts.push_back(r.narrow(1, clothing_channel + 1, c - clothing_channel - 1));
        logits = torch::cat(parts, 1);
    }
    return {torch::softmax(logits, 1), logits};
}

torch::Tensor body_part_mask(const torch::Tensor& seg, const LabelPalette& palette) {
    require_rank(seg, 4, "body_part_mask");
    auto labels = onehot_to_labels(seg.detach());
    auto mask = torch::zeros_like(labels, torch::kBool);
    for (int c : palette.body_part_channels()) mask |= labels == c;
    return mask.unsqueeze(1).to(seg.scalar_type());
}

std::pair<torch::Tensor, torch::Tensor> occlusion_handle(const torch::Tensor& raw_warped_clothes,
                                                         const torch::Tensor& raw_warped_mask,
                                                         const torch::Tensor& seg, const LabelPalette& palette) {
    require_same_spatial(raw_warped_clothes, seg, "occlusion_handle");
    require_same_spatial(raw_warped_mask, seg, "occlusion_handle");
    auto keep = 1 - body_part_mask(seg, palette);
    return {raw_warped_clothes * keep, raw_warped_mask * keep};
}

void check_condition_resolution(Resolution res) {
    constexpr int kStride = 1 << (kPyramidLevels - 1);
    if (res.height <= 0 || res.width <= 0 || res.height % kStride || res.width % kStride) {
        throw ConfigError("condition resolution " + res.str() + " must be divisible by " + std::to_string(kStride));
    }
}

// ------------------------------------------------------------------ encoder

PyramidEncoderImpl::PyramidEncoderImpl(int64_t in_channels, const std::array<int64_t, kPyramidLevels>& widths) {
    int64_t in = in_channels;
    for (int level = 0; level < kPyramidLevels; ++level) {
        blocks_.push_back(register_module("block" + std::to_string(level),
                                          ResBlock(in, widths[static_cast<std::size_t>(level)], level == 0 ? 1 : 2)));
        in = widths[static_cast<std::size_t>(level)];
    }
}

std::vector<torch::Tensor> PyramidEncoderImpl::forward(const torch::Tensor& x) {
    std::vector<torch::Tensor> levels;
    auto h = x;
    for (auto& block : blocks_) {
        h = block->forward(h);
        levels.push_back(h);
    }
    return levels;
}

// ------------------------------------------------------------- fusion block

FusionBlockImpl::FusionBlockImpl(int64_t clothing_width, int64_t seg_level_width, int64_t prev_seg_width,
                                 int64_t out_seg_width, bool exchange, bool last)
    : exchange_(exchange), last_(last) {
    const int64_t hidden = clothing_width;
    const int64_t guidance = exchange ? prev_seg_width : seg_level_width;
    flow1_ = register_module("flow1", torch::nn::Conv2d(Conv2dOptions(clothing_width + guidance, hidden, 3).padding(1)));
    flow2_ = register_module("flow2", torch::nn::Conv2d(Conv2dOptions(hidden, hidden, 3).padding(1)));
    flow_out_ = register_module("flow_out", Conv(hidden, 2, 3, 1, 1));
    flow_out_->zero_();

    const int64_t seg_in = (exchange ? clothing_width : 0) + prev_seg_width + seg_level_width;
    seg1_ = register_module("seg1", torch::nn::Conv2d(Conv2dOptions(seg_in, out_seg_width, 3).padding(1)));
    seg2_ = register_module("seg2", torch::nn::Conv2d(Conv2dOptions(out_seg_width, out_seg_width, 3).padding(1)));
    zero_biases(*this);
}

FusionState FusionBlockImpl::forward(const FusionState& state, const torch::Tensor& clothing_level,
                                     const torch::Tensor& seg_level) {
    require(clothing_level.size(2) == 2 * state.flow.size(2) && clothing_level.size(3) == 2 * state.flow.size(3),
            "fusion_block: pyramid level must be twice the state's spatial size");
    require_same_spatial(clothing_level, seg_level, "fusion_block");
    require_same_spatial(state.flow, state.seg_feature, "fusion_block(state)");

    const auto up_flow = upsample_flow(state.flow, 2);
    const auto up_seg = resize_bilinear(state.seg_feature, spatial_size(clothing_level));

    // Flow pathway: residual refinement of the upsampled flow, guided by the
    // segmentation feature (or by the raw person features without exchange).
    const auto warped_prev = warp(clothing_level, up_flow);
    const auto guidance = exchange_ ? up_seg : seg_level;
    auto h = lrelu(flow1_->forward(torch::cat({warped_prev, guidance}, 1)));
    h = lrelu(flow2_->forward(h));
    auto flow = up_flow + flow_out_->forward(h);

    // Seg pathway: clothing features deformed by the refined flow join the
    // previous segmentation feature and the person features.
    torch::Tensor seg_in = exchange_ ? torch::cat({warp(clothing_level, flow), up_seg, seg_level}, 1)
                                     : torch::cat({up_seg, seg_level}, 1);
    auto s = seg2_->forward(lrelu(seg1_->forward(seg_in)));
    if (!last_) s = lrelu(s);
    return {flow, s};
}

// ---------------------------------------------------------------- generator

ConditionGeneratorImpl::ConditionGeneratorImpl(LabelPalette palette, CondGenOptions options)
    : palette_(std::move(palette)), options_(options) {
    const auto& w = options_.widths;
    const int64_t cseg = palette_.num_channels();
    clothing_encoder_ = register_module("clothing_encoder", PyramidEncoder(4, w));
    seg_encoder_ = register_module("seg_encoder", PyramidEncoder(cseg + 3, w));
    flow_init_ = register_module("flow_init", torch::nn::Conv2d(Conv2dOptions(w[4] + w[4], 2, 3).padding(1)));
    seg_init1_ = register_module("seg_init1", ResBlock(w[4], w[4], 1));
    seg_init2_ = register_module("seg_init2", ResBlock(w[4], w[4], 1));
    int64_t prev = w[4];
    for (int i = 1; i <= kFusionBlocks; ++i) {
        const auto level = static_cast<std::size_t>(kFusionBlocks - i);
        const bool last = i == kFusionBlocks;
        const int64_t out = last ? cseg : w[level];
        blocks_.push_back(register_module("fusion" + std::to_string(i),
                                          FusionBlock(w[level], w[level], prev, out, !options_.no_fusion_exchange, last)));
        prev = out;
    }
    zero_biases(*this);
}

std::vector<torch::Tensor> ConditionGeneratorImpl::encode_clothing(const torch::Tensor& clothes,
                                                                   const torch::Tensor& clothes_mask) {
    require_same_spatial(clothes, clothes_mask, "encode_clothing");
    check_condition_resolution(spatial_size(clothes));
    return clothing_encoder_->forward(torch::cat({clothes, clothes_mask}, 1));
}

std::vector<torch::Tensor> ConditionGeneratorImpl::encode_segmentation(const torch::Tensor& agnostic_parse,
                                                                       const torch::Tensor& pose) {
    require_same_spatial(agnostic_parse, pose, "encode_segmentation");
    check_condition_resolution(spatial_size(agnostic_parse));
    require(agnostic_parse.size(1) == palette_.num_channels(), "encode_segmentation: parse channels differ from palette");
    return seg_encoder_->forward(torch::cat({agnostic_parse, pose}, 1));
}

FusionState ConditionGeneratorImpl::init_fusion(const std::vector<torch::Tensor>& clothing_pyramid,
                                                const std::vector<torch::Tensor>& seg_pyramid) {
    require(clothing_pyramid.size() == kPyramidLevels && seg_pyramid.size() == kPyramidLevels,
            "init_fusion: pyramids need 5 levels");
    const auto& ec = clothing_pyramid.back();
    const auto& es = seg_pyramid.back();
    require_same_spatial(ec, es, "init_fusion");
    auto flow = flow_init_->forward(torch::cat({ec, es}, 1));
    auto seg = seg_init2_->forward(seg_init1_->forward(es));
    return {flow, seg};
}

FusionState ConditionGeneratorImpl::fusion_block(const FusionState& state, const torch::Tensor& clothing_level,
                                                 const torch::Tensor& seg_level, int block_index) {
    require(block_index >= 1 && block_index <= kFusionBlocks, "fusion_block: index must be in 1..4");
    return blocks_[static_cast<std::size_t>(block_index - 1)]->forward(state, clothing_level, seg_level);
}

CondGenOutput ConditionGeneratorImpl::forward(const torch::Tensor& clothes, const torch::Tensor& clothes_mask,
                                              const torch::Tensor& agnostic_parse, const torch::Tensor& pose) {
    require_same_spatial(clothes, agnostic_parse, "cond_gen_forward");
    const auto ec = encode_clothing(clothes, clothes_mask);
    const auto es = encode_segmentation(agnostic_parse, pose);

    CondGenOutput out;
    auto state = init_fusion(ec, es);
    out.flows.push_back(state.flow);
    for (int i = 1; i <= kFusionBlocks; ++i) {
        const auto level = static_cast<std::size_t>(kFusionBlocks - i);
        state = fusion_block(state, ec[level], es[level], i);
        out.flows.push_back(state.flow);
    }
    const auto& flow = out.flows.back();
    out.seg_raw = state.seg_feature;
    // The garment is warped without its product-view background.
    out.raw_warped_clothes = warp(clothes * clothes_mask, flow);
    out.raw_warped_mask = warp(clothes_mask, flow);
    std::tie(out.seg, out.seg_logits) = condition_align(out.seg_raw, out.raw_warped_mask, palette_.clothing_channel(),
                                                        !options_.no_condition_align);
    if (options_.no_occlusion_handling) {
        out.warped_clothes = out.raw_warped_clothes;
        out.warped_mask = out.raw_warped_mask;
    } else {
        std::tie(out.warped_clothes, out.warped_mask) =
            occlusion_handle(out.raw_warped_clothes, out.raw_warped_mask, out.seg, palette_);
    }
    return out;
}

}  // namespace tryon
