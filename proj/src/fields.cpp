#include "tryon/fields.hpp"

namespace tryon {

namespace F = torch::nn::functional;

void require(bool condition, const std::string& message) {
    if (!condition) throw ContractError(message);
}

void require_rank(const torch::Tensor& t, int64_t rank, const char* what) {
    if (!t.defined() || t.dim() != rank) {
        throw ContractError(std::string(what) + ": expected a rank-" + std::to_string(rank) + " tensor");
    }
}

void require_same_spatial(const torch::Tensor& a, const torch::Tensor& b, const char* what) {
    if (a.size(-1) != b.size(-1) || a.size(-2) != b.size(-2)) {
        throw ContractError(std::string(what) + ": spatial size mismatch (" + std::to_string(a.size(-2)) + "x" +
                            std::to_string(a.size(-1)) + " vs " + std::to_string(b.size(-2)) + "x" +
                            std::to_string(b.size(-1)) + ")");
    }
}

torch::Tensor labels_to_onehot(const torch::Tensor& labels, int num_channels, torch::Dtype dtype) {
    require_rank(labels, 3, "labels_to_onehot");
    return F::one_hot(labels.to(torch::kLong), num_channels).permute({0, 3, 1, 2}).to(dtype).contiguous();
}

torch::Tensor onehot_to_labels(const torch::Tensor& seg) {
    require_rank(seg, 4, "onehot_to_labels");
    // torch::argmax does not promise first-index tie breaking; scan explicitly.
    auto best = seg.select(1, 0).clone();
    auto index = torch::zeros_like(best, torch::kLong);
    for (int64_t k = 1; k < seg.size(1); ++k) {
        auto channel = seg.select(1, k);
        auto better = channel > best;
        best = torch::where(better, channel, best);
        index.masked_fill_(better, k);
    }
    return index;
}

bool is_onehot(const torch::Tensor& seg) {
    if (seg.dim() != 4) return false;
    auto binary = (seg == 0) | (seg == 1);
    if (!binary.all().item<bool>()) return false;
    return (seg.sum(1) == 1).all().item<bool>();
}

bool is_soft_seg(const torch::Tensor& seg, double tol) {
    if (seg.dim() != 4) return false;
    if ((seg < 0).any().item<bool>()) return false;
    return ((seg.sum(1) - 1).abs() <= tol).all().item<bool>();
}

torch::Tensor resize_bicubic(const torch::Tensor& x, Resolution to) {
    require_rank(x, 4, "resize_bicubic");
    if (x.size(2) == to.height && x.size(3) == to.width) return x;
    const bool down = to.height < x.size(2) || to.width < x.size(3);
    return F::interpolate(x, F::InterpolateFuncOptions()
                                 .size(std::vector<int64_t>{to.height, to.width})
                                 .mode(torch::kBicubic)
                                 .align_corners(false)
                                 .antialias(down));
}

torch::Tensor resize_bilinear(const torch::Tensor& x, Resolution to) {
    require_rank(x, 4, "resize_bilinear");
    if (x.size(2) == to.height && x.size(3) == to.width) return x;
    return F::interpolate(x, F::InterpolateFuncOptions()
                                 .size(std::vector<int64_t>{to.height, to.width})
                                 .mode(torch::kBilinear)
                                 .align_corners(false));
}

torch::Tensor resize_onehot(const torch::Tensor& seg, Resolution to) {
    require_rank(seg, 4, "resize_onehot");
    if (seg.size(2) == to.height && seg.size(3) == to.width) return seg;
    torch::Tensor soft;
    if (to.height <= seg.size(2) && to.width <= seg.size(3)) {
        soft = F::adaptive_avg_pool2d(seg, F::AdaptiveAvgPool2dFuncOptions({to.height, to.width}));
    } else {
        soft = F::interpolate(seg, F::InterpolateFuncOptions()
                                       .size(std::vector<int64_t>{to.height, to.width})
                                       .mode(torch::kNearest));
    }
    return labels_to_onehot(onehot_to_labels(soft), static_cast<int>(seg.size(1)), seg.scalar_type());
}

torch::Tensor resize_soft_seg(const torch::Tensor& seg, Resolution to) {
    auto up = resize_bilinear(seg, to).clamp_min(0);
    return up / up.sum(1, true).clamp_min(1e-12);
}

Resolution spatial_size(const torch::Tensor& t) {
    return {static_cast<int>(t.size(-2)), static_cast<int>(t.size(-1))};
}

}  // namespace tryon
