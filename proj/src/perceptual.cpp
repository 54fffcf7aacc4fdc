#include "tryon/perceptual.hpp"

#include <cmath>

#include "tryon/fields.hpp"
#include "tryon/layers.hpp"

namespace tryon {

namespace F = torch::nn::functional;

RandomConvExtractor::RandomConvExtractor(std::uint64_t seed, torch::Dtype dtype) {
    auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);
    const std::vector<std::pair<int64_t, int64_t>> shapes{{3, 16}, {16, 32}, {32, 32}};
    strides_ = {1, 2, 2};
    for (const auto& [in, out] : shapes) {
        // He-style scaling keeps activations O(1) across layers.
        const double std = std::sqrt(2.0 / static_cast<double>(in * 9));
        weights_.push_back(at::normal(0.0, std, {out, in, 3, 3}, gen, torch::TensorOptions().dtype(dtype)));
    }
}

std::vector<torch::Tensor> RandomConvExtractor::features(const torch::Tensor& images) {
    std::vector<torch::Tensor> out;
    auto h = images;
    for (std::size_t i = 0; i < weights_.size(); ++i) {
        const auto& w = weights_[i].scalar_type() == h.scalar_type() ? weights_[i] : weights_[i].to(h.scalar_type());
        h = lrelu(F::conv2d(h, w, F::Conv2dFuncOptions().stride(strides_[i]).padding(1)));
        out.push_back(h);
    }
    return out;
}

ScriptedExtractor::ScriptedExtractor(const std::filesystem::path& path) : module_(torch::jit::load(path.string())) {
    module_.eval();
    for (auto p : module_.parameters()) p.set_requires_grad(false);
}

std::vector<torch::Tensor> ScriptedExtractor::features(const torch::Tensor& images) {
    auto result = module_.forward({images});
    std::vector<torch::Tensor> out;
    if (result.isTensor()) {
        out.push_back(result.toTensor());
    } else if (result.isTuple()) {
        for (const auto& e : result.toTuple()->elements()) out.push_back(e.toTensor());
    } else {
        out = result.toTensorVector();
    }
    return out;
}

torch::Tensor perceptual_distance(FeatureExtractor& extractor, const torch::Tensor& a, const torch::Tensor& b) {
    const auto fa = extractor.features(a);
    const auto fb = extractor.features(b);
    require(fa.size() == fb.size() && !fa.empty(), "perceptual_distance: feature lists differ");
    auto total = (fa[0] - fb[0]).abs().mean();
    for (std::size_t i = 1; i < fa.size(); ++i) total = total + (fa[i] - fb[i]).abs().mean();
    return total;
}

}  // namespace tryon
