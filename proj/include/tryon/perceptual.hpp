#pragma once

#include <filesystem>
#include <memory>
#include <vector>

#include <torch/script.h>
#include <torch/torch.h>

namespace tryon {

/// Frozen feature extractor behind the perceptual distance.
class FeatureExtractor {
public:
    virtual ~FeatureExtractor() = default;
    /// Per-layer features of an image batch [B, 3, H, W].
    virtual std::vector<torch::Tensor> features(const torch::Tensor& images) = 0;
};

/// phi(x) = [x]; the perceptual distance degenerates to plain L1.
class IdentityExtractor final : public FeatureExtractor {
public:
    std::vector<torch::Tensor> features(const torch::Tensor& images) override { return {images}; }
};

/// Three strided 3x3 conv layers with leaky ReLU and fixed random weights drawn
/// from `seed`. Parameters never receive gradients.
class RandomConvExtractor final : public FeatureExtractor {
public:
    explicit RandomConvExtractor(std::uint64_t seed = 1234, torch::Dtype dtype = torch::kFloat32);
    std::vector<torch::Tensor> features(const torch::Tensor& images) override;

private:
    std::vector<torch::Tensor> weights_;
    std::vector<int64_t> strides_;
};

/// Wraps a TorchScript module whose forward returns a tensor list or tuple,
/// e.g. an exported pretrained VGG truncated at the layers of interest.
class ScriptedExtractor final : public FeatureExtractor {
public:
    explicit ScriptedExtractor(const std::filesystem::path& path);
    std::vector<torch::Tensor> features(const torch::Tensor& images) override;

private:
    torch::jit::script::Module module_;
};

/// Sum over layers of the mean absolute feature difference.
torch::Tensor perceptual_distance(FeatureExtractor& extractor, const torch::Tensor& a, const torch::Tensor& b);

}  // namespace tryon
