#pragma once

#include <filesystem>
#include <stdexcept>
#include <vector>

#include <torch/torch.h>

namespace tryon {

class CalibrationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

constexpr double kDefaultRejectionEpsilon = 1e-6;
constexpr double kDefaultRejectionThreshold = 0.3;
constexpr int kCalibrationFormatVersion = 1;

struct RejectionCalibration {
    double L = 1;
    std::vector<double> scores;  // D(x) over the calibration set
    double threshold = kDefaultRejectionThreshold;
    double epsilon = kDefaultRejectionEpsilon;

    /// Throws CalibrationError unless L > 0, tau in [0, 1] and epsilon in (0, 0.5).
    void validate() const;
};

/// x = concat(S^, P, S_a, c, c_m) along channels.
torch::Tensor build_rejection_input(const torch::Tensor& seg, const torch::Tensor& pose,
                                    const torch::Tensor& agnostic_parse, const torch::Tensor& clothes,
                                    const torch::Tensor& clothes_mask);

/// Mean of each score map, averaged over scales, clamped to [eps, 1-eps].
/// Maps of shape [B, 1, h, w] give one value per batch element.
std::vector<double> d_scalar(const std::vector<torch::Tensor>& score_maps, double epsilon = kDefaultRejectionEpsilon);

/// L = max D/(1-D) over the calibration scores. Empty input throws.
RejectionCalibration estimate_L(const std::vector<double>& scores, double threshold = kDefaultRejectionThreshold,
                                double epsilon = kDefaultRejectionEpsilon);

/// min(1, D / (L (1 - D))).
double p_accept(double d, const RejectionCalibration& calibration);

struct GateDecision {
    bool accept = true;
    double p = 1;
};

/// Accept iff p_accept >= tau. Deterministic.
GateDecision gate(double d, const RejectionCalibration& calibration);

/// Fraction of calibration scores accepted at each threshold.
struct SweepRow {
    double threshold;
    double accept_rate;
};
std::vector<SweepRow> threshold_sweep(const RejectionCalibration& calibration, const std::vector<double>& thresholds);

/// Counts of D(x) in `bins` equal-width bins over [0, 1].
std::vector<int> score_histogram(const std::vector<double>& scores, int bins = 20);

/// JSON with version, L, tau, epsilon, the scores and their histogram.
void save_calibration(const std::filesystem::path& path, const RejectionCalibration& calibration);
RejectionCalibration load_calibration(const std::filesystem::path& path);

}  // namespace tryon
