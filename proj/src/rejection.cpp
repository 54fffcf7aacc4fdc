#include "tryon/rejection.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "tryon/fields.hpp"

namespace tryon {

void RejectionCalibration::validate() const {
    if (!(L > 0) || !std::isfinite(L)) throw CalibrationError("calibration L must be positive and finite");
    if (!(threshold >= 0 && threshold <= 1)) throw CalibrationError("rejection threshold must lie in [0, 1]");
    if (!(epsilon > 0 && epsilon < 0.5)) throw CalibrationError("rejection epsilon must lie in (0, 0.5)");
}

torch::Tensor build_rejection_input(const torch::Tensor& seg, const torch::Tensor& pose,
                                    const torch::Tensor& agnostic_parse, const torch::Tensor& clothes,
                                    const torch::Tensor& clothes_mask) {
    for (const auto* t : {&seg, &pose, &agnostic_parse, &clothes, &clothes_mask}) {
        require_rank(*t, 4, "build_rejection_input");
        require_same_spatial(seg, *t, "build_rejection_input");
        require(t->size(0) == seg.size(0), "build_rejection_input: batch size mismatch");
    }
    require(pose.size(1) == 3 && clothes.size(1) == 3 && clothes_mask.size(1) == 1,
            "build_rejection_input: expected 3-channel pose and clothes and a 1-channel mask");
    require(agnostic_parse.size(1) == seg.size(1), "build_rejection_input: segmentation channel counts differ");
    return torch::cat({seg, pose, agnostic_parse, clothes, clothes_mask}, 1);
}

std::vector<double> d_scalar(const std::vector<torch::Tensor>& score_maps, double epsilon) {
    require(!score_maps.empty(), "d_scalar: no score maps");
    const int64_t batch = score_maps.front().size(0);
    std::vector<double> out(static_cast<std::size_t>(batch), 0.0);
    for (const auto& map : score_maps) {
        require(map.size(0) == batch, "d_scalar: batch size mismatch between scales");
        auto means = map.detach().to(torch::kFloat64).reshape({batch, -1}).mean(1);
        auto acc = means.accessor<double, 1>();
        for (int64_t b = 0; b < batch; ++b) out[static_cast<std::size_t>(b)] += acc[b];
    }
    for (auto& d : out) d = std::clamp(d / static_cast<double>(score_maps.size()), epsilon, 1 - epsilon);
    return out;
}

RejectionCalibration estimate_L(const std::vector<double>& scores, double threshold, double epsilon) {
    if (scores.empty()) throw CalibrationError("calibration set is empty");
    RejectionCalibration cal;
    cal.scores = scores;
    cal.threshold = threshold;
    cal.epsilon = epsilon;
    cal.L = 0;
    for (double d : scores) {
        const double c = std::clamp(d, epsilon, 1 - epsilon);
        cal.L = std::max(cal.L, c / (1 - c));
    }
    cal.validate();
    return cal;
}

double p_accept(double d, const RejectionCalibration& cal) {
    const double c = std::clamp(d, cal.epsilon, 1 - cal.epsilon);
    // Same ratio as estimate_L, so the sample that set L gets exactly 1.
    const double ratio = c / (1 - c);
    return ratio >= cal.L ? 1.0 : ratio / cal.L;
}

GateDecision gate(double d, const RejectionCalibration& cal) {
    const double p = p_accept(d, cal);
    return {p >= cal.threshold, p};
}

std::vector<SweepRow> threshold_sweep(const RejectionCalibration& cal, const std::vector<double>& thresholds) {
    std::vector<SweepRow> rows;
    for (double t : thresholds) {
        std::size_t accepted = 0;
        for (double d : cal.scores) accepted += p_accept(d, cal) >= t;
        rows.push_back({t, cal.scores.empty() ? 0.0 : static_cast<double>(accepted) / cal.scores.size()});
    }
    return rows;
}

std::vector<int> score_histogram(const std::vector<double>& scores, int bins) {
    require(bins > 0, "score_histogram: bins must be positive");
    std::vector<int> hist(static_cast<std::size_t>(bins), 0);
    for (double d : scores) {
        const int b = std::clamp(static_cast<int>(d * bins), 0, bins - 1);
        ++hist[static_cast<std::size_t>(b)];
    }
    return hist;
}

void save_calibration(const std::filesystem::path& path, const RejectionCalibration& cal) {
    cal.validate();
    nlohmann::json j;
    j["version"] = kCalibrationFormatVersion;
    j["L"] = cal.L;
    j["threshold"] = cal.threshold;
    j["epsilon"] = cal.epsilon;
    j["scores"] = cal.scores;
    j["histogram"] = score_histogram(cal.scores);
    std::ofstream out(path);
    if (!out) throw CalibrationError("cannot write calibration file " + path.string());
    out << j.dump(2) << '\n';
}

RejectionCalibration load_calibration(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw CalibrationError("cannot read calibration file " + path.string());
    RejectionCalibration cal;
    try {
        const auto j = nlohmann::json::parse(in);
        const int version = j.at("version").get<int>();
        if (version != kCalibrationFormatVersion) {
            throw CalibrationError("unsupported calibration version " + std::to_string(version));
        }
        cal.L = j.at("L").get<double>();
        cal.threshold = j.at("threshold").get<double>();
        cal.epsilon = j.at("epsilon").get<double>();
        cal.scores = j.at("scores").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
        throw CalibrationError("malformed calibration file " + path.string() + ": " + e.what());
    }
    cal.validate();
    return cal;
}

}  // namespace tryon
