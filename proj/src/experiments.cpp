#include "tryon/experiments.hpp"

#include <algorithm>
#include <vector>

#include "tryon/fields.hpp"

namespace tryon {

namespace F = torch::nn::functional;

torch::Tensor erode_mask(const torch::Tensor& mask, int iterations) {
    auto m = mask.dim() == 3 ? mask.unsqueeze(0) : mask;
    require_rank(m, 4, "erode_mask");
    for (int i = 0; i < iterations; ++i) {
        // min-pool == -maxpool(-x); out-of-image neighbours count as background.
        m = -F::max_pool2d(-F::pad(m, F::PadFuncOptions({1, 1, 1, 1}).value(0)), F::MaxPool2dFuncOptions(3).stride(1));
    }
    return mask.dim() == 3 ? m.squeeze(0) : m;
}

torch::Tensor shift_mask(const torch::Tensor& mask, int dy, int dx) {
    const int64_t h = mask.size(-2), w = mask.size(-1);
    auto out = torch::zeros_like(mask);
    if (std::abs(dy) >= h || std::abs(dx) >= w) return out;
    const int64_t sy0 = std::max<int64_t>(0, -dy), dy0 = std::max<int64_t>(0, dy);
    const int64_t sx0 = std::max<int64_t>(0, -dx), dx0 = std::max<int64_t>(0, dx);
    const int64_t ny = h - std::abs(dy), nx = w - std::abs(dx);
    out.narrow(-2, dy0, ny).narrow(-1, dx0, nx).copy_(mask.narrow(-2, sy0, ny).narrow(-1, sx0, nx));
    return out;
}

MaskCorruption random_corruption(std::mt19937_64& rng, int max_erode, int max_shift) {
    std::uniform_int_distribution<int> erode(1, std::max(1, max_erode));
    std::uniform_int_distribution<int> mag(1, std::max(1, max_shift));
    std::uniform_int_distribution<int> dir(0, 7);
    static constexpr int kDirs[8][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}, {1, 1}, {1, -1}, {-1, 1}, {-1, -1}};
    MaskCorruption c;
    c.erode = erode(rng);
    const int m = mag(rng);
    const auto& d = kDirs[dir(rng)];
    c.dy = d[0] * m;
    c.dx = d[1] * m;
    return c;
}

SampleRecord corrupt_clothes_mask(const SampleRecord& record, const MaskCorruption& c) {
    SampleRecord out = record;
    out.clothes_mask = shift_mask(erode_mask(record.clothes_mask, c.erode), c.dy, c.dx);
    return out;
}

StripeStat stripe_period_near_occluder(const torch::Tensor& warped_clothes, const torch::Tensor& parse,
                                       const LabelPalette& palette, int occluding_arm, int min_run) {
    require_rank(warped_clothes, 3, "stripe_period_near_occluder");
    require_same_spatial(warped_clothes, parse, "stripe_period_near_occluder");
    const auto labels = onehot_to_labels(parse.unsqueeze(0).to(torch::kFloat32)).squeeze(0).contiguous();
    const auto lum = (0.299 * warped_clothes[0] + 0.587 * warped_clothes[1] + 0.114 * warped_clothes[2])
                         .detach()
                         .to(torch::kFloat64)
                         .contiguous();
    const auto la = labels.accessor<int64_t, 2>();
    const auto ya = lum.accessor<double, 2>();
    const int64_t h = labels.size(0), w = labels.size(1);
    const int cloth = palette.clothing_channel();

    double weighted = 0;
    int weight = 0;
    StripeStat stat;
    for (int64_t y = 0; y < h; ++y) {
        // Clothing runs on this row that share an endpoint neighbour with the arm.
        for (int64_t x = 0; x < w;) {
            if (la[y][x] != cloth) {
                ++x;
                continue;
            }
            int64_t end = x;
            while (end < w && la[y][end] == cloth) ++end;
            const bool touches = (x > 0 && la[y][x - 1] == occluding_arm) || (end < w && la[y][end] == occluding_arm);
            if (touches && end - x >= min_run) {
                double mean = 0;
                for (int64_t i = x; i < end; ++i) mean += ya[y][i];
                mean /= static_cast<double>(end - x);
                std::vector<double> crossings;
                int prev = 0;
                for (int64_t i = x; i < end; ++i) {
                    const double v = ya[y][i] - mean;
                    const int sign = v > 0 ? 1 : (v < 0 ? -1 : 0);
                    if (sign != 0 && prev != 0 && sign != prev) {
                        // Sub-pixel crossing between i-1 and i.
                        const double a = ya[y][i - 1] - mean;
                        crossings.push_back(static_cast<double>(i - 1) + a / (a - v));
                    }
                    if (sign != 0) prev = sign;
                }
                if (crossings.size() >= 2) {
                    const auto n = static_cast<int>(crossings.size()) - 1;
                    weighted += 2 * (crossings.back() - crossings.front());
                    weight += n;
                    ++stat.rows;
                }
            }
            x = end;
        }
    }
    if (weight > 0) stat.period = weighted / weight;
    return stat;
}

}  // namespace tryon
