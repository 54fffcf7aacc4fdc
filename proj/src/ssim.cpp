#include "tryon/ssim.hpp"

#include <cmath>

#include "tryon/fields.hpp"

namespace tryon {

namespace F = torch::nn::functional;

namespace {

torch::Tensor gaussian_window(const SsimOptions& o, int64_t channels) {
    auto x = torch::arange(o.window, torch::kFloat64) - (o.window - 1) / 2.0;
    auto g = torch::exp(-x.pow(2) / (2 * o.sigma * o.sigma));
    g = g / g.sum();
    auto w2 = torch::outer(g, g);
    return w2.expand({channels, 1, o.window, o.window}).contiguous();
}

}  // namespace

std::vector<double> ssim_per_sample(const torch::Tensor& a, const torch::Tensor& b, const SsimOptions& o) {
    require(a.sizes() == b.sizes(), "ssim: shape mismatch");
    auto x = a.dim() == 3 ? a.unsqueeze(0) : a;
    auto y = b.dim() == 3 ? b.unsqueeze(0) : b;
    require_rank(x, 4, "ssim");
    require(x.size(2) >= o.window && x.size(3) >= o.window, "ssim: image smaller than the window");
    x = (x.detach().to(torch::kFloat64) + 1) / 2;
    y = (y.detach().to(torch::kFloat64) + 1) / 2;

    const int64_t ch = x.size(1);
    const auto w = gaussian_window(o, ch);
    auto filt = [&](const torch::Tensor& t) { return F::conv2d(t, w, F::Conv2dFuncOptions().groups(ch)); };
    const double c1 = std::pow(o.k1, 2), c2 = std::pow(o.k2, 2);

    auto mx = filt(x), my = filt(y);
    auto sxx = filt(x * x) - mx * mx;
    auto syy = filt(y * y) - my * my;
    auto sxy = filt(x * y) - mx * my;
    auto map = ((2 * mx * my + c1) * (2 * sxy + c2)) / ((mx * mx + my * my + c1) * (sxx + syy + c2));
    auto per = map.flatten(1).mean(1).contiguous();
    return {per.data_ptr<double>(), per.data_ptr<double>() + per.numel()};
}

double ssim(const torch::Tensor& a, const torch::Tensor& b, const SsimOptions& o) {
    const auto per = ssim_per_sample(a, b, o);
    double s = 0;
    for (double v : per) s += v;
    return s / static_cast<double>(per.size());
}

}  // namespace tryon
