#include "tryon/warp.hpp"

#include <cmath>

#include "tryon/fields.hpp"

namespace tryon {
namespace {

using torch::autograd::AutogradContext;
using torch::autograd::tensor_list;

/// Corner weights and bounds flags of one bilinear sample.
template <typename T>
struct Tap {
    int64_t x0, y0;
    T wx, wy;  // fractional offsets of the sample from (x0, y0)
    bool in00, in01, in10, in11;

    Tap(T sx, T sy, int64_t h, int64_t w) {
        if (!std::isfinite(sx) || !std::isfinite(sy) || std::abs(sx) > T(1e9) || std::abs(sy) > T(1e9)) {
            sx = -2;  // lands fully outside the grid
            sy = -2;
        }
        const T fx = std::floor(sx), fy = std::floor(sy);
        x0 = static_cast<int64_t>(fx);
        y0 = static_cast<int64_t>(fy);
        wx = sx - fx;
        wy = sy - fy;
        const bool x0in = x0 >= 0 && x0 < w, x1in = x0 + 1 >= 0 && x0 + 1 < w;
        const bool y0in = y0 >= 0 && y0 < h, y1in = y0 + 1 >= 0 && y0 + 1 < h;
        in00 = y0in && x0in;
        in01 = y0in && x1in;
        in10 = y1in && x0in;
        in11 = y1in && x1in;
    }
};

template <typename T>
void warp_forward_kernel(const T* x, const T* flow, T* out, int64_t batch, int64_t channels, int64_t h, int64_t w) {
    const int64_t plane = h * w;
    for (int64_t b = 0; b < batch; ++b) {
        const T* fx = flow + b * 2 * plane;
        const T* fy = fx + plane;
        const T* xb = x + b * channels * plane;
        T* ob = out + b * channels * plane;
        for (int64_t i = 0; i < h; ++i) {
            for (int64_t j = 0; j < w; ++j) {
                const int64_t p = i * w + j;
                const Tap<T> t(static_cast<T>(j) + fx[p], static_cast<T>(i) + fy[p], h, w);
                const T w00 = (1 - t.wx) * (1 - t.wy), w01 = t.wx * (1 - t.wy);
                const T w10 = (1 - t.wx) * t.wy, w11 = t.wx * t.wy;
                const int64_t o = t.y0 * w + t.x0;
                for (int64_t c = 0; c < channels; ++c) {
                    const T* xc = xb + c * plane;
                    T v = 0;
                    if (t.in00) v += w00 * xc[o];
                    if (t.in01) v += w01 * xc[o + 1];
                    if (t.in10) v += w10 * xc[o + w];
                    if (t.in11) v += w11 * xc[o + w + 1];
                    ob[c * plane + p] = v;
                }
            }
        }
    }
}

template <typename T>
void warp_backward_kernel(const T* x, const T* flow, const T* grad_out, T* grad_x, T* grad_flow, int64_t batch,
                          int64_t channels, int64_t h, int64_t w) {
    const int64_t plane = h * w;
    for (int64_t b = 0; b < batch; ++b) {
        const T* fx = flow + b * 2 * plane;
        const T* fy = fx + plane;
        const T* xb = x + b * channels * plane;
        const T* gb = grad_out + b * channels * plane;
        T* gxb = grad_x ? grad_x + b * channels * plane : nullptr;
        T* gfx = grad_flow ? grad_flow + b * 2 * plane : nullptr;
        T* gfy = gfx ? gfx + plane : nullptr;
        for (int64_t i = 0; i < h; ++i) {
            for (int64_t j = 0; j < w; ++j) {
                const int64_t p = i * w + j;
                const Tap<T> t(static_cast<T>(j) + fx[p], static_cast<T>(i) + fy[p], h, w);
                const T w00 = (1 - t.wx) * (1 - t.wy), w01 = t.wx * (1 - t.wy);
                const T w10 = (1 - t.wx) * t.wy, w11 = t.wx * t.wy;
                const int64_t o = t.y0 * w + t.x0;
                T dsx = 0, dsy = 0;
                for (int64_t c = 0; c < channels; ++c) {
                    const T g = gb[c * plane + p];
                    if (g == 0) continue;
                    const T* xc = xb + c * plane;
                    const T v00 = t.in00 ? xc[o] : T(0);
                    const T v01 = t.in01 ? xc[o + 1] : T(0);
                    const T v10 = t.in10 ? xc[o + w] : T(0);
                    const T v11 = t.in11 ? xc[o + w + 1] : T(0);
                    if (gxb) {
                        T* gc = gxb + c * plane;
                        if (t.in00) gc[o] += w00 * g;
                        if (t.in01) gc[o + 1] += w01 * g;
                        if (t.in10) gc[o + w] += w10 * g;
                        if (t.in11) gc[o + w + 1] += w11 * g;
                    }
                    dsx += g * ((1 - t.wy) * (v01 - v00) + t.wy * (v11 - v10));
                    dsy += g * ((1 - t.wx) * (v10 - v00) + t.wx * (v11 - v01));
                }
                if (gfx) {
                    gfx[p] = dsx;
                    gfy[p] = dsy;
                }
            }
        }
    }
}

class WarpFunction : public torch::autograd::Function<WarpFunction> {
public:
    static torch::Tensor forward(AutogradContext* ctx, const torch::Tensor& x, const torch::Tensor& flow) {
        auto xc = x.contiguous();
        auto fc = flow.contiguous();
        auto out = torch::empty_like(xc);
        AT_DISPATCH_FLOATING_TYPES(xc.scalar_type(), "warp_forward", [&] {
            warp_forward_kernel<scalar_t>(xc.data_ptr<scalar_t>(), fc.data_ptr<scalar_t>(), out.data_ptr<scalar_t>(),
                                          xc.size(0), xc.size(1), xc.size(2), xc.size(3));
        });
        ctx->save_for_backward({xc, fc});
        return out;
    }

    static tensor_list backward(AutogradContext* ctx, tensor_list grad_outputs) {
        const auto saved = ctx->get_saved_variables();
        const auto& x = saved[0];
        const auto& flow = saved[1];
        auto grad_out = grad_outputs[0].contiguous();
        const bool need_x = ctx->needs_input_grad(0), need_flow = ctx->needs_input_grad(1);
        torch::Tensor grad_x = need_x ? torch::zeros_like(x) : torch::Tensor();
        torch::Tensor grad_flow = need_flow ? torch::zeros_like(flow) : torch::Tensor();
        AT_DISPATCH_FLOATING_TYPES(x.scalar_type(), "warp_backward", [&] {
            warp_backward_kernel<scalar_t>(x.data_ptr<scalar_t>(), flow.data_ptr<scalar_t>(),
                                           grad_out.data_ptr<scalar_t>(),
                                           need_x ? grad_x.data_ptr<scalar_t>() : nullptr,
                                           need_flow ? grad_flow.data_ptr<scalar_t>() : nullptr, x.size(0), x.size(1),
                                           x.size(2), x.size(3));
        });
        return {grad_x, grad_flow};
    }
};

}  // namespace

torch::Tensor warp(const torch::Tensor& x, const torch::Tensor& flow) {
    require_rank(x, 4, "warp(x)");
    require_rank(flow, 4, "warp(flow)");
    require(flow.size(1) == 2, "warp: flow must have 2 channels");
    require(x.size(0) == flow.size(0), "warp: batch size mismatch");
    require_same_spatial(x, flow, "warp");
    require(x.scalar_type() == flow.scalar_type(), "warp: x and flow must share a dtype");
    require(x.is_floating_point(), "warp: floating point input required");
    return WarpFunction::apply(x, flow);
}

torch::Tensor upsample_flow(const torch::Tensor& flow, int factor) {
    require_rank(flow, 4, "upsample_flow");
    require(factor >= 1, "upsample_flow: factor must be >= 1");
    if (factor == 1) return flow;
    const Resolution to{static_cast<int>(flow.size(2)) * factor, static_cast<int>(flow.size(3)) * factor};
    return resize_bilinear(flow, to) * static_cast<double>(factor);
}

torch::Tensor loss_tv(const torch::Tensor& flow, Reduction reduction) {
    require_rank(flow, 4, "loss_tv");
    auto dx = (flow.narrow(3, 1, flow.size(3) - 1) - flow.narrow(3, 0, flow.size(3) - 1)).abs();
    auto dy = (flow.narrow(2, 1, flow.size(2) - 1) - flow.narrow(2, 0, flow.size(2) - 1)).abs();
    if (reduction == Reduction::Sum) return dx.sum() + dy.sum();
    auto mean_or_zero = [&](const torch::Tensor& d) { return d.numel() ? d.mean() : flow.sum() * 0; };
    return mean_or_zero(dx) + mean_or_zero(dy);
}

}  // namespace tryon
