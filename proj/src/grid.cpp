#include "tryon/grid.hpp"

#include "tryon/fields.hpp"
#include "tryon/image_io.hpp"

namespace tryon {

namespace F = torch::nn::functional;

torch::Tensor colorize_seg(const torch::Tensor& seg, const LabelPalette& palette) {
    require_rank(seg, 3, "colorize_seg");
    require(seg.size(0) == palette.num_channels(), "colorize_seg: channel count differs from the palette");
    auto lut = torch::empty({palette.num_channels(), 3}, torch::kFloat32);
    for (int id = 0; id < palette.num_channels(); ++id) {
        const auto c = palette.color_of(id);
        for (int k = 0; k < 3; ++k) lut[id][k] = c[static_cast<std::size_t>(k)] / 127.5f - 1.0f;
    }
    const auto labels = onehot_to_labels(seg.unsqueeze(0).detach().to(torch::kFloat32)).squeeze(0);
    return lut.index_select(0, labels.flatten()).reshape({seg.size(1), seg.size(2), 3}).permute({2, 0, 1});
}

namespace {

torch::Tensor fit(const torch::Tensor& image, Resolution to, bool nearest) {
    auto x = image.detach().to(torch::kFloat32).unsqueeze(0);
    if (spatial_size(x) == to) return x.squeeze(0);
    if (nearest) {
        x = F::interpolate(x, F::InterpolateFuncOptions()
                                  .size(std::vector<int64_t>{to.height, to.width})
                                  .mode(torch::kNearest));
    } else {
        x = resize_bilinear(x, to);
    }
    return x.squeeze(0).clamp(-1, 1);
}

}  // namespace

torch::Tensor render_grid(const std::vector<GridRow>& rows, const LabelPalette& palette) {
    require(!rows.empty(), "emit_grid: no rows");
    const auto res = spatial_size(rows.front().person.unsqueeze(0));
    std::vector<torch::Tensor> lines;
    for (const auto& r : rows) {
        require(r.person.defined() && r.clothes.defined() && r.seg.defined() && r.warped_clothes.defined(),
                "emit_grid: row is missing a panel");
        auto output = r.output.defined() ? fit(r.output, res, false)
                                         : torch::full({3, res.height, res.width}, -1.0f);
        lines.push_back(torch::cat({fit(r.person, res, false), fit(r.clothes, res, false),
                                    fit(colorize_seg(r.seg, palette), res, true), fit(r.warped_clothes, res, false),
                                    output},
                                   2));
    }
    return torch::cat(lines, 1);
}

void emit_grid(const std::vector<GridRow>& rows, const LabelPalette& palette, const std::filesystem::path& path) {
    write_png(path, image_to_raster(render_grid(rows, palette)));
}

}  // namespace tryon
