#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

#include <torch/torch.h>

namespace tryon {

class ImageIOError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Interleaved 8-bit raster. `channels` is 1 (gray or palette index) or 3 (RGB).
struct Raster {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<std::uint8_t> pixels;
};

/// Reads PNG or JPEG. Paletted PNGs return their raw indices (channels = 1)
/// rather than expanding the palette, so label maps survive unchanged.
Raster read_image(const std::filesystem::path& path);

void write_png(const std::filesystem::path& path, const Raster& raster);
/// Writes a paletted PNG whose pixel values are `indices`.
void write_indexed_png(const std::filesystem::path& path, const Raster& indices,
                       const std::vector<std::array<std::uint8_t, 3>>& palette);

/// [3, H, W] in [-1, 1] <-> RGB raster. Gray rasters are replicated to 3 channels.
Raster image_to_raster(const torch::Tensor& image);
torch::Tensor raster_to_image(const Raster& raster);
/// [1, H, W] in [0, 1] <-> gray raster.
Raster mask_to_raster(const torch::Tensor& mask);
torch::Tensor raster_to_mask(const Raster& raster);

}  // namespace tryon
