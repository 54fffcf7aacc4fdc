#include "tryon/image_io.hpp"

#include <csetjmp>
#include <cstdio>
#include <memory>

#include <jpeglib.h>
#include <png.h>

namespace tryon {
namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
    FilePtr f(std::fopen(path.c_str(), mode));
    if (!f) throw ImageIOError("cannot open " + path.string());
    return f;
}

bool has_png_signature(std::FILE* f) {
    png_byte header[8] = {};
    const auto n = std::fread(header, 1, 8, f);
    std::rewind(f);
    return n == 8 && png_sig_cmp(header, 0, 8) == 0;
}

Raster read_png(std::FILE* f, const std::filesystem::path& path) {
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw ImageIOError("libpng init failed for " + path.string());
    }
    Raster raster;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw ImageIOError("corrupt PNG " + path.string());
    }
    png_init_io(png, f);
    png_read_info(png, info);
    const int color = png_get_color_type(png, info);
    const int depth = png_get_bit_depth(png, info);

    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) {
        if (depth < 8) png_set_packing(png);
    } else {
        if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
        if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
        if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png), png_set_strip_alpha(png);
    }
    png_read_update_info(png, info);

    raster.width = static_cast<int>(png_get_image_width(png, info));
    raster.height = static_cast<int>(png_get_image_height(png, info));
    raster.channels = static_cast<int>(png_get_channels(png, info));
    const auto rowbytes = png_get_rowbytes(png, info);
    raster.pixels.resize(rowbytes * static_cast<std::size_t>(raster.height));
    std::vector<png_bytep> rows(static_cast<std::size_t>(raster.height));
    for (int y = 0; y < raster.height; ++y) rows[static_cast<std::size_t>(y)] = raster.pixels.data() + rowbytes * y;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    if (raster.channels != 1 && raster.channels != 3) {
        throw ImageIOError("unsupported PNG channel layout in " + path.string());
    }
    return raster;
}

struct JpegErrorManager {
    jpeg_error_mgr base;
    std::jmp_buf jump;
};

void jpeg_error_exit(j_common_ptr cinfo) {
    auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
    std::longjmp(err->jump, 1);
}

Raster read_jpeg(std::FILE* f, const std::filesystem::path& path) {
    jpeg_decompress_struct cinfo{};
    JpegErrorManager err{};
    cinfo.err = jpeg_std_error(&err.base);
    err.base.error_exit = jpeg_error_exit;
    Raster raster;
    if (setjmp(err.jump)) {
        jpeg_destroy_decompress(&cinfo);
        throw ImageIOError("corrupt JPEG " + path.string());
    }
    jpeg_create_decompress(&cinfo);
    jpeg_stdio_src(&cinfo, f);
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = cinfo.num_components == 1 ? JCS_GRAYSCALE : JCS_RGB;
    jpeg_start_decompress(&cinfo);
    raster.width = static_cast<int>(cinfo.output_width);
    raster.height = static_cast<int>(cinfo.output_height);
    raster.channels = cinfo.output_components;
    const std::size_t stride = static_cast<std::size_t>(raster.width) * static_cast<std::size_t>(raster.channels);
    raster.pixels.resize(stride * static_cast<std::size_t>(raster.height));
    while (cinfo.output_scanline < cinfo.output_height) {
        JSAMPROW row = raster.pixels.data() + stride * cinfo.output_scanline;
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    return raster;
}

void write_png_impl(const std::filesystem::path& path, const Raster& raster, int color_type,
                    const std::vector<std::array<std::uint8_t, 3>>* palette) {
    if (raster.pixels.size() !=
        static_cast<std::size_t>(raster.width) * static_cast<std::size_t>(raster.height) * raster.channels) {
        throw ImageIOError("raster size does not match its dimensions");
    }
    auto f = open_file(path, "wb");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw ImageIOError("libpng init failed for " + path.string());
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw ImageIOError("failed writing " + path.string());
    }
    png_init_io(png, f.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(raster.width), static_cast<png_uint_32>(raster.height), 8,
                 color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    std::vector<png_color> colors;
    if (palette) {
        for (const auto& c : *palette) colors.push_back({c[0], c[1], c[2]});
        png_set_PLTE(png, info, colors.data(), static_cast<int>(colors.size()));
    }
    png_write_info(png, info);
    const std::size_t stride = static_cast<std::size_t>(raster.width) * static_cast<std::size_t>(raster.channels);
    for (int y = 0; y < raster.height; ++y) {
        png_write_row(png, const_cast<png_bytep>(raster.pixels.data() + stride * y));
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace

Raster read_image(const std::filesystem::path& path) {
    auto f = open_file(path, "rb");
    if (has_png_signature(f.get())) return read_png(f.get(), path);
    return read_jpeg(f.get(), path);
}

void write_png(const std::filesystem::path& path, const Raster& raster) {
    if (raster.channels != 1 && raster.channels != 3) throw ImageIOError("write_png: 1 or 3 channels required");
    write_png_impl(path, raster, raster.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, nullptr);
}

void write_indexed_png(const std::filesystem::path& path, const Raster& indices,
                       const std::vector<std::array<std::uint8_t, 3>>& palette) {
    if (indices.channels != 1) throw ImageIOError("write_indexed_png: single-channel index raster required");
    if (palette.empty() || palette.size() > 256) throw ImageIOError("write_indexed_png: palette needs 1..256 colours");
    write_png_impl(path, indices, PNG_COLOR_TYPE_PALETTE, &palette);
}

Raster image_to_raster(const torch::Tensor& image) {
    auto img = image.detach().to(torch::kFloat32);
    if (img.dim() != 3 || (img.size(0) != 3 && img.size(0) != 1)) throw ImageIOError("image_to_raster: [3,H,W] required");
    if (img.size(0) == 1) img = img.expand({3, -1, -1});
    auto bytes = ((img.clamp(-1, 1) + 1) * 127.5).round().to(torch::kUInt8).permute({1, 2, 0}).contiguous();
    Raster r{static_cast<int>(img.size(2)), static_cast<int>(img.size(1)), 3, {}};
    r.pixels.assign(bytes.data_ptr<std::uint8_t>(), bytes.data_ptr<std::uint8_t>() + bytes.numel());
    return r;
}

torch::Tensor raster_to_image(const Raster& raster) {
    auto t = torch::from_blob(const_cast<std::uint8_t*>(raster.pixels.data()),
                              {raster.height, raster.width, raster.channels}, torch::kUInt8)
                 .to(torch::kFloat32)
                 .permute({2, 0, 1});
    if (raster.channels == 1) t = t.expand({3, -1, -1});
    return (t / 127.5 - 1).contiguous();
}

Raster mask_to_raster(const torch::Tensor& mask) {
    auto m = mask.detach().to(torch::kFloat32);
    if (m.dim() != 3 || m.size(0) != 1) throw ImageIOError("mask_to_raster: [1,H,W] required");
    auto bytes = (m.clamp(0, 1) * 255).round().to(torch::kUInt8).contiguous();
    Raster r{static_cast<int>(m.size(2)), static_cast<int>(m.size(1)), 1, {}};
    r.pixels.assign(bytes.data_ptr<std::uint8_t>(), bytes.data_ptr<std::uint8_t>() + bytes.numel());
    return r;
}

torch::Tensor raster_to_mask(const Raster& raster) {
    auto t = torch::from_blob(const_cast<std::uint8_t*>(raster.pixels.data()),
                              {raster.height, raster.width, raster.channels}, torch::kUInt8)
                 .to(torch::kFloat32)
                 .permute({2, 0, 1});
    if (raster.channels == 3) t = t.mean(0, true);
    return (t >= 128).to(torch::kFloat32).contiguous();
}

}  // namespace tryon
