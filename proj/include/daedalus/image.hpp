#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace daedalus {

/// 8-bit RGBA raster, row-major, top row first.
struct RgbaImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;  // width * height * 4

    RgbaImage() = default;
    RgbaImage(int w, int h, std::uint32_t rgba = 0x000000FFu);

    std::uint8_t* at(int x, int y) { return &pixels[(static_cast<std::size_t>(y) * width + x) * 4]; }
    const std::uint8_t* at(int x, int y) const {
        return &pixels[(static_cast<std::size_t>(y) * width + x) * 4];
    }
    bool empty() const { return width == 0 || height == 0; }
};

/// Throws Error(encoding) on malformed input.
RgbaImage decode_png(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_png(const RgbaImage& image);

/// Throws Error(io) when the file cannot be read, Error(encoding) when it is not a PNG.
RgbaImage read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const RgbaImage& image);

/// Thumbnail dimensions with preserved aspect ratio: the longer edge becomes
/// `max_edge` when the source is larger, otherwise the source size is kept.
std::pair<int, int> thumbnail_size(int width, int height, int max_edge);

/// Box-filter (area average) downscale to the given size.
RgbaImage resize_area(const RgbaImage& source, int width, int height);

/// Alpha 0 for pixels whose colour is within `tolerance` (per channel) of the
/// border's dominant colour, 255 otherwise.
RgbaImage make_background_transparent(const RgbaImage& image, int tolerance = 24);

/// Checkered grey square used for particles whose image file is missing.
RgbaImage placeholder_image(int edge);

}  // namespace daedalus
