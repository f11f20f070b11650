#include "daedalus/image.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>

#include "daedalus/error.hpp"

namespace daedalus {

RgbaImage::RgbaImage(int w, int h, std::uint32_t rgba) : width(w), height(h) {
    pixels.resize(static_cast<std::size_t>(w) * h * 4);
    const std::array<std::uint8_t, 4> px{static_cast<std::uint8_t>(rgba >> 24), static_cast<std::uint8_t>(rgba >> 16),
                                         static_cast<std::uint8_t>(rgba >> 8), static_cast<std::uint8_t>(rgba)};
    for (std::size_t i = 0; i < pixels.size(); i += 4) std::copy(px.begin(), px.end(), pixels.begin() + i);
}

RgbaImage decode_png(std::span<const std::uint8_t> bytes) {
    png_image img{};
    img.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size())) {
        throw Error(ErrorCode::encoding, std::string("cannot decode PNG: ") + img.message);
    }
    img.format = PNG_FORMAT_RGBA;
    RgbaImage out;
    out.width = static_cast<int>(img.width);
    out.height = static_cast<int>(img.height);
    out.pixels.resize(PNG_IMAGE_SIZE(img));
    if (!png_image_finish_read(&img, nullptr, out.pixels.data(), 0, nullptr)) {
        png_image_free(&img);
        throw Error(ErrorCode::encoding, std::string("cannot decode PNG: ") + img.message);
    }
    return out;
}

std::vector<std::uint8_t> encode_png(const RgbaImage& image) {
    if (image.empty()) throw Error(ErrorCode::encoding, "cannot encode an empty image");
    png_image img{};
    img.version = PNG_IMAGE_VERSION;
    img.width = static_cast<png_uint_32>(image.width);
    img.height = static_cast<png_uint_32>(image.height);
    img.format = PNG_FORMAT_RGBA;
    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&img, nullptr, &size, 0, image.pixels.data(), 0, nullptr)) {
        throw Error(ErrorCode::encoding, std::string("cannot encode PNG: ") + img.message);
    }
    std::vector<std::uint8_t> out(size);
    if (!png_image_write_to_memory(&img, out.data(), &size, 0, image.pixels.data(), 0, nullptr)) {
        throw Error(ErrorCode::encoding, std::string("cannot encode PNG: ") + img.message);
    }
    out.resize(size);
    return out;
}

RgbaImage read_png(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::io, "cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_png(bytes);
}

void write_png(const std::filesystem::path& path, const RgbaImage& image) {
    const auto bytes = encode_png(image);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::pair<int, int> thumbnail_size(int width, int height, int max_edge) {
    const int longest = std::max(width, height);
    if (longest <= max_edge) return {width, height};
    const double scale = static_cast<double>(max_edge) / longest;
    const int w = std::clamp(static_cast<int>(std::lround(width * scale)), 1, max_edge);
    const int h = std::clamp(static_cast<int>(std::lround(height * scale)), 1, max_edge);
    return {w, h};
}

RgbaImage resize_area(const RgbaImage& source, int width, int height) {
    if (width == source.width && height == source.height) return source;
    RgbaImage out(width, height);
    const double sx = static_cast<double>(source.width) / width;
    const double sy = static_cast<double>(source.height) / height;
    for (int y = 0; y < height; ++y) {
        const double y0 = y * sy, y1 = (y + 1) * sy;
        for (int x = 0; x < width; ++x) {
            const double x0 = x * sx, x1 = (x + 1) * sx;
            std::array<double, 4> acc{};
            double total = 0.0;
            for (int iy = static_cast<int>(y0); iy < std::min(source.height, static_cast<int>(std::ceil(y1))); ++iy) {
                const double wy = std::min<double>(iy + 1, y1) - std::max<double>(iy, y0);
                if (wy <= 0) continue;
                for (int ix = static_cast<int>(x0); ix < std::min(source.width, static_cast<int>(std::ceil(x1))); ++ix) {
                    const double wx = std::min<double>(ix + 1, x1) - std::max<double>(ix, x0);
                    if (wx <= 0) continue;
                    const double w = wx * wy;
                    const auto* p = source.at(ix, iy);
                    for (int c = 0; c < 4; ++c) acc[c] += w * p[c];
                    total += w;
                }
            }
            auto* q = out.at(x, y);
            for (int c = 0; c < 4; ++c) {
                q[c] = static_cast<std::uint8_t>(std::clamp(std::lround(acc[c] / total), 0L, 255L));
            }
        }
    }
    return out;
}

RgbaImage make_background_transparent(const RgbaImage& image, int tolerance) {
    RgbaImage out = image;
    if (image.empty()) return out;
    // Dominant border colour, by exact RGB vote.
    std::map<std::uint32_t, int> votes;
    auto vote = [&](int x, int y) {
        const auto* p = image.at(x, y);
        ++votes[(std::uint32_t{p[0]} << 16) | (std::uint32_t{p[1]} << 8) | p[2]];
    };
    for (int x = 0; x < image.width; ++x) {
        vote(x, 0);
        vote(x, image.height - 1);
    }
    for (int y = 0; y < image.height; ++y) {
        vote(0, y);
        vote(image.width - 1, y);
    }
    const auto bg = std::max_element(votes.begin(), votes.end(), [](const auto& a, const auto& b) {
                        return a.second < b.second;
                    })->first;
    const int br = static_cast<int>((bg >> 16) & 0xFF), bgc = static_cast<int>((bg >> 8) & 0xFF),
              bb = static_cast<int>(bg & 0xFF);
    for (int y = 0; y < out.height; ++y) {
        for (int x = 0; x < out.width; ++x) {
            auto* p = out.at(x, y);
            const bool background = std::abs(p[0] - br) <= tolerance && std::abs(p[1] - bgc) <= tolerance &&
                                    std::abs(p[2] - bb) <= tolerance;
            p[3] = background ? 0 : 255;
        }
    }
    return out;
}

RgbaImage placeholder_image(int edge) {
    RgbaImage out(edge, edge);
    const int cell = std::max(1, edge / 8);
    for (int y = 0; y < edge; ++y) {
        for (int x = 0; x < edge; ++x) {
            const std::uint8_t v = ((x / cell + y / cell) % 2) ? 0xB0 : 0x90;
            auto* p = out.at(x, y);
            p[0] = p[1] = p[2] = v;
            p[3] = 0xFF;
        }
    }
    return out;
}

}  // namespace daedalus
