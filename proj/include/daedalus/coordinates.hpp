#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace daedalus {

/// Binary coordinate file shared by projections and attribute layouts:
///
///   "DAEDALUS"            8 bytes
///   header length         uint32 little endian
///   header                UTF-8 JSON object; "rows" gives the row count
///   coordinates           rows x 2 float32 little endian, row-major
///   mask (optional)       rows x uint8, present when header "mask" is true
struct CoordinateFile {
    nlohmann::json header = nlohmann::json::object();
    std::vector<float> coords;  // x0, y0, x1, y1, ...
    std::optional<std::vector<std::uint8_t>> mask;

    std::size_t rows() const { return coords.size() / 2; }
};

std::string encode_coordinates(const CoordinateFile& file);
/// Throws Error(parse) on a malformed buffer.
CoordinateFile decode_coordinates(std::string_view bytes);

void write_coordinates(const CoordinateFile& file, const std::filesystem::path& path);
CoordinateFile read_coordinates(const std::filesystem::path& path);

/// Whole-file helpers; throw Error(io).
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace daedalus
