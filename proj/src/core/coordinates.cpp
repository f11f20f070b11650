#include "daedalus/coordinates.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "daedalus/error.hpp"

namespace daedalus {
namespace {

constexpr std::string_view kMagic = "DAEDALUS";

static_assert(std::endian::native == std::endian::little, "coordinate files assume a little-endian host");

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(std::string_view in, std::size_t at) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
    return v;
}

}  // namespace

std::string encode_coordinates(const CoordinateFile& file) {
    if (file.coords.size() % 2 != 0) throw Error(ErrorCode::invalid_argument, "coordinate count must be even");
    if (file.mask && file.mask->size() != file.rows()) {
        throw Error(ErrorCode::invalid_argument, "mask length differs from row count");
    }
    auto header = file.header;
    header["rows"] = file.rows();
    header["mask"] = file.mask.has_value();
    const std::string text = header.dump();

    std::string out;
    out.reserve(kMagic.size() + 4 + text.size() + file.coords.size() * 4 + (file.mask ? file.mask->size() : 0));
    out.append(kMagic);
    put_u32(out, static_cast<std::uint32_t>(text.size()));
    out.append(text);
    const auto at = out.size();
    out.resize(at + file.coords.size() * sizeof(float));
    std::memcpy(out.data() + at, file.coords.data(), file.coords.size() * sizeof(float));
    if (file.mask) out.append(reinterpret_cast<const char*>(file.mask->data()), file.mask->size());
    return out;
}

CoordinateFile decode_coordinates(std::string_view bytes) {
    if (bytes.size() < kMagic.size() + 4 || bytes.substr(0, kMagic.size()) != kMagic) {
        throw Error(ErrorCode::parse, "not a coordinate file");
    }
    const std::size_t header_len = get_u32(bytes, kMagic.size());
    std::size_t at = kMagic.size() + 4;
    if (bytes.size() < at + header_len) throw Error(ErrorCode::parse, "truncated coordinate header");
    CoordinateFile file;
    try {
        file.header = nlohmann::json::parse(bytes.substr(at, header_len));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::parse, std::string("coordinate header: ") + e.what());
    }
    at += header_len;
    if (!file.header.is_object() || !file.header.contains("rows") || !file.header["rows"].is_number_unsigned()) {
        throw Error(ErrorCode::parse, "coordinate header lacks \"rows\"");
    }
    const auto rows = file.header["rows"].get<std::size_t>();
    const bool has_mask = file.header.value("mask", false);
    const std::size_t expected = rows * 2 * sizeof(float) + (has_mask ? rows : 0);
    if (bytes.size() - at != expected) {
        throw Error(ErrorCode::parse, "coordinate block holds " + std::to_string(bytes.size() - at) + " bytes, expected " +
                                          std::to_string(expected));
    }
    file.coords.resize(rows * 2);
    std::memcpy(file.coords.data(), bytes.data() + at, rows * 2 * sizeof(float));
    at += rows * 2 * sizeof(float);
    if (has_mask) file.mask.emplace(bytes.begin() + static_cast<std::ptrdiff_t>(at), bytes.end());
    return file;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::io, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return std::move(ss).str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::io, "write failed for " + path.string());
}

void write_coordinates(const CoordinateFile& file, const std::filesystem::path& path) {
    write_file(path, encode_coordinates(file));
}

CoordinateFile read_coordinates(const std::filesystem::path& path) { return decode_coordinates(read_file(path)); }

}  // namespace daedalus
