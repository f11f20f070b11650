#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "daedalus/image.hpp"
#include "daedalus/model.hpp"

namespace daedalus {

inline constexpr int kDefaultThumbEdge = 64;

/// Precomputed thumbnails per particle: an opaque RGBA PNG and its
/// background-transparent variant. Immutable once built.
class ImageStore {
public:
    struct Entry {
        std::string original_path;
        std::vector<std::uint8_t> thumbnail;    // PNG, alpha 255 everywhere
        std::vector<std::uint8_t> transparent;  // PNG, background alpha 0
        bool placeholder = false;
    };

    ImageStore() = default;
    explicit ImageStore(int thumb_edge) : thumb_edge_(thumb_edge) {}

    int thumb_edge() const { return thumb_edge_; }
    std::size_t size() const { return entries_.size(); }
    bool contains(const std::string& id) const { return entries_.count(id) != 0; }
    /// Throws Error(not_found).
    const Entry& at(const std::string& id) const;
    const std::vector<std::string>& warnings() const { return warnings_; }

    void insert(std::string id, Entry entry) { entries_.insert_or_assign(std::move(id), std::move(entry)); }
    void add_warning(std::string message) { warnings_.push_back(std::move(message)); }

    /// Thumbnail pair for an in-memory image.
    static Entry make_entry(const RgbaImage& original, std::string original_path, int thumb_edge);

    /// Persists thumbnails under `<dir>/thumbs`, named by dataset row.
    void save(const Dataset& dataset, const std::filesystem::path& dir) const;
    /// Reads what `save` wrote. Throws Error(io) when the cache is absent.
    static ImageStore load(const Dataset& dataset, const std::filesystem::path& dir);

private:
    int thumb_edge_ = kDefaultThumbEdge;
    std::unordered_map<std::string, Entry> entries_;
    std::vector<std::string> warnings_;
};

/// Builds thumbnails for every particle from PNGs under `image_dir`. Missing or
/// undecodable files get a placeholder and a warning; only an unreadable
/// `image_dir` is an error.
ImageStore load_images(const Dataset& dataset, const std::filesystem::path& image_dir,
                       int thumb_edge = kDefaultThumbEdge, unsigned workers = 0);

}  // namespace daedalus
