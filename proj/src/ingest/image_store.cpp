#include "daedalus/image_store.hpp"

#include <algorithm>
#include <fstream>
#include <future>
#include <thread>

#include "json.hpp"

#include "daedalus/error.hpp"

namespace daedalus {
namespace fs = std::filesystem;

const ImageStore::Entry& ImageStore::at(const std::string& id) const {
    auto it = entries_.find(id);
    if (it == entries_.end()) throw Error(ErrorCode::not_found, "no image for particle '" + id + "'");
    return it->second;
}

ImageStore::Entry ImageStore::make_entry(const RgbaImage& original, std::string original_path, int thumb_edge) {
    const auto [w, h] = thumbnail_size(original.width, original.height, thumb_edge);
    RgbaImage thumb = resize_area(original, w, h);
    for (std::size_t i = 3; i < thumb.pixels.size(); i += 4) thumb.pixels[i] = 0xFF;
    Entry e;
    e.original_path = std::move(original_path);
    e.transparent = encode_png(make_background_transparent(thumb));
    e.thumbnail = encode_png(thumb);
    return e;
}

namespace {

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::io, "cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

void ImageStore::save(const Dataset& dataset, const fs::path& dir) const {
    const fs::path thumbs = dir / "thumbs";
    fs::create_directories(thumbs);
    nlohmann::json index{{"edge", thumb_edge_}, {"warnings", warnings_}, {"entries", nlohmann::json::array()}};
    for (std::size_t row = 0; row < dataset.size(); ++row) {
        const auto& id = dataset.particle(row).id;
        const auto& e = at(id);
        write_bytes(thumbs / (std::to_string(row) + ".png"), e.thumbnail);
        write_bytes(thumbs / (std::to_string(row) + ".t.png"), e.transparent);
        index["entries"].push_back({{"id", id}, {"original", e.original_path}, {"placeholder", e.placeholder}});
    }
    std::ofstream out(thumbs / "index.json", std::ios::binary);
    out << index.dump() << '\n';
}

ImageStore ImageStore::load(const Dataset& dataset, const fs::path& dir) {
    const fs::path thumbs = dir / "thumbs";
    std::ifstream in(thumbs / "index.json", std::ios::binary);
    if (!in) throw Error(ErrorCode::io, "no thumbnail cache in " + dir.string());
    nlohmann::json index;
    try {
        index = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::parse, (thumbs / "index.json").string() + ": " + e.what());
    }
    ImageStore store(index.value("edge", kDefaultThumbEdge));
    for (const auto& w : index.value("warnings", std::vector<std::string>{})) store.add_warning(w);
    const auto& entries = index.at("entries");
    if (entries.size() != dataset.size()) throw Error(ErrorCode::validation, "thumbnail cache does not match dataset");
    for (std::size_t row = 0; row < dataset.size(); ++row) {
        const auto& item = entries[row];
        if (item.at("id").get<std::string>() != dataset.particle(row).id) {
            throw Error(ErrorCode::validation, "thumbnail cache row " + std::to_string(row) + " names another particle");
        }
        Entry e;
        e.original_path = item.value("original", "");
        e.placeholder = item.value("placeholder", false);
        e.thumbnail = read_bytes(thumbs / (std::to_string(row) + ".png"));
        e.transparent = read_bytes(thumbs / (std::to_string(row) + ".t.png"));
        store.insert(dataset.particle(row).id, std::move(e));
    }
    return store;
}

ImageStore load_images(const Dataset& dataset, const fs::path& image_dir, int thumb_edge, unsigned workers) {
    std::error_code ec;
    fs::directory_iterator probe(image_dir, ec);
    if (ec) throw Error(ErrorCode::io, "cannot read image directory " + image_dir.string() + ": " + ec.message());

    struct Outcome {
        ImageStore::Entry entry;
        std::string warning;
    };
    const std::size_t n = dataset.size();
    std::vector<Outcome> outcomes(n);

    auto work = [&](std::size_t begin, std::size_t end) {
        for (std::size_t row = begin; row < end; ++row) {
            const auto& p = dataset.particle(row);
            const fs::path path = image_dir / p.image_ref;
            try {
                outcomes[row].entry = ImageStore::make_entry(read_png(path), path.string(), thumb_edge);
            } catch (const Error& e) {
                outcomes[row].entry = ImageStore::make_entry(placeholder_image(thumb_edge), path.string(), thumb_edge);
                outcomes[row].entry.placeholder = true;
                outcomes[row].warning = "particle '" + p.id + "': " + e.what();
            }
        }
    };

    if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
    workers = static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(n, 1)));
    std::vector<std::future<void>> tasks;
    const std::size_t chunk = (n + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
        const std::size_t begin = w * chunk, end = std::min(n, begin + chunk);
        if (begin >= end) break;
        tasks.push_back(std::async(std::launch::async, work, begin, end));
    }
    for (auto& t : tasks) t.get();

    ImageStore store(thumb_edge);
    for (std::size_t row = 0; row < n; ++row) {
        if (!outcomes[row].warning.empty()) store.add_warning(std::move(outcomes[row].warning));
        store.insert(dataset.particle(row).id, std::move(outcomes[row].entry));
    }
    return store;
}

}  // namespace daedalus
