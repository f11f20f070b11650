#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "daedalus/image.hpp"
#include "daedalus/image_store.hpp"
#include "daedalus/model.hpp"

namespace daedalus {

struct SynthConfig {
    std::size_t particle_count = 3000;
    std::size_t class_count = 3;
    std::size_t lot_count = 70;
    std::size_t supplier_count = 8;
    std::pair<int, int> image_size_range{10, 1000};
    std::uint64_t seed = 7;
    int thumb_edge = kDefaultThumbEdge;
    /// Lot index (0-based) -> exact particle count for that lot.
    std::map<std::size_t, std::size_t> pinned_lot_sizes;

    /// Throws Error(validation) naming every broken field.
    void validate() const;
};

/// 37,857 particles over 70 lots and 8 suppliers; Lot 027 holds 669 particles.
SynthConfig reference_synth_config();

/// Everything needed to redraw one particle's image deterministically.
struct ParticleSketch {
    std::size_t class_index = 0;
    int width = 0;
    int height = 0;
    double major_px = 0;  // semi-axis lengths in pixels
    double minor_px = 0;
    double angle = 0;
    double roughness = 0;
    std::uint64_t seed = 0;
};

struct SynthResult {
    Dataset dataset;
    ImageStore images;
    std::vector<std::string> class_names;
    /// Ground-truth class per dataset row. Never part of the Dataset.
    std::vector<std::string> truth;
    std::vector<ParticleSketch> sketches;
};

/// Schema used by the generator: Lot Number / Production Date (ordinal),
/// Supplier (categorical), 3 shape and 6 size numerics.
AttributeSchema synthetic_schema(std::size_t lot_count, std::size_t supplier_count);

/// Background colour of every synthetic image (RGB).
inline constexpr std::uint32_t kSynthBackground = 0xE8E4DCu;

std::vector<std::string> synthetic_class_names(std::size_t class_count);

/// Pure function of `config`.
SynthResult generate_synthetic(const SynthConfig& config);

RgbaImage render_particle(const ParticleSketch& sketch);

/// Writes manifest, CSV, original images, thumbnails and `truth.csv`.
void write_synthetic(const SynthResult& result, const std::filesystem::path& dir);

/// Reads `truth.csv` (id,class); classes in file order.
std::vector<std::string> read_truth(const std::filesystem::path& path);

}  // namespace daedalus
