#include "daedalus/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include "daedalus/dataset_io.hpp"
#include "daedalus/error.hpp"
#include "daedalus/random.hpp"

namespace daedalus {
namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;

struct Rgb {
    int r, g, b;
};

// Named palette; class i uses entry i, later classes get generated hues.
struct NamedColor {
    const char* name;
    Rgb rgb;
};
constexpr NamedColor kPalette[] = {
    {"blue", {40, 90, 205}},   {"orange", {225, 125, 35}}, {"gray", {95, 95, 100}},   {"green", {45, 150, 70}},
    {"red", {190, 35, 40}},    {"yellow", {215, 190, 30}}, {"purple", {125, 60, 170}}, {"black", {25, 25, 25}},
};
constexpr std::size_t kPaletteSize = sizeof(kPalette) / sizeof(kPalette[0]);

Rgb class_color(std::size_t c) {
    if (c < kPaletteSize) return kPalette[c].rgb;
    // Golden-angle hue walk at fixed saturation/value, kept dark enough to
    // stand apart from the light background.
    const double h = std::fmod(c * 137.508, 360.0) / 60.0;
    const double v = 0.65, s = 0.8, chroma = v * s;
    const double x = chroma * (1 - std::abs(std::fmod(h, 2.0) - 1));
    double r = 0, g = 0, b = 0;
    switch (static_cast<int>(h)) {
        case 0: r = chroma, g = x; break;
        case 1: r = x, g = chroma; break;
        case 2: g = chroma, b = x; break;
        case 3: g = x, b = chroma; break;
        case 4: r = x, b = chroma; break;
        default: r = chroma, b = x;
    }
    const double m = v - chroma;
    return {static_cast<int>((r + m) * 255), static_cast<int>((g + m) * 255), static_cast<int>((b + m) * 255)};
}

// Latent shape/size profile of one class. Classes sit on a circle in the
// (log equivalent diameter, log excess elongation) plane, with convexity
// offset by a phase-shifted cosine.
struct ClassProfile {
    double log_diameter;
    double log_excess_elongation;
    double convexity;
};

constexpr double kSizeSpread = 0.55;
constexpr double kElongationSpread = 0.75;
constexpr double kSizeNoise = 0.22;
constexpr double kElongationNoise = 0.30;
constexpr double kConvexityNoise = 0.025;
constexpr double kMeasurementNoise = 0.02;

ClassProfile class_profile(std::size_t c, std::size_t class_count) {
    const double phase = 2.0 * kPi * static_cast<double>(c) / static_cast<double>(class_count);
    return {3.3 + kSizeSpread * std::cos(phase), -0.2 + kElongationSpread * std::sin(phase),
            0.90 + 0.05 * std::cos(phase + 1.0)};
}

std::string two_digits(int v) {
    char buf[8];
    std::snprintf(buf, sizeof(buf), "%02d", v);
    return buf;
}

// Civil date from days since 1970-01-01.
std::string iso_date(long days) {
    days += 719468;
    const long era = (days >= 0 ? days : days - 146096) / 146097;
    const long doe = days - era * 146097;
    const long yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const long doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const long mp = (5 * doy + 2) / 153;
    const int d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
    const int m = static_cast<int>(mp < 10 ? mp + 3 : mp - 9);
    const long y = yoe + era * 400 + (m <= 2);
    return std::to_string(y) + "-" + two_digits(m) + "-" + two_digits(d);
}

constexpr long kFirstProductionDay = 18631;  // 2021-01-04

std::string lot_name(std::size_t lot, std::size_t lot_count) {
    const int width = std::max<int>(3, static_cast<int>(std::to_string(lot_count).size()));
    std::string digits = std::to_string(lot + 1);
    return "Lot " + std::string(static_cast<std::size_t>(width) - digits.size(), '0') + digits;
}

std::string supplier_name(std::size_t s) {
    std::string out;
    std::size_t v = s;
    do {
        out.insert(out.begin(), static_cast<char>('A' + v % 26));
        v = v / 26;
    } while (v-- > 0);
    return out;
}

double ellipse_perimeter(double a, double b) {
    const double h = (a - b) * (a - b) / ((a + b) * (a + b));
    return kPi * (a + b) * (1 + 3 * h / (10 + std::sqrt(4 - 3 * h)));
}

std::string particle_id(std::size_t i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "P%06zu", i + 1);
    return buf;
}

}  // namespace

void SynthConfig::validate() const {
    std::vector<std::string> problems;
    if (particle_count == 0) problems.emplace_back("particle-count must be positive");
    if (class_count < 2) problems.emplace_back("class-count must be at least 2");
    if (class_count > particle_count) problems.emplace_back("class-count must not exceed particle-count");
    if (lot_count == 0) problems.emplace_back("lot-count must be positive");
    if (supplier_count == 0) problems.emplace_back("supplier-count must be positive");
    if (image_size_range.first < 10) problems.emplace_back("image-size-range min must be >= 10");
    if (image_size_range.second > 1000) problems.emplace_back("image-size-range max must be <= 1000");
    if (image_size_range.first > image_size_range.second) problems.emplace_back("image-size-range min exceeds max");
    if (thumb_edge < 1) problems.emplace_back("thumb-edge must be positive");
    std::size_t pinned = 0;
    for (const auto& [lot, count] : pinned_lot_sizes) {
        if (lot >= lot_count) problems.emplace_back("pinned lot index " + std::to_string(lot) + " out of range");
        pinned += count;
    }
    if (pinned > particle_count) problems.emplace_back("pinned lot sizes exceed particle-count");
    if (!problems.empty()) throw Error(ErrorCode::validation, "invalid synthetic config", std::move(problems));
}

SynthConfig reference_synth_config() {
    SynthConfig c;
    c.particle_count = 37857;
    c.class_count = 3;
    c.lot_count = 70;
    c.supplier_count = 8;
    c.seed = 7;
    c.pinned_lot_sizes = {{26, 669}};
    return c;
}

std::vector<std::string> synthetic_class_names(std::size_t class_count) {
    std::vector<std::string> names;
    for (std::size_t c = 0; c < class_count; ++c) {
        names.push_back(c < kPaletteSize ? kPalette[c].name : "class-" + std::to_string(c + 1));
    }
    return names;
}

AttributeSchema synthetic_schema(std::size_t lot_count, std::size_t supplier_count) {
    std::vector<std::string> lots, dates, suppliers;
    for (std::size_t l = 0; l < lot_count; ++l) {
        lots.push_back(lot_name(l, lot_count));
        dates.push_back(iso_date(kFirstProductionDay + static_cast<long>(l) * 5));
    }
    for (std::size_t s = 0; s < supplier_count; ++s) suppliers.push_back(supplier_name(s));

    using R = AttributeRole;
    using K = AttributeKind;
    std::vector<AttributeDescriptor> d{
        {"Lot Number", R::production_context, K::ordinal, std::nullopt, lots},
        {"Production Date", R::production_context, K::ordinal, std::nullopt, dates},
        {"Supplier", R::production_context, K::categorical, std::nullopt, suppliers},
        {"Elongation", R::shape, K::numeric, std::nullopt, std::nullopt},
        {"Circularity", R::shape, K::numeric, std::nullopt, std::nullopt},
        {"Convexity", R::shape, K::numeric, std::nullopt, std::nullopt},
        {"Area", R::size, K::numeric, "um^2", std::nullopt},
        {"Perimeter", R::size, K::numeric, "um", std::nullopt},
        {"Max Feret Diameter", R::size, K::numeric, "um", std::nullopt},
        {"Min Feret Diameter", R::size, K::numeric, "um", std::nullopt},
        {"Equivalent Diameter", R::size, K::numeric, "um", std::nullopt},
        {"Bounding Box Area", R::size, K::numeric, "um^2", std::nullopt},
    };
    return AttributeSchema::create(std::move(d), "Elongation");
}

SynthResult generate_synthetic(const SynthConfig& config) {
    config.validate();
    Rng rng(config.seed);
    const std::size_t n = config.particle_count;
    const std::size_t lots = config.lot_count;
    const std::size_t classes = config.class_count;

    // Lot -> supplier: round robin, then shuffled.
    std::vector<std::size_t> lot_supplier(lots);
    for (std::size_t l = 0; l < lots; ++l) lot_supplier[l] = l % config.supplier_count;
    for (std::size_t l = lots; l > 1; --l) std::swap(lot_supplier[l - 1], lot_supplier[rng.below(l)]);

    // Lot sizes: pinned lots first, the rest proportional to log-normal weights.
    std::vector<std::size_t> lot_size(lots, 0);
    std::size_t remaining = n;
    for (const auto& [lot, count] : config.pinned_lot_sizes) {
        lot_size[lot] = count;
        remaining -= count;
    }
    std::vector<double> weight(lots, 0.0);
    double weight_sum = 0.0;
    for (std::size_t l = 0; l < lots; ++l) {
        const double w = std::exp(rng.normal(0.0, 0.5));
        if (!config.pinned_lot_sizes.count(l)) {
            weight[l] = w;
            weight_sum += w;
        }
    }
    if (weight_sum > 0) {
        std::size_t assigned = 0;
        std::vector<std::pair<double, std::size_t>> remainders;
        for (std::size_t l = 0; l < lots; ++l) {
            if (weight[l] == 0) continue;
            const double exact = remaining * weight[l] / weight_sum;
            lot_size[l] = static_cast<std::size_t>(exact);
            assigned += lot_size[l];
            remainders.emplace_back(exact - std::floor(exact), l);
        }
        std::stable_sort(remainders.begin(), remainders.end(),
                         [](const auto& a, const auto& b) { return a.first > b.first; });
        for (std::size_t i = 0; assigned < remaining; ++i, ++assigned) ++lot_size[remainders[i % remainders.size()].second];
    } else if (remaining > 0) {
        throw Error(ErrorCode::validation, "pinned lot sizes must cover particle-count when every lot is pinned");
    }

    // Per-lot class mixture.
    std::vector<std::vector<double>> lot_mix(lots, std::vector<double>(classes));
    for (auto& mix : lot_mix) {
        double total = 0;
        for (auto& w : mix) total += (w = std::exp(rng.normal(0.0, 0.7)));
        double acc = 0;
        for (auto& w : mix) w = (acc += w / total);
    }

    const auto schema = synthetic_schema(lots, config.supplier_count);
    const auto& lot_names = *schema.at("Lot Number").categories;
    const auto& date_names = *schema.at("Production Date").categories;
    const auto& supplier_names = *schema.at("Supplier").categories;

    SynthResult result;
    result.class_names = synthetic_class_names(classes);
    std::vector<ParticleRecord> particles;
    particles.reserve(n);
    result.truth.reserve(n);
    result.sketches.reserve(n);

    std::size_t index = 0;
    for (std::size_t l = 0; l < lots; ++l) {
        for (std::size_t k = 0; k < lot_size[l]; ++k, ++index) {
            Rng prng(Rng::mix(config.seed, index));
            std::size_t c;
            if (index < classes) {
                c = index;  // every class non-empty
            } else {
                const double u = prng.uniform();
                c = 0;
                while (c + 1 < classes && u >= lot_mix[l][c]) ++c;
            }
            const auto profile = class_profile(c, classes);
            const double diameter = std::exp(prng.normal(profile.log_diameter, kSizeNoise));
            const double elongation = 1.0 + std::exp(prng.normal(profile.log_excess_elongation, kElongationNoise));
            const double convexity = std::clamp(prng.normal(profile.convexity, kConvexityNoise), 0.55, 0.995);
            const double angle = prng.uniform(0.0, kPi);

            const double area = kPi * diameter * diameter / 4.0;
            const double major = std::sqrt(area * elongation / kPi);
            const double minor = major / elongation;
            const double perimeter = ellipse_perimeter(major, minor) / convexity;
            const double circularity = std::min(1.0, 4.0 * kPi * area / (perimeter * perimeter));
            const double bw = 2.0 * std::hypot(major * std::cos(angle), minor * std::sin(angle));
            const double bh = 2.0 * std::hypot(major * std::sin(angle), minor * std::cos(angle));
            auto measured = [&](double v) { return v * (1.0 + prng.normal(0.0, kMeasurementNoise)); };

            ParticleRecord p;
            p.id = particle_id(index);
            p.image_ref = p.id + ".png";
            p.values.emplace("Lot Number", lot_names[l]);
            p.values.emplace("Production Date", date_names[l]);
            p.values.emplace("Supplier", supplier_names[lot_supplier[l]]);
            p.values.emplace("Elongation", measured(elongation));
            p.values.emplace("Circularity", std::min(1.0, measured(circularity)));
            p.values.emplace("Convexity", std::min(1.0, measured(convexity)));
            p.values.emplace("Area", measured(area));
            p.values.emplace("Perimeter", measured(perimeter));
            p.values.emplace("Max Feret Diameter", measured(2.0 * major));
            p.values.emplace("Min Feret Diameter", measured(2.0 * minor));
            p.values.emplace("Equivalent Diameter", measured(diameter));
            p.values.emplace("Bounding Box Area", measured(bw * bh));

            // One pixel per micrometre plus a margin, clamped to the configured range.
            ParticleSketch sketch;
            sketch.class_index = c;
            sketch.major_px = major;
            sketch.minor_px = std::max(minor, 1.0);
            sketch.angle = angle;
            sketch.roughness = 1.0 - convexity;
            sketch.seed = prng.next();
            const auto [lo, hi] = config.image_size_range;
            sketch.width = std::clamp(static_cast<int>(std::ceil(bw + 8)), lo, hi);
            sketch.height = std::clamp(static_cast<int>(std::ceil(bh + 8)), lo, hi);
            const double fit = std::min((sketch.width - 4) / bw, (sketch.height - 4) / bh);
            if (fit < 1.0) {
                sketch.major_px *= fit;
                sketch.minor_px = std::max(sketch.minor_px * fit, 1.0);
            }

            particles.push_back(std::move(p));
            result.truth.push_back(result.class_names[c]);
            result.sketches.push_back(sketch);
        }
    }

    // Created-at is derived from the seed so the generator stays a pure function.
    result.dataset = Dataset(schema, std::move(particles), Provenance::synthetic,
                             iso_date(kFirstProductionDay + static_cast<long>(config.seed % 3650)) + "T00:00:00Z");
    result.images = ImageStore(config.thumb_edge);
    for (std::size_t row = 0; row < n; ++row) {
        const auto& p = result.dataset.particle(row);
        result.images.insert(p.id, ImageStore::make_entry(render_particle(result.sketches[row]), "images/" + p.image_ref,
                                                          config.thumb_edge));
    }
    return result;
}

RgbaImage render_particle(const ParticleSketch& sketch) {
    Rng rng(sketch.seed);
    const int br = (kSynthBackground >> 16) & 0xFF, bg = (kSynthBackground >> 8) & 0xFF, bb = kSynthBackground & 0xFF;
    RgbaImage img(sketch.width, sketch.height, (kSynthBackground << 8) | 0xFF);
    const Rgb color = class_color(sketch.class_index);

    // Boundary wobble: a few random harmonics scaled by roughness.
    double amp[3], phase[3];
    for (int h = 0; h < 3; ++h) {
        amp[h] = sketch.roughness * rng.uniform(0.5, 1.5);
        phase[h] = rng.uniform(0.0, 2 * kPi);
    }
    const double cx = sketch.width / 2.0, cy = sketch.height / 2.0;
    const double ca = std::cos(sketch.angle), sa = std::sin(sketch.angle);
    for (int y = 0; y < sketch.height; ++y) {
        for (int x = 0; x < sketch.width; ++x) {
            const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
            const double u = (dx * ca + dy * sa) / sketch.major_px;
            const double v = (-dx * sa + dy * ca) / sketch.minor_px;
            const double theta = std::atan2(v, u);
            double radius = 1.0;
            for (int h = 0; h < 3; ++h) radius -= amp[h] * 0.5 * (1 + std::sin((h + 3) * theta + phase[h]));
            const double r = std::hypot(u, v);
            auto* p = img.at(x, y);
            if (r <= std::max(radius, 0.35)) {
                const double shade = 1.0 - 0.35 * r;
                p[0] = static_cast<std::uint8_t>(std::clamp(color.r * shade, 0.0, 255.0));
                p[1] = static_cast<std::uint8_t>(std::clamp(color.g * shade, 0.0, 255.0));
                p[2] = static_cast<std::uint8_t>(std::clamp(color.b * shade, 0.0, 255.0));
            } else {
                // Near-uniform background: +-2 levels of sensor noise.
                const int noise = static_cast<int>(rng.below(5)) - 2;
                p[0] = static_cast<std::uint8_t>(br + noise);
                p[1] = static_cast<std::uint8_t>(bg + noise);
                p[2] = static_cast<std::uint8_t>(bb + noise);
            }
        }
    }
    return img;
}

void write_synthetic(const SynthResult& result, const fs::path& dir) {
    write_dataset(result.dataset, dir);
    const fs::path images = dir / "images";
    fs::create_directories(images);
    for (std::size_t row = 0; row < result.dataset.size(); ++row) {
        write_png(images / result.dataset.particle(row).image_ref, render_particle(result.sketches[row]));
    }
    result.images.save(result.dataset, dir);
    std::ofstream truth(dir / "truth.csv", std::ios::binary);
    if (!truth) throw Error(ErrorCode::io, "cannot write " + (dir / "truth.csv").string());
    truth << "id,class\n";
    for (std::size_t row = 0; row < result.dataset.size(); ++row) {
        truth << result.dataset.particle(row).id << ',' << result.truth[row] << '\n';
    }
}

std::vector<std::string> read_truth(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::io, "cannot open " + path.string());
    std::string line;
    std::vector<std::string> classes;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line_no == 1) {
            if (line != "id,class") throw Error(ErrorCode::parse, path.string() + " line 1: expected header id,class");
            continue;
        }
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) {
            throw Error(ErrorCode::parse, path.string() + " line " + std::to_string(line_no) + ": expected id,class");
        }
        classes.push_back(line.substr(comma + 1));
    }
    return classes;
}

}  // namespace daedalus
