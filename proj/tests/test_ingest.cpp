#include <gtest/gtest.h>

#include <fstream>
#include <map>

#include "daedalus/dataset_io.hpp"
#include "daedalus/error.hpp"
#include "daedalus/image.hpp"
#include "daedalus/image_store.hpp"
#include "daedalus/synth.hpp"
#include "support.hpp"

using namespace daedalus;
using daedalus::testing::TempDir;
namespace fs = std::filesystem;

namespace {

SynthConfig small_config(std::size_t n = 240) {
    SynthConfig c;
    c.particle_count = n;
    c.lot_count = 6;
    c.supplier_count = 3;
    c.image_size_range = {10, 80};
    return c;
}

const SynthResult& small_corpus() {
    static const SynthResult r = generate_synthetic(small_config());
    return r;
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

}  // namespace

TEST(Png, RoundTripPreservesPixels) {
    RgbaImage img(7, 5, 0x10203040u);
    img.at(3, 2)[0] = 255;
    img.at(6, 4)[3] = 0;
    const auto back = decode_png(encode_png(img));
    EXPECT_EQ(back.width, 7);
    EXPECT_EQ(back.height, 5);
    EXPECT_EQ(back.pixels, img.pixels);
}

TEST(Png, RejectsGarbage) {
    const std::vector<std::uint8_t> junk{1, 2, 3, 4, 5};
    try {
        decode_png(junk);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::encoding);
    }
}

TEST(Thumbnail, SizeKeepsAspect) {
    EXPECT_EQ(thumbnail_size(1000, 500, 64), (std::pair{64, 32}));
    EXPECT_EQ(thumbnail_size(500, 1000, 64), (std::pair{32, 64}));
    EXPECT_EQ(thumbnail_size(20, 10, 64), (std::pair{20, 10}));
    EXPECT_EQ(thumbnail_size(1000, 10, 64), (std::pair{64, 1}));
}

TEST(Thumbnail, AreaResizeAveragesBlocks) {
    RgbaImage img(4, 2, 0x000000FFu);
    const int values[8] = {10, 20, 60, 60, 30, 40, 100, 20};
    for (int i = 0; i < 8; ++i) img.at(i % 4, i / 4)[0] = static_cast<std::uint8_t>(values[i]);
    const auto small = resize_area(img, 2, 1);
    EXPECT_EQ(small.at(0, 0)[0], 25);
    EXPECT_EQ(small.at(1, 0)[0], 60);
    EXPECT_EQ(small.at(0, 0)[3], 255);
}

TEST(Thumbnail, TransparentVariantClearsExactlyTheBackground) {
    const auto& corpus = small_corpus();
    for (std::size_t row : {0u, 17u, 101u}) {
        const auto entry = ImageStore::make_entry(render_particle(corpus.sketches[row]), "", kDefaultThumbEdge);
        const auto opaque = decode_png(entry.thumbnail);
        const auto clear = decode_png(entry.transparent);
        ASSERT_EQ(opaque.width, clear.width);
        // Dominant border colour of the opaque thumbnail.
        std::map<std::uint32_t, int> border;
        for (int x = 0; x < opaque.width; ++x) {
            for (int y : {0, opaque.height - 1}) {
                const auto* p = opaque.at(x, y);
                ++border[(p[0] << 16) | (p[1] << 8) | p[2]];
            }
        }
        for (int y = 1; y + 1 < opaque.height; ++y) {
            for (int x : {0, opaque.width - 1}) {
                const auto* p = opaque.at(x, y);
                ++border[(p[0] << 16) | (p[1] << 8) | p[2]];
            }
        }
        const auto bg = std::max_element(border.begin(), border.end(),
                                         [](const auto& a, const auto& b) { return a.second < b.second; })
                            ->first;
        std::size_t cleared = 0;
        for (int y = 0; y < opaque.height; ++y) {
            for (int x = 0; x < opaque.width; ++x) {
                const auto* p = opaque.at(x, y);
                EXPECT_EQ(p[3], 255);
                const bool background = std::abs(p[0] - int((bg >> 16) & 0xFF)) <= 24 &&
                                        std::abs(p[1] - int((bg >> 8) & 0xFF)) <= 24 &&
                                        std::abs(p[2] - int(bg & 0xFF)) <= 24;
                EXPECT_EQ(clear.at(x, y)[3], background ? 0 : 255) << "pixel " << x << "," << y;
                cleared += background;
                EXPECT_EQ(std::memcmp(clear.at(x, y), p, 3), 0);
            }
        }
        EXPECT_GT(cleared, 0u);
        EXPECT_LT(cleared, static_cast<std::size_t>(opaque.width * opaque.height));
        EXPECT_EQ(clear.at(0, 0)[3], 0);
    }
}

TEST(Synth, DeterministicAndValid) {
    const auto a = generate_synthetic(small_config(90));
    const auto b = generate_synthetic(small_config(90));
    EXPECT_EQ(a.dataset, b.dataset);
    EXPECT_EQ(a.truth, b.truth);
    EXPECT_EQ(a.images.at(a.dataset.particle(5).id).thumbnail, b.images.at(b.dataset.particle(5).id).thumbnail);
    EXPECT_TRUE(validate_dataset(a.dataset).ok());
    EXPECT_EQ(a.dataset.provenance(), Provenance::synthetic);
    auto other = small_config(90);
    other.seed = 8;
    EXPECT_NE(generate_synthetic(other).dataset.fingerprint(), a.dataset.fingerprint());
}

TEST(Synth, CoversEveryClassLotAndSupplier) {
    const auto& c = small_corpus();
    ASSERT_EQ(c.dataset.size(), 240u);
    ASSERT_EQ(c.truth.size(), 240u);
    EXPECT_EQ(c.class_names, synthetic_class_names(3));
    std::map<std::string, int> classes, lots, suppliers;
    for (std::size_t i = 0; i < c.dataset.size(); ++i) {
        ++classes[c.truth[i]];
        ++lots[std::get<std::string>(c.dataset.particle(i).values.at("Lot Number"))];
        ++suppliers[std::get<std::string>(c.dataset.particle(i).values.at("Supplier"))];
    }
    EXPECT_EQ(classes.size(), 3u);
    EXPECT_EQ(lots.size(), 6u);
    EXPECT_EQ(suppliers.size(), 3u);
    EXPECT_EQ(c.images.size(), 240u);
}

TEST(Synth, PinnedLotSizeIsExact) {
    auto cfg = small_config(300);
    cfg.pinned_lot_sizes = {{2, 77}};
    const auto r = generate_synthetic(cfg);
    std::size_t n = 0;
    for (const auto& p : r.dataset.particles()) n += std::get<std::string>(p.values.at("Lot Number")) == "Lot 003";
    EXPECT_EQ(n, 77u);
}

TEST(Synth, ReferenceConfigMatchesCorpusScale) {
    const auto c = reference_synth_config();
    EXPECT_EQ(c.particle_count, 37857u);
    EXPECT_EQ(c.lot_count, 70u);
    EXPECT_EQ(c.supplier_count, 8u);
    EXPECT_EQ(c.pinned_lot_sizes.at(26), 669u);
    EXPECT_NO_THROW(c.validate());
}

TEST(Synth, ConfigValidationNamesFields) {
    SynthConfig c;
    c.particle_count = 0;
    c.class_count = 1;
    c.image_size_range = {5, 2000};
    try {
        c.validate();
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::validation);
        EXPECT_GE(e.details().size(), 4u);
    }
}

TEST(Synth, ReferenceSchemaFileMatchesGenerator) {
    const auto schema = load_schema(fs::path(DAEDALUS_SOURCE_DIR) / "data" / "reference_schema.json");
    EXPECT_EQ(schema, synthetic_schema(70, 8));
}

TEST(DatasetIo, WriteLoadRoundTripWithImages) {
    TempDir dir;
    const auto& c = small_corpus();
    write_synthetic(c, dir.path());
    const auto loaded = load_dataset(manifest_path(dir.path()));
    EXPECT_EQ(loaded, c.dataset);
    EXPECT_EQ(loaded.fingerprint(), c.dataset.fingerprint());
    EXPECT_EQ(read_truth(dir / "truth.csv"), c.truth);

    const auto cached = ImageStore::load(loaded, dir.path());
    const auto rebuilt = load_images(loaded, read_manifest(manifest_path(dir.path())).image_dir);
    EXPECT_TRUE(rebuilt.warnings().empty());
    for (std::size_t row : {0u, 100u, 239u}) {
        const auto& id = loaded.particle(row).id;
        EXPECT_EQ(cached.at(id).thumbnail, c.images.at(id).thumbnail);
        EXPECT_EQ(rebuilt.at(id).thumbnail, c.images.at(id).thumbnail);
        EXPECT_EQ(rebuilt.at(id).transparent, c.images.at(id).transparent);
    }
}

TEST(DatasetIo, MissingImageBecomesPlaceholderWithWarning) {
    TempDir dir;
    const auto& c = small_corpus();
    write_synthetic(c, dir.path());
    fs::remove(dir / "images" / c.dataset.particle(3).image_ref);
    write_text(dir / "images" / c.dataset.particle(4).image_ref, "not a png");
    const auto store = load_images(c.dataset, dir / "images");
    EXPECT_EQ(store.warnings().size(), 2u);
    EXPECT_TRUE(store.at(c.dataset.particle(3).id).placeholder);
    EXPECT_TRUE(store.at(c.dataset.particle(4).id).placeholder);
    EXPECT_FALSE(store.at(c.dataset.particle(5).id).placeholder);
    EXPECT_THROW(load_images(c.dataset, dir / "nowhere"), Error);
}

TEST(DatasetIo, CsvErrorsNameTheLine) {
    TempDir dir;
    write_dataset(daedalus::testing::toy_dataset(3), dir.path());
    std::ifstream in(dir / "particles.csv");
    std::string header, l1, l2, l3;
    std::getline(in, header);
    std::getline(in, l1);
    std::getline(in, l2);
    std::getline(in, l3);
    in.close();
    write_text(dir / "particles.csv", header + "\n" + l1 + "\n" + l2 + ",extra\n" + l3 + "\n");
    try {
        load_dataset(manifest_path(dir.path()));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::parse);
        EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
    }
}

TEST(DatasetIo, InvalidValuesAreValidationErrors) {
    TempDir dir;
    auto rows = daedalus::testing::toy_dataset(4).particles();
    rows[2].values["Supplier"] = std::string("Q");
    write_dataset(Dataset(daedalus::testing::toy_schema(), rows, Provenance::real, ""), dir.path());
    try {
        load_dataset(manifest_path(dir.path()));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::validation);
        ASSERT_FALSE(e.details().empty());
        EXPECT_NE(e.details()[0].find("T00002"), std::string::npos);
    }
}

TEST(DatasetIo, QuotedFieldsSurvive) {
    using R = AttributeRole;
    using K = AttributeKind;
    const auto schema = AttributeSchema::create(
        {{"Vendor, site", R::production_context, K::categorical, std::nullopt,
          std::vector<std::string>{"a \"b\"", "c,d"}},
         {"E", R::shape, K::numeric, std::nullopt, std::nullopt}},
        "E");
    std::vector<ParticleRecord> rows(2);
    rows[0] = {"p,1", "x.png", {{"Vendor, site", std::string("a \"b\"")}, {"E", 1.25}}};
    rows[1] = {"p2", "y.png", {{"Vendor, site", std::string("c,d")}, {"E", 0.1}}};
    const Dataset d(schema, rows, Provenance::real, "2024-05-01T00:00:00Z");
    TempDir dir;
    write_dataset(d, dir.path());
    EXPECT_EQ(load_dataset(manifest_path(dir.path())), d);
}

TEST(DatasetIo, MissingManifestIsIoError) {
    TempDir dir;
    try {
        load_dataset(dir / "manifest.json");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::io);
    }
}
