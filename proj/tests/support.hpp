#pragma once

#include <atomic>
#include <filesystem>
#include <string>
#include <unistd.h>
#include <vector>

#include "daedalus/model.hpp"
#include "daedalus/random.hpp"

namespace daedalus::testing {

/// Removed with its content on destruction.
class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("daedalus-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

/// Lot (3 categories), Supplier (A-D), Grade (ordinal), Elongation, Area.
inline AttributeSchema toy_schema() {
    using R = AttributeRole;
    using K = AttributeKind;
    return AttributeSchema::create(
        {
            {"Lot", R::production_context, K::categorical, std::nullopt, std::vector<std::string>{"L1", "L2", "L3"}},
            {"Supplier", R::production_context, K::categorical, std::nullopt,
             std::vector<std::string>{"A", "B", "C", "D"}},
            {"Grade", R::production_context, K::ordinal, std::nullopt, std::vector<std::string>{"low", "mid", "high"}},
            {"Elongation", R::shape, K::numeric, std::nullopt, std::nullopt},
            {"Area", R::size, K::numeric, std::string("px^2"), std::nullopt},
        },
        "Elongation");
}

inline std::string toy_id(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "T%05zu", i);
    return buf;
}

/// Random rows over toy_schema(); Area in [0, 100), Elongation in [1, 4).
inline Dataset toy_dataset(std::size_t n, std::uint64_t seed = 1) {
    static const std::vector<std::string> lots{"L1", "L2", "L3"}, suppliers{"A", "B", "C", "D"},
        grades{"low", "mid", "high"};
    Rng rng(seed);
    std::vector<ParticleRecord> rows;
    for (std::size_t i = 0; i < n; ++i) {
        ParticleRecord p;
        p.id = toy_id(i);
        p.image_ref = p.id + ".png";
        p.values.emplace("Lot", lots[rng.below(lots.size())]);
        p.values.emplace("Supplier", suppliers[rng.below(suppliers.size())]);
        p.values.emplace("Grade", grades[rng.below(grades.size())]);
        p.values.emplace("Elongation", 1.0 + 3.0 * rng.uniform());
        p.values.emplace("Area", 100.0 * rng.uniform());
        rows.push_back(std::move(p));
    }
    return Dataset(toy_schema(), std::move(rows), Provenance::synthetic, "2024-01-01T00:00:00Z");
}

inline std::vector<std::string> ids_of(const Dataset& d) {
    std::vector<std::string> out;
    for (const auto& p : d.particles()) out.push_back(p.id);
    return out;
}

}  // namespace daedalus::testing
