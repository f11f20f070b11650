#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "daedalus/labelstore.hpp"
#include "daedalus/model.hpp"

namespace daedalus {

/// Dense row-major matrix, one row per dataset particle.
struct FeatureMatrix {
    struct Column {
        std::string attribute;
        std::string meaning;  // "normalized" or the category of a one-hot column
    };

    std::size_t rows = 0;
    std::vector<Column> columns;
    std::vector<double> data;

    std::size_t cols() const { return columns.size(); }
    double at(std::size_t r, std::size_t c) const { return data[r * columns.size() + c]; }
    std::span<const double> row(std::size_t r) const { return {data.data() + r * cols(), cols()}; }
};

/// Per-row class index, or kMissing for unlabeled rows.
struct TargetVector {
    static constexpr std::int32_t kMissing = -1;

    std::vector<std::int32_t> classes;
    std::vector<std::string> class_names;

    std::size_t labeled() const;
};

/// Min-max scaling to [0,1]; a constant column maps to zeros. Throws
/// Error(encoding) on non-finite input.
std::vector<double> normalize_numeric(std::span<const double> values);

/// Row-major values.size() x order.size() indicator matrix. Throws
/// Error(encoding) naming the first value missing from `order`.
std::vector<double> one_hot_encode(std::span<const std::string> values, std::span<const std::string> order);

/// Column blocks in selection order: numeric attributes give one normalized
/// column, categorical and ordinal ones a one-hot block over all categories.
FeatureMatrix build_feature_matrix(const Dataset& dataset, std::span<const std::string> attributes);

TargetVector encode_target(const AlphabetSlice& slice, const Dataset& dataset);

}  // namespace daedalus
