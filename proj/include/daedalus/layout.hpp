#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "daedalus/coordinates.hpp"
#include "daedalus/labelstore.hpp"
#include "daedalus/model.hpp"

namespace daedalus {

/// Bins of one attribute: numeric edges (last bin right-closed) or an ordered
/// category list.
struct BinSpec {
    std::string attribute;
    bool numeric = false;
    std::vector<double> edges;
    std::vector<std::string> categories;
    std::vector<std::string> labels;

    std::size_t size() const { return labels.size(); }
    /// Numeric bin holding `value`, if any.
    std::optional<std::size_t> bin_of(double value) const;

    friend bool operator==(const BinSpec&, const BinSpec&) = default;
};

nlohmann::json to_json(const BinSpec& bins);
BinSpec bin_spec_from_json(const nlohmann::json& doc);

/// Equal-width bins whose step comes from the 1/2/5 x 10^k ladder, picked so
/// the bin count is closest to `target_bins`. A constant column gives the
/// single bin [v, v]. Throws Error(invalid_argument) for target_bins = 0 or
/// non-finite values.
BinSpec bin_numeric_attribute(std::span<const double> values, std::size_t target_bins, std::string attribute = {});

inline constexpr std::size_t kDefaultTargetBins = 10;

/// Categorical view of a schema attribute or, by name, of a label alphabet
/// (labels in order, then UNLABELED). codes[row] is the bin, -1 for none.
struct Partition {
    BinSpec bins;
    bool alphabet = false;
    std::vector<std::int32_t> codes;
};

/// Numeric attributes need `bins`. Throws Error(not_found) for unknown names
/// and Error(invalid_argument) for a numeric attribute without bins.
Partition make_partition(const Dataset& dataset, std::string_view name, const std::optional<BinSpec>& bins,
                         const LabelState* labels = nullptr);
/// Like make_partition, but numeric attributes without bins get
/// bin_numeric_attribute(values, kDefaultTargetBins).
Partition auto_partition(const Dataset& dataset, std::string_view name, const std::optional<BinSpec>& bins,
                         const LabelState* labels = nullptr);

struct LayoutConfig {
    double cell_size = 1.0;
    double column_gap = 1.0;
    /// Sub-grid width is ceil(sqrt(count / aspect)).
    double aspect = 4.0;
    /// Numeric attribute ordering each column, largest at the bottom. Empty:
    /// the schema's elongation attribute.
    std::string sort_key;

    friend bool operator==(const LayoutConfig&, const LayoutConfig&) = default;
};

struct LayoutCell {
    std::int32_t column = -1;
    std::uint32_t sub_column = 0;
    std::uint32_t row = 0;
    double x = 0;
    double y = 0;
};

struct ColumnHeader {
    std::string label;
    std::size_t count = 0;
    std::uint32_t width = 1;
    double x = 0;  // left edge
};

/// Particles stacked in one column per bin. World y grows upwards; row 0 is
/// the bottom row.
struct GridLayout {
    std::string attribute;
    BinSpec bins;
    LayoutConfig config;
    std::vector<LayoutCell> cells;  // one per dataset row
    std::vector<ColumnHeader> columns;
};

GridLayout attribute_layout(const Dataset& dataset, const Partition& partition, const LayoutConfig& config = {});
GridLayout attribute_layout(const Dataset& dataset, std::string_view attribute, const std::optional<BinSpec>& bins,
                            const LayoutConfig& config = {}, const LabelState* labels = nullptr);

nlohmann::json to_json(const LayoutConfig& config);
LayoutConfig layout_config_from_json(const nlohmann::json& doc);

/// Cell centres as a coordinate file; the header carries the column table.
CoordinateFile to_coordinate_file(const GridLayout& layout);

}  // namespace daedalus
