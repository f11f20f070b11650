#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "daedalus/labelstore.hpp"
#include "daedalus/layout.hpp"
#include "daedalus/model.hpp"

namespace daedalus {

/// Predicate on one attribute or alphabet: an include set of categories
/// (UNLABELED is legal for alphabets) or a closed numeric interval.
struct FilterSpec {
    std::string attribute;
    std::vector<std::string> include;
    std::optional<std::pair<double, double>> interval;

    bool numeric() const { return interval.has_value(); }
    static FilterSpec categories(std::string attribute, std::vector<std::string> include);
    static FilterSpec range(std::string attribute, double low, double high);

    friend bool operator==(const FilterSpec&, const FilterSpec&) = default;
};

/// Conjunction of specs, at most one per attribute.
class FilterState {
public:
    FilterState() = default;
    /// Throws Error(validation) on duplicates, empty include sets or low > high.
    explicit FilterState(std::vector<FilterSpec> specs);

    const std::vector<FilterSpec>& specs() const { return specs_; }
    bool empty() const { return specs_.empty(); }
    const FilterSpec* find(std::string_view attribute) const;
    /// Replaces the spec of the same attribute, or appends.
    void set(FilterSpec spec);
    void remove(std::string_view attribute);

    friend bool operator==(const FilterState&, const FilterState&) = default;

private:
    std::vector<FilterSpec> specs_;
};

nlohmann::json to_json(const FilterState& state);
/// Throws Error(validation) with field paths.
FilterState filter_state_from_json(const nlohmann::json& doc);

/// Per-row pass flags of every spec, in state order.
std::vector<std::vector<std::uint8_t>> evaluate_specs(const FilterState& state, const Dataset& dataset,
                                                      const LabelState* labels);

/// 1 for rows passing every spec. Throws Error(not_found) for unknown
/// attributes, alphabets or categories.
std::vector<std::uint8_t> apply_filters(const FilterState& state, const Dataset& dataset,
                                        const LabelState* labels = nullptr);
/// AND of evaluate_specs output.
std::vector<std::uint8_t> combine_passes(std::span<const std::vector<std::uint8_t>> passes, std::size_t rows);

struct FilterBinCounts {
    std::size_t included = 0;
    std::size_t excluded_by_self = 0;
    std::size_t excluded_by_others_only = 0;

    std::size_t total() const { return included + excluded_by_self + excluded_by_others_only; }
    friend bool operator==(const FilterBinCounts&, const FilterBinCounts&) = default;
};

struct FilterSummary {
    std::string attribute;
    BinSpec bins;
    std::vector<FilterBinCounts> counts;
};

/// Stacked-bar counts for `attribute`: excluded_by_self fails the attribute's
/// own spec, excluded_by_others_only passes it but fails another spec.
FilterSummary filter_summary(const FilterState& state, const Dataset& dataset, const LabelState* labels,
                             std::string_view attribute, const std::optional<BinSpec>& bins = std::nullopt);
/// Same, reusing evaluate_specs(state, ...) across several attributes.
FilterSummary filter_summary(const FilterState& state, std::span<const std::vector<std::uint8_t>> passes,
                             const Dataset& dataset, const LabelState* labels, std::string_view attribute,
                             const std::optional<BinSpec>& bins = std::nullopt);

nlohmann::json to_json(const FilterSummary& summary);

}  // namespace daedalus
