#include "daedalus/features.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_map>

#include "daedalus/error.hpp"

namespace daedalus {

std::size_t TargetVector::labeled() const {
    return static_cast<std::size_t>(std::count_if(classes.begin(), classes.end(), [](auto c) { return c != kMissing; }));
}

std::vector<double> normalize_numeric(std::span<const double> values) {
    if (values.empty()) return {};
    double lo = values[0], hi = values[0];
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values[i])) {
            throw Error(ErrorCode::encoding, "non-finite value at index " + std::to_string(i));
        }
        lo = std::min(lo, values[i]);
        hi = std::max(hi, values[i]);
    }
    std::vector<double> out(values.size(), 0.0);
    if (hi == lo) return out;
    const double range = hi - lo;
    for (std::size_t i = 0; i < values.size(); ++i) out[i] = std::clamp((values[i] - lo) / range, 0.0, 1.0);
    return out;
}

std::vector<double> one_hot_encode(std::span<const std::string> values, std::span<const std::string> order) {
    std::unordered_map<std::string_view, std::size_t> index;
    for (std::size_t j = 0; j < order.size(); ++j) index.emplace(order[j], j);
    std::vector<double> out(values.size() * order.size(), 0.0);
    for (std::size_t i = 0; i < values.size(); ++i) {
        auto it = index.find(values[i]);
        if (it == index.end()) throw Error(ErrorCode::encoding, "unknown category '" + values[i] + "'");
        out[i * order.size() + it->second] = 1.0;
    }
    return out;
}

FeatureMatrix build_feature_matrix(const Dataset& dataset, std::span<const std::string> attributes) {
    if (attributes.empty()) throw Error(ErrorCode::invalid_argument, "attribute selection is empty");
    const auto& schema = dataset.schema();
    std::set<std::string_view> seen;
    std::vector<std::string> problems;
    for (const auto& name : attributes) {
        if (!schema.find(name)) problems.push_back("unknown attribute '" + name + "'");
        if (!seen.insert(name).second) problems.push_back("attribute '" + name + "' selected twice");
    }
    if (!problems.empty()) throw Error(ErrorCode::invalid_argument, "invalid attribute selection", std::move(problems));

    FeatureMatrix m;
    m.rows = dataset.size();
    struct Block {
        std::size_t offset;
        std::vector<double> values;  // rows x width
        std::size_t width;
    };
    std::vector<Block> blocks;
    for (const auto& name : attributes) {
        const auto& desc = schema.at(name);
        Block b{m.columns.size(), {}, 0};
        if (desc.is_numeric()) {
            b.values = normalize_numeric(numeric_column(dataset, name));
            b.width = 1;
            m.columns.push_back({name, "normalized"});
        } else {
            const auto col = category_column(dataset, name);
            b.width = col.categories.size();
            b.values.assign(m.rows * b.width, 0.0);
            for (std::size_t r = 0; r < m.rows; ++r) {
                if (col.codes[r] < 0) {
                    throw Error(ErrorCode::encoding, "particle '" + dataset.particle(r).id + "' has a value outside the '" +
                                                         name + "' categories");
                }
                b.values[r * b.width + static_cast<std::size_t>(col.codes[r])] = 1.0;
            }
            for (const auto& c : col.categories) m.columns.push_back({name, c});
        }
        blocks.push_back(std::move(b));
    }
    const std::size_t width = m.columns.size();
    m.data.assign(m.rows * width, 0.0);
    for (const auto& b : blocks) {
        for (std::size_t r = 0; r < m.rows; ++r) {
            std::copy_n(b.values.begin() + static_cast<std::ptrdiff_t>(r * b.width), b.width,
                        m.data.begin() + static_cast<std::ptrdiff_t>(r * width + b.offset));
        }
    }
    return m;
}

TargetVector encode_target(const AlphabetSlice& slice, const Dataset& dataset) {
    TargetVector t;
    for (const auto& l : slice.alphabet.labels) t.class_names.push_back(l.name);
    t.classes.assign(dataset.size(), TargetVector::kMissing);
    for (const auto& [particle, label] : slice.assignments) {
        auto row = dataset.row_of(particle);
        auto pos = slice.alphabet.position(label);
        if (row && pos) t.classes[*row] = static_cast<std::int32_t>(*pos);
    }
    return t;
}

}  // namespace daedalus
