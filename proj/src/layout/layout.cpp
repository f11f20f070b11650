#include "daedalus/layout.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>

#include "daedalus/error.hpp"

namespace daedalus {
using nlohmann::json;

namespace {

std::string number_text(double v) {
    if (v == 0) v = 0;  // no "-0"
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

double pow10(int e) {
    double r = 1;
    for (int i = 0; i < std::abs(e); ++i) r *= 10;
    return r;
}

// Multiple of a 1/2/5 x 10^e step, computed so decimal edges stay exact.
double step_multiple(long long k, int mantissa, int e) {
    const double m = static_cast<double>(k) * mantissa;
    return e >= 0 ? m * pow10(e) : m / pow10(e);
}

}  // namespace

std::optional<std::size_t> BinSpec::bin_of(double value) const {
    if (!numeric || edges.size() < 2 || !(value >= edges.front()) || !(value <= edges.back())) return std::nullopt;
    auto it = std::upper_bound(edges.begin(), edges.end(), value);
    auto idx = static_cast<std::size_t>(it - edges.begin());
    return std::min(idx, edges.size() - 1) - 1;
}

json to_json(const BinSpec& b) {
    json j{{"attribute", b.attribute}, {"numeric", b.numeric}, {"labels", b.labels}};
    if (b.numeric) {
        j["edges"] = b.edges;
    } else {
        j["categories"] = b.categories;
    }
    return j;
}

BinSpec bin_spec_from_json(const json& doc) {
    BinSpec b;
    if (!doc.is_object()) throw Error(ErrorCode::validation, "bins must be an object", {"bins: expected object"});
    b.attribute = doc.value("attribute", "");
    if (doc.contains("edges")) {
        if (!doc["edges"].is_array() || doc["edges"].size() < 2) {
            throw Error(ErrorCode::validation, "invalid bins", {"bins/edges: expected at least 2 numbers"});
        }
        b.numeric = true;
        for (const auto& e : doc["edges"]) {
            if (!e.is_number()) throw Error(ErrorCode::validation, "invalid bins", {"bins/edges: expected numbers"});
            b.edges.push_back(e.get<double>());
        }
        const bool single = b.edges.size() == 2 && b.edges[0] == b.edges[1];
        for (std::size_t i = 1; i < b.edges.size() && !single; ++i) {
            if (!(b.edges[i] > b.edges[i - 1])) {
                throw Error(ErrorCode::validation, "invalid bins", {"bins/edges: must be strictly increasing"});
            }
        }
        for (std::size_t i = 0; i + 1 < b.edges.size(); ++i) {
            const bool last = i + 2 == b.edges.size();
            b.labels.push_back("[" + number_text(b.edges[i]) + ", " + number_text(b.edges[i + 1]) + (last ? "]" : ")"));
        }
    } else if (doc.contains("categories")) {
        b.categories = doc["categories"].get<std::vector<std::string>>();
        b.labels = b.categories;
    } else {
        throw Error(ErrorCode::validation, "invalid bins", {"bins: expected \"edges\" or \"categories\""});
    }
    return b;
}

BinSpec bin_numeric_attribute(std::span<const double> values, std::size_t target_bins, std::string attribute) {
    if (target_bins == 0) throw Error(ErrorCode::invalid_argument, "target bin count must be at least 1");
    BinSpec b;
    b.attribute = std::move(attribute);
    b.numeric = true;
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (double v : values) {
        if (!std::isfinite(v)) throw Error(ErrorCode::invalid_argument, "cannot bin non-finite values");
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (values.empty()) lo = hi = 0;
    if (lo == hi) {
        b.edges = {lo, hi};
        b.labels = {"[" + number_text(lo) + ", " + number_text(hi) + "]"};
        return b;
    }

    const double raw = (hi - lo) / static_cast<double>(target_bins);
    const int base = static_cast<int>(std::floor(std::log10(raw)));
    struct Choice {
        int mantissa;
        int e;
        long long first;
        long long last;
    };
    std::optional<Choice> best;
    auto count_of = [](const Choice& c) { return c.last - c.first; };
    for (int e = base - 1; e <= base + 1; ++e) {
        for (int mantissa : {1, 2, 5}) {
            const double step = step_multiple(1, mantissa, e);
            Choice c{mantissa, e, static_cast<long long>(std::floor(lo / step)),
                     static_cast<long long>(std::ceil(hi / step))};
            while (step_multiple(c.first, mantissa, e) > lo) --c.first;
            while (step_multiple(c.last, mantissa, e) < hi) ++c.last;
            if (c.last == c.first) ++c.last;
            const auto diff = std::llabs(count_of(c) - static_cast<long long>(target_bins));
            // Ties go to the coarser step.
            if (!best || diff < std::llabs(count_of(*best) - static_cast<long long>(target_bins)) ||
                (diff == std::llabs(count_of(*best) - static_cast<long long>(target_bins)) &&
                 step >= step_multiple(1, best->mantissa, best->e))) {
                best = c;
            }
        }
    }
    for (long long k = best->first; k <= best->last; ++k) b.edges.push_back(step_multiple(k, best->mantissa, best->e));
    for (std::size_t i = 0; i + 1 < b.edges.size(); ++i) {
        const bool last = i + 2 == b.edges.size();
        b.labels.push_back("[" + number_text(b.edges[i]) + ", " + number_text(b.edges[i + 1]) + (last ? "]" : ")"));
    }
    return b;
}

Partition make_partition(const Dataset& dataset, std::string_view name, const std::optional<BinSpec>& bins,
                         const LabelState* labels) {
    Partition p;
    if (const auto* desc = dataset.schema().find(name)) {
        if (desc->is_numeric()) {
            if (!bins || !bins->numeric) {
                throw Error(ErrorCode::invalid_argument, "numeric attribute '" + desc->name + "' needs bins");
            }
            p.bins = *bins;
            p.bins.attribute = desc->name;
            const auto values = numeric_column(dataset, name);
            p.codes.resize(values.size());
            for (std::size_t r = 0; r < values.size(); ++r) {
                auto bin = p.bins.bin_of(values[r]);
                p.codes[r] = bin ? static_cast<std::int32_t>(*bin) : -1;
            }
        } else {
            auto col = category_column(dataset, name);
            p.bins.attribute = desc->name;
            p.bins.categories = col.categories;
            p.bins.labels = col.categories;
            p.codes = std::move(col.codes);
        }
        return p;
    }
    const LabelAlphabet* alphabet = labels ? labels->find_alphabet(name) : nullptr;
    if (!alphabet) throw Error(ErrorCode::not_found, "unknown attribute or alphabet '" + std::string(name) + "'");
    p.alphabet = true;
    p.bins.attribute = alphabet->name;
    for (const auto& l : alphabet->labels) p.bins.categories.push_back(l.name);
    p.bins.categories.emplace_back(kUnlabeled);
    p.bins.labels = p.bins.categories;
    const auto unlabeled = static_cast<std::int32_t>(alphabet->labels.size());
    p.codes.assign(dataset.size(), unlabeled);
    for (const auto& [particle, label] : labels->assignments_of(alphabet->id)) {
        auto row = dataset.row_of(particle);
        auto pos = alphabet->position(label);
        if (row && pos) p.codes[*row] = static_cast<std::int32_t>(*pos);
    }
    return p;
}

Partition auto_partition(const Dataset& dataset, std::string_view name, const std::optional<BinSpec>& bins,
                         const LabelState* labels) {
    const auto* desc = dataset.schema().find(name);
    if (desc && desc->is_numeric() && !bins) {
        return make_partition(dataset, name,
                              bin_numeric_attribute(numeric_column(dataset, name), kDefaultTargetBins, desc->name), labels);
    }
    return make_partition(dataset, name, bins, labels);
}

GridLayout attribute_layout(const Dataset& dataset, const Partition& partition, const LayoutConfig& config) {
    if (!(config.cell_size > 0) || !(config.aspect > 0) || !(config.column_gap >= 0)) {
        throw Error(ErrorCode::invalid_argument, "layout config needs cell_size > 0, aspect > 0, column_gap >= 0");
    }
    const std::string& key = config.sort_key.empty() ? dataset.schema().elongation() : config.sort_key;
    const auto* key_desc = dataset.schema().find(key);
    if (!key_desc || !key_desc->is_numeric()) {
        throw Error(ErrorCode::invalid_argument, "sort key '" + key + "' is not a numeric attribute");
    }
    const auto sort_values = numeric_column(dataset, key);

    const std::size_t columns = partition.bins.size();
    std::vector<std::vector<std::uint32_t>> members(columns);
    for (std::size_t r = 0; r < partition.codes.size(); ++r) {
        const auto c = partition.codes[r];
        if (c >= 0 && static_cast<std::size_t>(c) < columns) members[static_cast<std::size_t>(c)].push_back(static_cast<std::uint32_t>(r));
    }

    GridLayout out;
    out.attribute = partition.bins.attribute;
    out.bins = partition.bins;
    out.config = config;
    out.cells.assign(dataset.size(), LayoutCell{});
    out.columns.resize(columns);
    double x = 0;
    const double cell = config.cell_size;
    for (std::size_t c = 0; c < columns; ++c) {
        auto& rows = members[c];
        std::sort(rows.begin(), rows.end(), [&](std::uint32_t a, std::uint32_t b) {
            if (sort_values[a] != sort_values[b]) return sort_values[a] > sort_values[b];
            return dataset.particle(a).id < dataset.particle(b).id;
        });
        const auto width = static_cast<std::uint32_t>(
            std::max(1.0, std::ceil(std::sqrt(static_cast<double>(rows.size()) / config.aspect))));
        out.columns[c] = {partition.bins.labels[c], rows.size(), width, x};
        for (std::size_t i = 0; i < rows.size(); ++i) {
            auto& cellref = out.cells[rows[i]];
            cellref.column = static_cast<std::int32_t>(c);
            cellref.sub_column = static_cast<std::uint32_t>(i % width);
            cellref.row = static_cast<std::uint32_t>(i / width);
            cellref.x = x + (cellref.sub_column + 0.5) * cell;
            cellref.y = (cellref.row + 0.5) * cell;
        }
        x += width * cell + config.column_gap;
    }
    return out;
}

GridLayout attribute_layout(const Dataset& dataset, std::string_view attribute, const std::optional<BinSpec>& bins,
                            const LayoutConfig& config, const LabelState* labels) {
    return attribute_layout(dataset, make_partition(dataset, attribute, bins, labels), config);
}

json to_json(const LayoutConfig& c) {
    return json{{"cell_size", c.cell_size}, {"column_gap", c.column_gap}, {"aspect", c.aspect}, {"sort_key", c.sort_key}};
}

LayoutConfig layout_config_from_json(const json& doc) {
    LayoutConfig c;
    if (doc.is_null()) return c;
    std::vector<std::string> problems;
    auto real = [&](const char* key, double& target) {
        if (!doc.contains(key)) return;
        if (!doc[key].is_number()) {
            problems.push_back(std::string(key) + ": expected a number");
        } else {
            target = doc[key].get<double>();
        }
    };
    if (!doc.is_object()) throw Error(ErrorCode::validation, "layout config must be an object", {"config: expected object"});
    real("cell_size", c.cell_size);
    real("column_gap", c.column_gap);
    real("aspect", c.aspect);
    if (doc.contains("sort_key")) {
        if (!doc["sort_key"].is_string()) {
            problems.emplace_back("sort_key: expected a string");
        } else {
            c.sort_key = doc["sort_key"].get<std::string>();
        }
    }
    if (!(c.cell_size > 0)) problems.emplace_back("cell_size: must be positive");
    if (!(c.aspect > 0)) problems.emplace_back("aspect: must be positive");
    if (!(c.column_gap >= 0)) problems.emplace_back("column_gap: must be non-negative");
    if (!problems.empty()) throw Error(ErrorCode::validation, "invalid layout config", std::move(problems));
    return c;
}

CoordinateFile to_coordinate_file(const GridLayout& layout) {
    CoordinateFile file;
    json columns = json::array();
    for (const auto& c : layout.columns) {
        columns.push_back(json{{"label", c.label}, {"count", c.count}, {"width", c.width}, {"x", c.x}});
    }
    file.header = json{{"kind", "layout"},
                       {"attribute", layout.attribute},
                       {"bins", to_json(layout.bins)},
                       {"config", to_json(layout.config)},
                       {"columns", std::move(columns)}};
    file.coords.reserve(layout.cells.size() * 2);
    for (const auto& c : layout.cells) {
        file.coords.push_back(static_cast<float>(c.x));
        file.coords.push_back(static_cast<float>(c.y));
    }
    return file;
}

}  // namespace daedalus
