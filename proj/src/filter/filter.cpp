#include "daedalus/filter.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "daedalus/error.hpp"

namespace daedalus {
using nlohmann::json;

namespace {

std::vector<std::string> spec_problems(const FilterSpec& s, const std::string& path) {
    std::vector<std::string> out;
    if (s.attribute.empty()) out.push_back(path + "/attribute: must not be empty");
    if (s.interval) {
        const auto [lo, hi] = *s.interval;
        if (std::isnan(lo) || std::isnan(hi)) out.push_back(path + "/interval: bounds must be numbers");
        else if (lo > hi) out.push_back(path + "/interval: low must not exceed high");
        if (!s.include.empty()) out.push_back(path + ": give either include or interval, not both");
    } else if (s.include.empty()) {
        out.push_back(path + "/include: must not be empty");
    }
    return out;
}

}  // namespace

FilterSpec FilterSpec::categories(std::string attribute, std::vector<std::string> include) {
    return {std::move(attribute), std::move(include), std::nullopt};
}

FilterSpec FilterSpec::range(std::string attribute, double low, double high) {
    return {std::move(attribute), {}, std::make_pair(low, high)};
}

FilterState::FilterState(std::vector<FilterSpec> specs) {
    std::vector<std::string> problems;
    std::set<std::string> seen;
    for (std::size_t i = 0; i < specs.size(); ++i) {
        const std::string path = "/filters/" + std::to_string(i);
        auto p = spec_problems(specs[i], path);
        problems.insert(problems.end(), p.begin(), p.end());
        if (!seen.insert(specs[i].attribute).second) {
            problems.push_back(path + "/attribute: '" + specs[i].attribute + "' is filtered twice");
        }
    }
    if (!problems.empty()) throw Error(ErrorCode::validation, "invalid filter state", std::move(problems));
    specs_ = std::move(specs);
}

const FilterSpec* FilterState::find(std::string_view attribute) const {
    for (const auto& s : specs_) {
        if (s.attribute == attribute) return &s;
    }
    return nullptr;
}

void FilterState::set(FilterSpec spec) {
    auto p = spec_problems(spec, "/filter");
    if (!p.empty()) throw Error(ErrorCode::validation, "invalid filter", std::move(p));
    for (auto& s : specs_) {
        if (s.attribute == spec.attribute) {
            s = std::move(spec);
            return;
        }
    }
    specs_.push_back(std::move(spec));
}

void FilterState::remove(std::string_view attribute) {
    std::erase_if(specs_, [&](const FilterSpec& s) { return s.attribute == attribute; });
}

json to_json(const FilterState& state) {
    json filters = json::array();
    for (const auto& s : state.specs()) {
        json j{{"attribute", s.attribute}};
        if (s.interval) {
            j["interval"] = json::array({s.interval->first, s.interval->second});
        } else {
            j["include"] = s.include;
        }
        filters.push_back(std::move(j));
    }
    return json{{"filters", std::move(filters)}};
}

FilterState filter_state_from_json(const json& doc) {
    const json* filters = &doc;
    if (doc.is_object()) {
        if (!doc.contains("filters")) return {};
        filters = &doc["filters"];
    }
    if (filters->is_null()) return {};
    if (!filters->is_array()) throw Error(ErrorCode::validation, "invalid filter state", {"/filters: expected array"});
    std::vector<FilterSpec> specs;
    std::vector<std::string> problems;
    for (std::size_t i = 0; i < filters->size(); ++i) {
        const auto& f = (*filters)[i];
        const std::string path = "/filters/" + std::to_string(i);
        if (!f.is_object() || !f.contains("attribute") || !f["attribute"].is_string()) {
            problems.push_back(path + "/attribute: expected string");
            continue;
        }
        FilterSpec s;
        s.attribute = f["attribute"].get<std::string>();
        if (f.contains("interval")) {
            const auto& iv = f["interval"];
            if (!iv.is_array() || iv.size() != 2 || !iv[0].is_number() || !iv[1].is_number()) {
                problems.push_back(path + "/interval: expected [low, high]");
                continue;
            }
            s.interval = std::make_pair(iv[0].get<double>(), iv[1].get<double>());
        }
        if (f.contains("include")) {
            const auto& inc = f["include"];
            if (!inc.is_array() || !std::all_of(inc.begin(), inc.end(), [](const json& v) { return v.is_string(); })) {
                problems.push_back(path + "/include: expected array of strings");
                continue;
            }
            s.include = inc.get<std::vector<std::string>>();
        }
        specs.push_back(std::move(s));
    }
    if (!problems.empty()) throw Error(ErrorCode::validation, "invalid filter state", std::move(problems));
    return FilterState(std::move(specs));
}

std::vector<std::vector<std::uint8_t>> evaluate_specs(const FilterState& state, const Dataset& dataset,
                                                      const LabelState* labels) {
    std::vector<std::vector<std::uint8_t>> out;
    out.reserve(state.specs().size());
    for (const auto& spec : state.specs()) {
        const auto* desc = dataset.schema().find(spec.attribute);
        std::vector<std::uint8_t> pass(dataset.size(), 0);
        if (spec.numeric()) {
            if (!desc || !desc->is_numeric()) {
                throw Error(ErrorCode::not_found, "no numeric attribute '" + spec.attribute + "' to filter by interval");
            }
            const auto [lo, hi] = *spec.interval;
            const auto values = numeric_column(dataset, spec.attribute);
            for (std::size_t r = 0; r < values.size(); ++r) pass[r] = values[r] >= lo && values[r] <= hi;
        } else {
            if (desc && desc->is_numeric()) {
                throw Error(ErrorCode::invalid_argument, "numeric attribute '" + spec.attribute + "' needs an interval");
            }
            const auto partition = make_partition(dataset, spec.attribute, std::nullopt, labels);
            std::vector<std::uint8_t> allowed(partition.bins.size(), 0);
            std::vector<std::string> unknown;
            for (const auto& c : spec.include) {
                auto it = std::find(partition.bins.categories.begin(), partition.bins.categories.end(), c);
                if (it == partition.bins.categories.end()) {
                    unknown.push_back(c);
                } else {
                    allowed[static_cast<std::size_t>(it - partition.bins.categories.begin())] = 1;
                }
            }
            if (!unknown.empty()) {
                throw Error(ErrorCode::not_found, "unknown categories for '" + spec.attribute + "'", std::move(unknown));
            }
            for (std::size_t r = 0; r < partition.codes.size(); ++r) {
                const auto c = partition.codes[r];
                pass[r] = c >= 0 && allowed[static_cast<std::size_t>(c)];
            }
        }
        out.push_back(std::move(pass));
    }
    return out;
}

std::vector<std::uint8_t> apply_filters(const FilterState& state, const Dataset& dataset, const LabelState* labels) {
    return combine_passes(evaluate_specs(state, dataset, labels), dataset.size());
}

std::vector<std::uint8_t> combine_passes(std::span<const std::vector<std::uint8_t>> passes, std::size_t rows) {
    std::vector<std::uint8_t> mask(rows, 1);
    for (const auto& pass : passes) {
        for (std::size_t r = 0; r < mask.size(); ++r) mask[r] &= pass[r];
    }
    return mask;
}

FilterSummary filter_summary(const FilterState& state, const Dataset& dataset, const LabelState* labels,
                             std::string_view attribute, const std::optional<BinSpec>& bins) {
    return filter_summary(state, evaluate_specs(state, dataset, labels), dataset, labels, attribute, bins);
}

FilterSummary filter_summary(const FilterState& state, std::span<const std::vector<std::uint8_t>> passes,
                             const Dataset& dataset, const LabelState* labels, std::string_view attribute,
                             const std::optional<BinSpec>& bins) {
    if (passes.size() != state.specs().size()) {
        throw Error(ErrorCode::invalid_argument, "one pass vector per filter spec expected");
    }
    const auto partition = auto_partition(dataset, attribute, bins, labels);
    std::optional<std::size_t> own;
    for (std::size_t s = 0; s < state.specs().size(); ++s) {
        if (state.specs()[s].attribute == partition.bins.attribute) own = s;
    }

    FilterSummary summary;
    summary.attribute = partition.bins.attribute;
    summary.bins = partition.bins;
    summary.counts.assign(partition.bins.size(), {});
    for (std::size_t r = 0; r < dataset.size(); ++r) {
        const auto c = partition.codes[r];
        if (c < 0) continue;
        const bool self_fail = own && !passes[*own][r];
        bool other_fail = false;
        for (std::size_t s = 0; s < passes.size() && !other_fail; ++s) {
            if (own && s == *own) continue;
            other_fail = !passes[s][r];
        }
        auto& bin = summary.counts[static_cast<std::size_t>(c)];
        if (self_fail) {
            ++bin.excluded_by_self;
        } else if (other_fail) {
            ++bin.excluded_by_others_only;
        } else {
            ++bin.included;
        }
    }
    return summary;
}

json to_json(const FilterSummary& s) {
    json bins = json::array();
    for (std::size_t i = 0; i < s.counts.size(); ++i) {
        const auto& c = s.counts[i];
        bins.push_back(json{{"label", s.bins.labels[i]},
                            {"included", c.included},
                            {"excluded_by_self", c.excluded_by_self},
                            {"excluded_by_others_only", c.excluded_by_others_only},
                            {"total", c.total()}});
    }
    return json{{"attribute", s.attribute}, {"bin_spec", to_json(s.bins)}, {"bins", std::move(bins)}};
}

}  // namespace daedalus
