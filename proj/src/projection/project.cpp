#include <algorithm>
#include <cmath>
#include <set>

#include "daedalus/error.hpp"
#include "daedalus/projection.hpp"

namespace daedalus {
using nlohmann::json;

std::vector<std::string> ProjectionConfig::problems(std::size_t rows) const {
    std::vector<std::string> out;
    if (n_neighbors < 2) out.emplace_back("n_neighbors: must be at least 2");
    if (n_neighbors >= rows) {
        out.push_back("n_neighbors: must be less than the particle count (" + std::to_string(rows) + ")");
    }
    if (!std::isfinite(spread) || spread <= 0) out.emplace_back("spread: must be positive");
    if (!std::isfinite(min_dist) || min_dist < 0) out.emplace_back("min_dist: must be non-negative");
    if (std::isfinite(min_dist) && std::isfinite(spread) && min_dist >= spread) {
        out.emplace_back("min_dist: must be less than spread");
    }
    if (n_epochs < 1) out.emplace_back("n_epochs: must be at least 1");
    if (negative_sample_rate < 1) out.emplace_back("negative_sample_rate: must be at least 1");
    if (!std::isfinite(learning_rate) || learning_rate <= 0) out.emplace_back("learning_rate: must be positive");
    if (!std::isfinite(far_weight) || far_weight < 0 || far_weight > 1) out.emplace_back("far_weight: must lie in [0, 1]");
    return out;
}

void ProjectionConfig::validate(std::size_t rows) const {
    auto p = problems(rows);
    if (!p.empty()) throw Error(ErrorCode::validation, "invalid projection config", std::move(p));
}

json to_json(const ProjectionConfig& c) {
    return json{{"n_neighbors", c.n_neighbors},
                {"min_dist", c.min_dist},
                {"spread", c.spread},
                {"n_epochs", c.n_epochs},
                {"negative_sample_rate", c.negative_sample_rate},
                {"learning_rate", c.learning_rate},
                {"far_weight", c.far_weight},
                {"metric", "euclidean"},
                {"seed", c.seed}};
}

ProjectionConfig projection_config_from_json(const json& doc) {
    ProjectionConfig c;
    if (doc.is_null()) return c;
    if (!doc.is_object()) throw Error(ErrorCode::validation, "config must be an object", {"config: expected object"});
    std::vector<std::string> problems;
    auto unsigned_field = [&](const char* key, auto& target) {
        if (!doc.contains(key)) return;
        const auto& v = doc[key];
        if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
            problems.push_back(std::string(key) + ": expected a non-negative integer");
            return;
        }
        target = v.get<std::remove_reference_t<decltype(target)>>();
    };
    auto real_field = [&](const char* key, double& target) {
        if (!doc.contains(key)) return;
        if (!doc[key].is_number()) {
            problems.push_back(std::string(key) + ": expected a number");
            return;
        }
        target = doc[key].get<double>();
    };
    static const std::set<std::string> known{"n_neighbors",   "min_dist",   "spread", "n_epochs", "negative_sample_rate",
                                             "learning_rate", "far_weight", "metric", "seed"};
    for (const auto& [key, value] : doc.items()) {
        if (!known.count(key)) problems.push_back(key + ": unknown config field");
    }
    unsigned_field("n_neighbors", c.n_neighbors);
    unsigned_field("n_epochs", c.n_epochs);
    unsigned_field("negative_sample_rate", c.negative_sample_rate);
    unsigned_field("seed", c.seed);
    real_field("min_dist", c.min_dist);
    real_field("spread", c.spread);
    real_field("learning_rate", c.learning_rate);
    real_field("far_weight", c.far_weight);
    if (doc.contains("metric") && doc["metric"] != "euclidean") problems.emplace_back("metric: only \"euclidean\" is supported");
    if (!problems.empty()) throw Error(ErrorCode::validation, "invalid projection config", std::move(problems));
    return c;
}

ProjectionResult project(const Dataset& dataset, std::span<const std::string> attributes,
                         const std::optional<AlphabetSlice>& alphabet, const ProjectionConfig& config,
                         const OptimizeOptions& options) {
    std::vector<std::string> problems;
    if (attributes.empty() || (attributes.size() < 2 && !alphabet)) {
        problems.emplace_back("attributes: select at least 2 attributes, or 1 attribute together with an alphabet");
    }
    for (const auto& name : attributes) {
        if (!dataset.schema().find(name)) problems.push_back("attributes: unknown attribute '" + name + "'");
    }
    for (auto& p : config.problems(dataset.size())) problems.push_back("config." + p);
    if (!problems.empty()) throw Error(ErrorCode::validation, "invalid projection request", std::move(problems));

    const auto features = build_feature_matrix(dataset, attributes);
    const auto knn = knn_graph(features, config.n_neighbors, config.metric);
    auto graph = fuzzy_simplicial_set(knn, smooth_knn(knn));
    ProjectionResult result;
    if (alphabet) {
        const auto target = encode_target(*alphabet, dataset);
        graph = target_intersect(graph, target, config.far_weight);
        result.alphabet = alphabet->alphabet.name;
        result.alphabet_id = alphabet->alphabet.id;
        result.labeled = target.labeled();
    }
    result.coords = optimize_embedding(graph, config, options);
    result.config = config;
    result.attributes.assign(attributes.begin(), attributes.end());
    return result;
}

CoordinateFile to_coordinate_file(const ProjectionResult& result) {
    CoordinateFile file;
    file.header = json{{"kind", "projection"},
                       {"config", to_json(result.config)},
                       {"attributes", result.attributes},
                       {"labeled", result.labeled}};
    file.header["alphabet"] = result.alphabet ? json(*result.alphabet) : json(nullptr);
    file.header["alphabet_id"] = result.alphabet_id ? json(*result.alphabet_id) : json(nullptr);
    if (!result.computed_at.empty()) file.header["computed_at"] = result.computed_at;
    file.coords = result.coords;
    return file;
}

ProjectionResult projection_from_coordinate_file(const CoordinateFile& file) {
    const auto& h = file.header;
    if (h.value("kind", "") != "projection") throw Error(ErrorCode::parse, "coordinate file is not a projection");
    ProjectionResult r;
    r.coords = file.coords;
    r.config = projection_config_from_json(h.value("config", json::object()));
    r.attributes = h.value("attributes", std::vector<std::string>{});
    if (h.contains("alphabet") && h["alphabet"].is_string()) r.alphabet = h["alphabet"].get<std::string>();
    if (h.contains("alphabet_id") && h["alphabet_id"].is_number_unsigned()) r.alphabet_id = h["alphabet_id"].get<AlphabetId>();
    r.labeled = h.value("labeled", std::size_t{0});
    r.computed_at = h.value("computed_at", "");
    return r;
}

}  // namespace daedalus
