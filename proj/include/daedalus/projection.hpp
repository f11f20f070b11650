#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "daedalus/coordinates.hpp"
#include "daedalus/features.hpp"
#include "daedalus/labelstore.hpp"
#include "daedalus/model.hpp"

namespace daedalus {

enum class Metric { euclidean };

struct ProjectionConfig {
    std::size_t n_neighbors = 15;
    double min_dist = 0.1;
    double spread = 1.0;
    std::size_t n_epochs = 200;
    std::size_t negative_sample_rate = 5;
    double learning_rate = 1.0;
    double far_weight = 0.0;
    Metric metric = Metric::euclidean;
    std::uint64_t seed = 0;

    /// One "field: reason" entry per broken invariant; `rows` is the particle count.
    std::vector<std::string> problems(std::size_t rows) const;
    /// Throws Error(validation) carrying problems(rows).
    void validate(std::size_t rows) const;

    friend bool operator==(const ProjectionConfig&, const ProjectionConfig&) = default;
};

nlohmann::json to_json(const ProjectionConfig& config);
/// Missing keys keep their defaults. Throws Error(validation) naming fields of
/// the wrong type or unknown keys.
ProjectionConfig projection_config_from_json(const nlohmann::json& doc);

/// Exact k nearest neighbours of every row, self excluded, sorted by
/// (distance, index).
struct KnnGraph {
    std::size_t rows = 0;
    std::size_t k = 0;
    std::vector<std::uint32_t> indices;  // rows x k
    std::vector<double> distances;       // rows x k

    std::span<const std::uint32_t> neighbors(std::size_t i) const { return {indices.data() + i * k, k}; }
    std::span<const double> dists(std::size_t i) const { return {distances.data() + i * k, k}; }
};

/// Brute force over all pairs. `threads` = 0 picks the hardware count; the
/// result does not depend on it. Throws Error(invalid_argument) unless 1 <= k < rows.
KnnGraph knn_graph(std::span<const double> data, std::size_t rows, std::size_t dims, std::size_t k,
                   Metric metric = Metric::euclidean, unsigned threads = 0);
KnnGraph knn_graph(const FeatureMatrix& features, std::size_t k, Metric metric = Metric::euclidean,
                   unsigned threads = 0);

struct SmoothKnn {
    std::vector<double> rho;
    std::vector<double> sigma;
};

/// Calibration of one ascending distance row: rho is the first positive
/// distance, sigma solves sum_j exp(-max(0, d_j - rho) / sigma) = log2(k).
std::pair<double, double> smooth_knn_row(std::span<const double> distances, double fallback_mean = 0.0);
SmoothKnn smooth_knn(const KnnGraph& knn);

/// Symmetric sparse graph in CSR form; each row's columns ascend.
struct FuzzyGraph {
    std::size_t nodes = 0;
    std::vector<std::size_t> offsets{0};
    std::vector<std::uint32_t> columns;
    std::vector<double> weights;

    std::size_t entries() const { return columns.size(); }
    /// 0 when there is no edge.
    double weight(std::size_t i, std::size_t j) const;
};

/// Directed memberships exp(-max(0, d - rho_i) / sigma_i), combined by the
/// fuzzy union a + b - ab.
FuzzyGraph fuzzy_simplicial_set(const KnnGraph& knn, const SmoothKnn& smooth);

/// Edges between particles labelled with different classes are scaled by
/// `far_weight`; every other edge is kept. Zero-weight edges are dropped.
FuzzyGraph target_intersect(const FuzzyGraph& graph, const TargetVector& target, double far_weight);

struct CurveParams {
    double a = 0;
    double b = 0;
};

/// Least-squares fit of 1 / (1 + a d^{2b}) to the offset exponential on 300
/// points of [0, 3 spread].
CurveParams fit_curve_params(double min_dist, double spread);

/// Low-dimensional membership 1 / (1 + a d2^b) as a function of squared distance.
double kernel(double dist_squared, double a, double b);
/// Coefficients c such that c (y_i - y_j) is the gradient of log q (attractive)
/// or log(1 - q) (repulsive) with respect to y_i. `eps` regularizes d2 -> 0.
double attractive_coefficient(double dist_squared, double a, double b);
double repulsive_coefficient(double dist_squared, double a, double b, double eps = 0.0);

/// Thrown out of optimize_embedding when the progress callback asks to stop.
struct ProjectionCancelled : std::runtime_error {
    ProjectionCancelled() : std::runtime_error("projection cancelled") {}
};

struct OptimizeOptions {
    /// rows x 2 start coordinates; used instead of the spectral/random layout.
    std::optional<std::vector<double>> initial;
    /// Called after each epoch with (epochs done, total); return false to cancel.
    std::function<bool(std::size_t, std::size_t)> on_epoch;
};

/// Leading non-trivial eigenvectors of the normalized graph, scaled so the
/// largest |coordinate| is 10. Requires a connected graph with >= 3 nodes.
std::vector<double> spectral_layout(const FuzzyGraph& graph, std::uint64_t seed);
bool is_connected(const FuzzyGraph& graph);

/// rows x 2 coordinates. Deterministic for a fixed config.seed.
std::vector<float> optimize_embedding(const FuzzyGraph& graph, const ProjectionConfig& config,
                                      const OptimizeOptions& options = {});

struct ProjectionResult {
    std::vector<float> coords;
    ProjectionConfig config;
    std::vector<std::string> attributes;
    std::optional<std::string> alphabet;
    std::optional<AlphabetId> alphabet_id;
    std::size_t labeled = 0;
    std::string computed_at;  // empty when not recorded

    std::size_t rows() const { return coords.size() / 2; }
};

/// Feature matrix -> kNN -> smooth kNN -> fuzzy graph -> [label intersection]
/// -> embedding. Needs >= 2 attributes, or 1 attribute plus an alphabet.
ProjectionResult project(const Dataset& dataset, std::span<const std::string> attributes,
                         const std::optional<AlphabetSlice>& alphabet, const ProjectionConfig& config,
                         const OptimizeOptions& options = {});

CoordinateFile to_coordinate_file(const ProjectionResult& result);
ProjectionResult projection_from_coordinate_file(const CoordinateFile& file);

}  // namespace daedalus
