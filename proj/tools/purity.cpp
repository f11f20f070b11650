#include "purity.hpp"

#include <algorithm>
#include <numeric>
#include <utility>

#include "daedalus/error.hpp"

namespace daedalus {

std::vector<double> knn_purity_per_point(std::span<const float> coords, std::span<const std::string> classes,
                                         std::size_t k) {
    const std::size_t n = classes.size();
    if (coords.size() != 2 * n) {
        throw Error(ErrorCode::invalid_argument, "coordinates have " + std::to_string(coords.size() / 2) +
                                                     " rows, truth has " + std::to_string(n));
    }
    if (k == 0 || k >= n) throw Error(ErrorCode::invalid_argument, "k must be in [1, rows)");

    std::vector<double> out(n);
    std::vector<std::pair<double, std::size_t>> dist(n - 1);
    for (std::size_t i = 0; i < n; ++i) {
        const double xi = coords[2 * i], yi = coords[2 * i + 1];
        std::size_t m = 0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const double dx = coords[2 * j] - xi, dy = coords[2 * j + 1] - yi;
            dist[m++] = {dx * dx + dy * dy, j};
        }
        std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
        std::size_t same = 0;
        for (std::size_t r = 0; r < k; ++r) same += classes[dist[r].second] == classes[i];
        out[i] = static_cast<double>(same) / static_cast<double>(k);
    }
    return out;
}

double knn_purity(std::span<const float> coords, std::span<const std::string> classes, std::size_t k) {
    const auto per = knn_purity_per_point(coords, classes, k);
    return std::accumulate(per.begin(), per.end(), 0.0) / static_cast<double>(per.size());
}

}  // namespace daedalus
