#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

#include "daedalus/error.hpp"
#include "daedalus/projection.hpp"

namespace daedalus {
namespace {

constexpr double kSmoothTolerance = 1e-5;
constexpr double kMinScale = 1e-3;
constexpr int kBisectionSteps = 64;

struct Triplet {
    std::uint32_t row;
    std::uint32_t col;
    double w;
};

FuzzyGraph from_sorted(std::size_t nodes, const std::vector<Triplet>& t) {
    FuzzyGraph g;
    g.nodes = nodes;
    g.offsets.assign(nodes + 1, 0);
    g.columns.reserve(t.size());
    g.weights.reserve(t.size());
    for (const auto& e : t) {
        g.columns.push_back(e.col);
        g.weights.push_back(e.w);
        ++g.offsets[e.row + 1];
    }
    std::partial_sum(g.offsets.begin(), g.offsets.end(), g.offsets.begin());
    return g;
}

}  // namespace

double FuzzyGraph::weight(std::size_t i, std::size_t j) const {
    auto first = columns.begin() + static_cast<std::ptrdiff_t>(offsets[i]);
    auto last = columns.begin() + static_cast<std::ptrdiff_t>(offsets[i + 1]);
    auto it = std::lower_bound(first, last, static_cast<std::uint32_t>(j));
    if (it == last || *it != j) return 0.0;
    return weights[static_cast<std::size_t>(it - columns.begin())];
}

std::pair<double, double> smooth_knn_row(std::span<const double> d, double fallback_mean) {
    const std::size_t k = d.size();
    if (k == 0) return {0.0, 1.0};
    const double target = std::log2(static_cast<double>(k));
    double rho = 0.0;
    for (double x : d) {
        if (x > 0) {
            rho = x;
            break;
        }
    }

    double lo = 0.0, hi = std::numeric_limits<double>::infinity(), mid = 1.0;
    for (int step = 0; step < kBisectionSteps; ++step) {
        double psum = 0.0;
        for (double x : d) {
            const double gap = x - rho;
            psum += gap > 0 ? std::exp(-gap / mid) : 1.0;
        }
        if (std::abs(psum - target) < kSmoothTolerance) break;
        if (psum > target) {
            hi = mid;
            mid = (lo + hi) / 2.0;
        } else {
            lo = mid;
            mid = std::isinf(hi) ? mid * 2.0 : (lo + hi) / 2.0;
        }
    }

    double mean = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(k);
    if (mean <= 0) mean = fallback_mean;
    if (mean <= 0) return {rho, std::max(mid, 1.0)};
    return {rho, std::max(mid, kMinScale * mean)};
}

SmoothKnn smooth_knn(const KnnGraph& knn) {
    SmoothKnn s;
    s.rho.resize(knn.rows);
    s.sigma.resize(knn.rows);
    const double global_mean =
        knn.distances.empty()
            ? 0.0
            : std::accumulate(knn.distances.begin(), knn.distances.end(), 0.0) / static_cast<double>(knn.distances.size());
    for (std::size_t i = 0; i < knn.rows; ++i) {
        std::tie(s.rho[i], s.sigma[i]) = smooth_knn_row(knn.dists(i), global_mean);
    }
    return s;
}

FuzzyGraph fuzzy_simplicial_set(const KnnGraph& knn, const SmoothKnn& smooth) {
    if (smooth.rho.size() != knn.rows || smooth.sigma.size() != knn.rows) {
        throw Error(ErrorCode::invalid_argument, "smooth kNN size differs from the kNN graph");
    }
    std::vector<Triplet> t;
    t.reserve(knn.rows * knn.k * 2);
    for (std::size_t i = 0; i < knn.rows; ++i) {
        const auto nb = knn.neighbors(i);
        const auto ds = knn.dists(i);
        for (std::size_t n = 0; n < knn.k; ++n) {
            const double gap = ds[n] - smooth.rho[i];
            const double w = gap <= 0 ? 1.0 : std::exp(-gap / smooth.sigma[i]);
            if (w <= 0) continue;
            t.push_back({static_cast<std::uint32_t>(i), nb[n], w});
            t.push_back({nb[n], static_cast<std::uint32_t>(i), w});
        }
    }
    std::sort(t.begin(), t.end(), [](const Triplet& a, const Triplet& b) {
        return std::tie(a.row, a.col) < std::tie(b.row, b.col);
    });
    // Equal (row, col) entries are the two directed memberships of one pair.
    std::vector<Triplet> merged;
    merged.reserve(t.size() / 2 + 1);
    for (std::size_t n = 0; n < t.size();) {
        if (n + 1 < t.size() && t[n + 1].row == t[n].row && t[n + 1].col == t[n].col) {
            const double hi = std::max(t[n].w, t[n + 1].w), lo = std::min(t[n].w, t[n + 1].w);
            merged.push_back({t[n].row, t[n].col, std::min(1.0, hi + lo * (1.0 - hi))});
            n += 2;
        } else {
            merged.push_back(t[n]);
            ++n;
        }
    }
    return from_sorted(knn.rows, merged);
}

FuzzyGraph target_intersect(const FuzzyGraph& graph, const TargetVector& target, double far_weight) {
    if (target.classes.size() != graph.nodes) {
        throw Error(ErrorCode::invalid_argument, "target length differs from the graph's node count");
    }
    FuzzyGraph out;
    out.nodes = graph.nodes;
    out.offsets.assign(graph.nodes + 1, 0);
    out.columns.reserve(graph.entries());
    out.weights.reserve(graph.entries());
    for (std::size_t i = 0; i < graph.nodes; ++i) {
        const auto ci = target.classes[i];
        for (std::size_t e = graph.offsets[i]; e < graph.offsets[i + 1]; ++e) {
            const auto j = graph.columns[e];
            const auto cj = target.classes[j];
            double w = graph.weights[e];
            if (ci != TargetVector::kMissing && cj != TargetVector::kMissing && ci != cj) w *= far_weight;
            if (w <= 0) continue;
            out.columns.push_back(j);
            out.weights.push_back(w);
        }
        out.offsets[i + 1] = out.columns.size();
    }
    return out;
}

}  // namespace daedalus
