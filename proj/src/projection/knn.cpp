#include <algorithm>
#include <cmath>
#include <thread>
#include <utility>

#include "daedalus/error.hpp"
#include "daedalus/projection.hpp"

namespace daedalus {
namespace {

struct Candidate {
    double d2;
    std::uint32_t index;
    bool operator<(const Candidate& o) const { return d2 < o.d2 || (d2 == o.d2 && index < o.index); }
};

void knn_rows(std::span<const double> data, std::size_t rows, std::size_t dims, std::size_t k, std::size_t begin,
              std::size_t end, KnnGraph& out) {
    std::vector<Candidate> heap;  // max-heap on (d2, index)
    heap.reserve(k + 1);
    for (std::size_t i = begin; i < end; ++i) {
        heap.clear();
        const double* xi = data.data() + i * dims;
        for (std::size_t j = 0; j < rows; ++j) {
            if (j == i) continue;
            const double* xj = data.data() + j * dims;
            double d2 = 0;
            for (std::size_t c = 0; c < dims; ++c) {
                const double diff = xi[c] - xj[c];
                d2 += diff * diff;
            }
            const Candidate cand{d2, static_cast<std::uint32_t>(j)};
            if (heap.size() < k) {
                heap.push_back(cand);
                std::push_heap(heap.begin(), heap.end());
            } else if (cand < heap.front()) {
                std::pop_heap(heap.begin(), heap.end());
                heap.back() = cand;
                std::push_heap(heap.begin(), heap.end());
            }
        }
        std::sort_heap(heap.begin(), heap.end());
        for (std::size_t n = 0; n < k; ++n) {
            out.indices[i * k + n] = heap[n].index;
            out.distances[i * k + n] = std::sqrt(heap[n].d2);
        }
    }
}

}  // namespace

KnnGraph knn_graph(std::span<const double> data, std::size_t rows, std::size_t dims, std::size_t k, Metric,
                   unsigned threads) {
    if (data.size() != rows * dims) throw Error(ErrorCode::invalid_argument, "data size differs from rows x dims");
    if (k < 1 || k >= rows) {
        throw Error(ErrorCode::invalid_argument,
                    "k = " + std::to_string(k) + " out of range for " + std::to_string(rows) + " rows",
                    {"k: must satisfy 1 <= k < rows"});
    }
    if (rows > UINT32_MAX) throw Error(ErrorCode::invalid_argument, "too many rows");
    KnnGraph g;
    g.rows = rows;
    g.k = k;
    g.indices.resize(rows * k);
    g.distances.resize(rows * k);

    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(1, rows / 256)));
    if (threads <= 1) {
        knn_rows(data, rows, dims, k, 0, rows, g);
        return g;
    }
    std::vector<std::thread> pool;
    const std::size_t chunk = (rows + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
        const std::size_t begin = t * chunk, end = std::min(rows, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back([&, begin, end] { knn_rows(data, rows, dims, k, begin, end, g); });
    }
    for (auto& th : pool) th.join();
    return g;
}

KnnGraph knn_graph(const FeatureMatrix& features, std::size_t k, Metric metric, unsigned threads) {
    return knn_graph(features.data, features.rows, features.cols(), k, metric, threads);
}

}  // namespace daedalus
