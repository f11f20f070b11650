#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>

#include <Eigen/Dense>

#include "daedalus/error.hpp"
#include "daedalus/projection.hpp"
#include "daedalus/random.hpp"

namespace daedalus {
namespace {

constexpr int kCurveSamples = 300;
constexpr double kGradientClip = 4.0;
constexpr double kRepulsionEps = 0.001;
constexpr double kInitExtent = 10.0;
constexpr int kSpectralBlock = 8;
constexpr int kSpectralMaxIterations = 300;
constexpr double kSpectralTolerance = 1e-9;
constexpr double kInitNoise = 1e-4;

double clip(double v) { return std::clamp(v, -kGradientClip, kGradientClip); }

}  // namespace

// ---------------------------------------------------------------------------
// Kernel

double kernel(double dist_squared, double a, double b) { return 1.0 / (1.0 + a * std::pow(dist_squared, b)); }

double attractive_coefficient(double dist_squared, double a, double b) {
    if (dist_squared <= 0) return 0.0;
    return -2.0 * a * b * std::pow(dist_squared, b - 1.0) / (1.0 + a * std::pow(dist_squared, b));
}

double repulsive_coefficient(double dist_squared, double a, double b, double eps) {
    return 2.0 * b / ((eps + dist_squared) * (1.0 + a * std::pow(dist_squared, b)));
}

CurveParams fit_curve_params(double min_dist, double spread) {
    if (!(spread > 0) || !(min_dist >= 0) || !(min_dist < spread)) {
        throw Error(ErrorCode::invalid_argument, "fit_curve_params needs 0 <= min_dist < spread");
    }
    std::vector<double> xs(kCurveSamples), ys(kCurveSamples);
    for (int i = 0; i < kCurveSamples; ++i) {
        xs[i] = 3.0 * spread * i / (kCurveSamples - 1);
        ys[i] = xs[i] < min_dist ? 1.0 : std::exp(-(xs[i] - min_dist) / spread);
    }
    auto cost = [&](double a, double b) {
        double c = 0;
        for (int i = 0; i < kCurveSamples; ++i) {
            const double r = 1.0 / (1.0 + a * std::pow(xs[i], 2 * b)) - ys[i];
            c += r * r;
        }
        return c;
    };

    // Levenberg-Marquardt from (1, 1) with an analytic Jacobian.
    double a = 1.0, b = 1.0, lambda = 1e-3;
    double current = cost(a, b);
    for (int iter = 0; iter < 500; ++iter) {
        Eigen::Matrix2d jtj = Eigen::Matrix2d::Zero();
        Eigen::Vector2d jtr = Eigen::Vector2d::Zero();
        for (int i = 0; i < kCurveSamples; ++i) {
            const double x = xs[i];
            const double p = x > 0 ? std::pow(x, 2 * b) : 0.0;
            const double denom = 1.0 + a * p;
            const double f = 1.0 / denom;
            const double r = f - ys[i];
            Eigen::Vector2d g(-p / (denom * denom), x > 0 ? -a * p * 2.0 * std::log(x) / (denom * denom) : 0.0);
            jtj += g * g.transpose();
            jtr += g * r;
        }
        bool improved = false;
        for (int attempt = 0; attempt < 50 && !improved; ++attempt) {
            Eigen::Matrix2d lhs = jtj;
            lhs.diagonal() *= (1.0 + lambda);
            const Eigen::Vector2d step = lhs.ldlt().solve(-jtr);
            const double na = a + step[0], nb = b + step[1];
            const double next = (na > 0 && nb > 0) ? cost(na, nb) : std::numeric_limits<double>::infinity();
            if (next < current) {
                const double change = current - next;
                a = na;
                b = nb;
                improved = true;
                lambda = std::max(lambda / 10.0, 1e-12);
                if (change <= 1e-16 * std::max(current, 1e-300)) iter = 500;
                current = next;
            } else {
                lambda *= 10.0;
            }
        }
        if (!improved) break;
    }
    return {a, b};
}

// ---------------------------------------------------------------------------
// Initialization

bool is_connected(const FuzzyGraph& graph) {
    if (graph.nodes <= 1) return true;
    std::vector<char> seen(graph.nodes, 0);
    std::vector<std::uint32_t> stack{0};
    seen[0] = 1;
    std::size_t count = 1;
    while (!stack.empty()) {
        const auto i = stack.back();
        stack.pop_back();
        for (std::size_t e = graph.offsets[i]; e < graph.offsets[i + 1]; ++e) {
            const auto j = graph.columns[e];
            if (!seen[j]) {
                seen[j] = 1;
                ++count;
                stack.push_back(j);
            }
        }
    }
    return count == graph.nodes;
}

std::vector<double> spectral_layout(const FuzzyGraph& graph, std::uint64_t seed) {
    const auto n = static_cast<Eigen::Index>(graph.nodes);
    if (n < 3) throw Error(ErrorCode::invalid_argument, "spectral layout needs at least 3 nodes");
    Eigen::VectorXd inv_sqrt_deg(n), trivial(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double deg = 0;
        for (auto e = graph.offsets[i]; e < graph.offsets[i + 1]; ++e) deg += graph.weights[e];
        if (deg <= 0) throw Error(ErrorCode::invalid_argument, "spectral layout needs a connected graph");
        inv_sqrt_deg[i] = 1.0 / std::sqrt(deg);
        trivial[i] = std::sqrt(deg);
    }
    trivial.normalize();

    const int m = static_cast<int>(std::min<Eigen::Index>(kSpectralBlock, n - 1));
    // (I + D^-1/2 W D^-1/2) / 2: same eigenvectors, spectrum shifted into [0, 1].
    auto apply = [&](const Eigen::MatrixXd& x) {
        Eigen::MatrixXd scaled = inv_sqrt_deg.asDiagonal() * x;
        Eigen::MatrixXd y = Eigen::MatrixXd::Zero(n, x.cols());
        for (Eigen::Index i = 0; i < n; ++i) {
            for (auto e = graph.offsets[i]; e < graph.offsets[i + 1]; ++e) {
                y.row(i) += graph.weights[e] * scaled.row(graph.columns[e]);
            }
        }
        y = inv_sqrt_deg.asDiagonal() * y;
        return Eigen::MatrixXd(0.5 * (x + y));
    };
    auto orthonormalize = [&](Eigen::MatrixXd& x) {
        x -= trivial * (trivial.transpose() * x);
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(x);
        x = qr.householderQ() * Eigen::MatrixXd::Identity(n, x.cols());
    };

    Rng rng(seed);
    Eigen::MatrixXd x(n, m);
    for (Eigen::Index c = 0; c < m; ++c) {
        for (Eigen::Index i = 0; i < n; ++i) x(i, c) = rng.normal();
    }
    orthonormalize(x);
    Eigen::VectorXd previous = Eigen::VectorXd::Zero(m);
    Eigen::MatrixXd ritz;
    for (int iter = 0; iter < kSpectralMaxIterations; ++iter) {
        Eigen::MatrixXd y = apply(x);
        orthonormalize(y);
        x = std::move(y);
        if (iter % 10 == 9 || iter + 1 == kSpectralMaxIterations) {
            Eigen::MatrixXd h = x.transpose() * apply(x);
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (h + h.transpose()));
            const Eigen::VectorXd values = eig.eigenvalues();
            x = x * eig.eigenvectors();
            if ((values - previous).cwiseAbs().maxCoeff() < kSpectralTolerance) break;
            previous = values;
        }
    }
    // Ritz pairs ascend; the two largest sit in the last columns.
    Eigen::MatrixXd h = x.transpose() * apply(x);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (h + h.transpose()));
    const Eigen::MatrixXd vecs = x * eig.eigenvectors();
    std::vector<double> out(static_cast<std::size_t>(n) * 2);
    double extent = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        out[2 * i] = vecs(i, m - 1);
        out[2 * i + 1] = vecs(i, m - 2);
        extent = std::max({extent, std::abs(out[2 * i]), std::abs(out[2 * i + 1])});
    }
    const double scale = extent > 0 ? kInitExtent / extent : 1.0;
    for (auto& v : out) v = v * scale + rng.normal(0.0, kInitNoise);
    return out;
}

// ---------------------------------------------------------------------------
// Optimization

std::vector<float> optimize_embedding(const FuzzyGraph& graph, const ProjectionConfig& config,
                                      const OptimizeOptions& options) {
    const std::size_t n = graph.nodes;
    if (n == 0) throw Error(ErrorCode::invalid_argument, "cannot embed an empty graph");
    if (n == 1) return {0.0f, 0.0f};
    const auto [a, b] = fit_curve_params(config.min_dist, config.spread);

    Rng rng(Rng::mix(config.seed, 0x5eed));
    std::vector<double> y;
    if (options.initial) {
        if (options.initial->size() != 2 * n) {
            throw Error(ErrorCode::invalid_argument, "initial embedding has the wrong number of rows");
        }
        y = *options.initial;
    } else if (n >= 3 && graph.entries() > 0 && is_connected(graph)) {
        y = spectral_layout(graph, Rng::mix(config.seed, 0x5bec));
    } else {
        y.resize(2 * n);
        for (auto& v : y) v = rng.uniform(-kInitExtent, kInitExtent);
    }
    // Rescale each axis onto [0, 10] before optimizing.
    for (int c = 0; c < 2; ++c) {
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (std::size_t i = 0; i < n; ++i) {
            lo = std::min(lo, y[2 * i + c]);
            hi = std::max(hi, y[2 * i + c]);
        }
        if (hi > lo) {
            for (std::size_t i = 0; i < n; ++i) y[2 * i + c] = kInitExtent * (y[2 * i + c] - lo) / (hi - lo);
        }
    }

    const std::size_t edges = graph.entries();
    std::vector<std::uint32_t> head(edges);
    for (std::size_t i = 0; i < n; ++i) {
        for (auto e = graph.offsets[i]; e < graph.offsets[i + 1]; ++e) head[e] = static_cast<std::uint32_t>(i);
    }
    const double max_w = edges ? *std::max_element(graph.weights.begin(), graph.weights.end()) : 0.0;
    const auto n_epochs = static_cast<double>(config.n_epochs);
    const auto neg_rate = static_cast<double>(config.negative_sample_rate);
    std::vector<double> per_sample(edges), next_sample(edges), per_negative(edges), next_negative(edges);
    for (std::size_t e = 0; e < edges; ++e) {
        per_sample[e] = max_w / graph.weights[e];
        next_sample[e] = per_sample[e];
        per_negative[e] = neg_rate > 0 ? per_sample[e] / neg_rate : std::numeric_limits<double>::infinity();
        next_negative[e] = per_negative[e];
    }

    for (std::size_t epoch = 0; epoch < config.n_epochs; ++epoch) {
        const double alpha = config.learning_rate * (1.0 - static_cast<double>(epoch) / n_epochs);
        const auto now = static_cast<double>(epoch);
        for (std::size_t e = 0; e < edges; ++e) {
            if (next_sample[e] > now) continue;
            const std::size_t j = head[e], k = graph.columns[e];
            double* cur = &y[2 * j];
            double* other = &y[2 * k];
            double dx = cur[0] - other[0], dy = cur[1] - other[1];
            double d2 = dx * dx + dy * dy;
            const double attract = attractive_coefficient(d2, a, b);
            const double gx = clip(attract * dx), gy = clip(attract * dy);
            cur[0] += gx * alpha;
            cur[1] += gy * alpha;
            other[0] -= gx * alpha;
            other[1] -= gy * alpha;
            next_sample[e] += per_sample[e];

            const auto negatives =
                neg_rate > 0 ? static_cast<std::size_t>((now - next_negative[e]) / per_negative[e]) : 0;
            for (std::size_t s = 0; s < negatives; ++s) {
                const std::size_t r = rng.below(n);
                if (r == j) continue;
                other = &y[2 * r];
                dx = cur[0] - other[0];
                dy = cur[1] - other[1];
                d2 = dx * dx + dy * dy;
                if (d2 > 0) {
                    const double repel = repulsive_coefficient(d2, a, b, kRepulsionEps);
                    cur[0] += clip(repel * dx) * alpha;
                    cur[1] += clip(repel * dy) * alpha;
                } else {
                    cur[0] += kGradientClip * alpha;
                    cur[1] += kGradientClip * alpha;
                }
            }
            next_negative[e] += static_cast<double>(negatives) * per_negative[e];
        }
        if (options.on_epoch && !options.on_epoch(epoch + 1, config.n_epochs)) throw ProjectionCancelled();
    }

    std::vector<float> out(2 * n);
    for (std::size_t i = 0; i < 2 * n; ++i) out[i] = static_cast<float>(y[i]);
    return out;
}

}  // namespace daedalus
