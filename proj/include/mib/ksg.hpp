#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "mib/common.hpp"
#include "mib/kdtree.hpp"
#include "mib/preprocess.hpp"

namespace mib {

/// Digamma via upward recurrence to x >= 6 followed by the asymptotic
/// series; absolute error below 1e-10 on the positive axis.
inline double digamma(double x) {
    if (!(x > 0.0)) throw DomainError("digamma: argument must be positive");
    double acc = 0.0;
    while (x < 6.0) {
        acc -= 1.0 / x;
        x += 1.0;
    }
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    // psi(x) ~ ln x - 1/(2x) - sum B_{2n} / (2n x^{2n})
    double series = std::log(x) - 0.5 * inv;
    series -= inv2 * (1.0 / 12.0 -
              inv2 * (1.0 / 120.0 -
              inv2 * (1.0 / 252.0 -
              inv2 * (1.0 / 240.0 -
              inv2 * (1.0 / 132.0 -
              inv2 * (691.0 / 32760.0))))));
    return acc + series;
}

struct KsgConfig {
    std::size_t k = 5;
    double noise = 1e-10;  // jitter amplitude for tie breaking
    std::uint64_t seed = 0;
    bool brute_force = false;  // O(N^2) reference path instead of kd-trees
    std::size_t leaf_size = 16;
};

/// Per-point k-th neighbour Chebyshev distances, self excluded.
inline std::vector<double> kth_neighbor_distances(const Matrix& points, std::size_t k,
                                                  bool brute_force = false,
                                                  std::size_t leaf_size = 16) {
    const std::size_t n = points.rows();
    if (k == 0 || k >= n)
        throw UsageError("kth_neighbor_distances: need 1 <= k < N, got k=" +
                         std::to_string(k) + ", N=" + std::to_string(n));
    std::vector<double> out(n);
    if (brute_force) {
        for (std::size_t i = 0; i < n; ++i)
            out[i] = brute_kth_neighbor_distance(points, i, k);
    } else {
        KdTree tree(points, leaf_size);
        for (std::size_t i = 0; i < n; ++i)
            out[i] = tree.kth_neighbor_distance(i, k);
    }
    return out;
}

/// Per-point count of other points strictly within radius_i.
inline std::vector<std::size_t> marginal_counts(const Matrix& points,
                                                const std::vector<double>& radii,
                                                bool brute_force = false,
                                                std::size_t leaf_size = 16) {
    const std::size_t n = points.rows();
    if (radii.size() != n) throw ShapeError("marginal_counts: radii size mismatch");
    std::vector<std::size_t> out(n);
    if (brute_force) {
        for (std::size_t i = 0; i < n; ++i)
            out[i] = brute_count_within(points, i, radii[i], /*strict=*/true);
    } else {
        KdTree tree(points, leaf_size);
        for (std::size_t i = 0; i < n; ++i)
            out[i] = tree.count_within(i, radii[i], /*strict=*/true);
    }
    return out;
}

/// Neighbour statistics feeding the estimate; exposed so the counts can be
/// audited and re-scored independently.
struct KsgParts {
    std::size_t n = 0, k = 0;
    std::vector<double> radii;          // joint-space k-th neighbour distances
    std::vector<std::size_t> nx, ny;    // marginal counts
};

namespace detail {

/// Deterministic tie-breaking jitter. The stream is seeded from the matrix
/// content so both argument orders and affinely rescaled inputs (which
/// z-score to identical values) draw the same jitter.
inline void add_jitter(Matrix& m, double amplitude, std::uint64_t seed) {
    if (amplitude <= 0.0) return;
    const std::uint64_t content = fnv1a64(m.data().data(), m.data().size() * sizeof(double));
    std::mt19937_64 rng(derive_seed(seed, "ksg.jitter", content));
    std::uniform_real_distribution<double> u(-amplitude, amplitude);
    for (double& v : m.data()) v += u(rng);
}

}  // namespace detail

inline KsgParts ksg_parts(const Matrix& x, const Matrix& y, const KsgConfig& cfg) {
    if (x.rows() != y.rows())
        throw ShapeError("ksg: row counts differ (" + std::to_string(x.rows()) + " vs " +
                         std::to_string(y.rows()) + ")");
    const std::size_t n = x.rows();
    if (cfg.k == 0 || n <= cfg.k)
        throw UsageError("ksg: need 1 <= k < N, got k=" + std::to_string(cfg.k) +
                         ", N=" + std::to_string(n));

    Matrix zx = zscore_columns(x);
    Matrix zy = zscore_columns(y);
    detail::add_jitter(zx, cfg.noise, cfg.seed);
    detail::add_jitter(zy, cfg.noise, cfg.seed);
    const Matrix joint = Matrix::hcat(zx, zy);

    KsgParts parts;
    parts.n = n;
    parts.k = cfg.k;
    parts.radii = kth_neighbor_distances(joint, cfg.k, cfg.brute_force, cfg.leaf_size);
    parts.nx = marginal_counts(zx, parts.radii, cfg.brute_force, cfg.leaf_size);
    parts.ny = marginal_counts(zy, parts.radii, cfg.brute_force, cfg.leaf_size);
    return parts;
}

inline double ksg_from_parts(const KsgParts& parts, double (*psi)(double) = &digamma) {
    double mean_term = 0.0;
    for (std::size_t i = 0; i < parts.n; ++i)
        mean_term += psi(static_cast<double>(parts.nx[i] + 1)) +
                     psi(static_cast<double>(parts.ny[i] + 1));
    mean_term /= static_cast<double>(parts.n);
    return psi(static_cast<double>(parts.k)) + psi(static_cast<double>(parts.n)) -
           mean_term;
}

/// Kraskov-Stogbauer-Grassberger estimate in nats. Inputs are z-scored and
/// jittered internally; small negative values on independent data are
/// reported unclamped.
inline double ksg_estimate(const Matrix& x, const Matrix& y, const KsgConfig& cfg = {}) {
    return ksg_from_parts(ksg_parts(x, y, cfg));
}

}  // namespace mib
