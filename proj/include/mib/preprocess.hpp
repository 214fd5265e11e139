#pragma once

#include <algorithm>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "mib/common.hpp"
#include "mib/feature_matrix.hpp"

namespace mib {

// ---------------------------------------------------------------------------
// z-score normalisation. Population (/N) standard deviation; the convention
// is recorded in every report sidecar.
// ---------------------------------------------------------------------------

struct ColumnStats {
    double mean = 0.0;
    double std = 1.0;     // as used for scaling (1.0 for constant columns)
    bool constant = false;
};

/// Column-wise z-score of a raw value block. Constant columns are centered
/// and passed through with std treated as 1.
inline Matrix zscore_columns(const Matrix& m, std::vector<ColumnStats>* stats_out = nullptr) {
    if (m.rows() < 2) throw UsageError("zscore: need at least 2 rows");
    const std::size_t n = m.rows(), d = m.cols();
    Matrix out(n, d);
    if (stats_out) stats_out->assign(d, {});
    for (std::size_t j = 0; j < d; ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += m(i, j);
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double c = m(i, j) - mean;
            var += c * c;
        }
        var /= static_cast<double>(n);
        double sd = std::sqrt(var);
        const bool constant = sd < 1e-13 * std::max(1.0, std::abs(mean));
        if (constant) sd = 1.0;
        for (std::size_t i = 0; i < n; ++i) out(i, j) = (m(i, j) - mean) / sd;
        if (stats_out) (*stats_out)[j] = {mean, sd, constant};
    }
    return out;
}

struct ZScoreResult {
    FeatureMatrix matrix;
    std::vector<ColumnStats> stats;
    std::vector<std::string> warnings;
};

inline ZScoreResult zscore(const FeatureMatrix& fm) {
    ZScoreResult r;
    r.matrix = fm;
    r.matrix.values = zscore_columns(fm.values, &r.stats);
    for (std::size_t j = 0; j < r.stats.size(); ++j)
        if (r.stats[j].constant)
            r.warnings.push_back("column '" + fm.names[j] +
                                 "' has zero variance; centered only");
    return r;
}

// ---------------------------------------------------------------------------
// Stratified subsampling: proportional allocation with largest-remainder
// rounding, remainder ties broken by a seeded shuffle.
// ---------------------------------------------------------------------------

/// Pick n of N row indices. When strata labels are given the allocation is
/// proportional per stratum; otherwise uniform without replacement. Returned
/// indices are sorted ascending.
inline std::vector<std::size_t> stratified_sample_indices(
    const std::vector<std::string>& strata, std::size_t total_rows, std::size_t n,
    std::uint64_t seed) {
    if (n > total_rows)
        throw UsageError("stratified_sample: requested " + std::to_string(n) +
                         " rows from " + std::to_string(total_rows));
    std::vector<std::size_t> picked;
    picked.reserve(n);

    if (strata.empty()) {
        std::vector<std::size_t> all(total_rows);
        std::iota(all.begin(), all.end(), 0);
        std::mt19937_64 rng(derive_seed(seed, "sample.uniform"));
        std::shuffle(all.begin(), all.end(), rng);
        picked.assign(all.begin(), all.begin() + static_cast<long>(n));
    } else {
        if (strata.size() != total_rows)
            throw ShapeError("stratified_sample: strata size mismatch");
        // group rows per stratum in order of first appearance
        std::vector<std::string> labels;
        std::vector<std::vector<std::size_t>> groups;
        for (std::size_t i = 0; i < total_rows; ++i) {
            auto it = std::find(labels.begin(), labels.end(), strata[i]);
            if (it == labels.end()) {
                labels.push_back(strata[i]);
                groups.emplace_back();
                groups.back().push_back(i);
            } else {
                groups[static_cast<std::size_t>(it - labels.begin())].push_back(i);
            }
        }
        const std::size_t g = groups.size();
        // integer largest-remainder allocation of n across groups
        std::vector<std::size_t> alloc(g);
        std::vector<std::uint64_t> rem(g);
        std::size_t assigned = 0;
        for (std::size_t s = 0; s < g; ++s) {
            const std::uint64_t num = static_cast<std::uint64_t>(n) * groups[s].size();
            alloc[s] = static_cast<std::size_t>(num / total_rows);
            rem[s] = num % total_rows;
            assigned += alloc[s];
        }
        std::vector<std::size_t> order(g);
        std::iota(order.begin(), order.end(), 0);
        std::mt19937_64 tie_rng(derive_seed(seed, "sample.tiebreak"));
        std::shuffle(order.begin(), order.end(), tie_rng);
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return rem[a] > rem[b]; });
        for (std::size_t i = 0; assigned < n; ++i)
            ++alloc[order[i % g]], ++assigned;
        // sample within each stratum without replacement
        for (std::size_t s = 0; s < g; ++s) {
            std::mt19937_64 rng(derive_seed(seed, "sample.stratum", s));
            std::shuffle(groups[s].begin(), groups[s].end(), rng);
            picked.insert(picked.end(), groups[s].begin(),
                          groups[s].begin() + static_cast<long>(alloc[s]));
        }
    }
    std::sort(picked.begin(), picked.end());
    return picked;
}

inline FeatureMatrix stratified_sample(const FeatureMatrix& fm, std::size_t n,
                                       std::uint64_t seed) {
    return fm.take_rows(stratified_sample_indices(fm.strata, fm.rows(), n, seed));
}

// ---------------------------------------------------------------------------
// Row alignment of a feature-set pair.
// ---------------------------------------------------------------------------

enum class PairingPolicy {
    SameRows,       // rows already correspond one-to-one
    RandomPairing,  // seeded random pairing across unrelated corpora
};

inline const char* to_string(PairingPolicy p) {
    return p == PairingPolicy::SameRows ? "same-rows" : "random";
}

/// Row-aligned pair plus the row selections that produced it, kept for audit.
struct AlignedPair {
    FeatureMatrix x, y;
    std::vector<std::size_t> x_rows;  // source rows of x, in pair order
    std::vector<std::size_t> y_rows;  // source rows of y, in pair order
    PairingPolicy policy = PairingPolicy::SameRows;
};

inline AlignedPair pair_alignment(const FeatureMatrix& x, const FeatureMatrix& y,
                                  PairingPolicy policy, std::uint64_t seed = 0) {
    AlignedPair out;
    out.policy = policy;
    if (policy == PairingPolicy::SameRows) {
        if (x.rows() != y.rows())
            throw UsageError("pair_alignment: same-rows policy with " +
                             std::to_string(x.rows()) + " vs " + std::to_string(y.rows()) +
                             " rows");
        out.x = x;
        out.y = y;
        out.x_rows.resize(x.rows());
        out.y_rows.resize(y.rows());
        std::iota(out.x_rows.begin(), out.x_rows.end(), 0);
        std::iota(out.y_rows.begin(), out.y_rows.end(), 0);
        return out;
    }
    const std::size_t n = std::min(x.rows(), y.rows());
    std::vector<std::size_t> xi(x.rows()), yi(y.rows());
    std::iota(xi.begin(), xi.end(), 0);
    std::iota(yi.begin(), yi.end(), 0);
    std::mt19937_64 rx(derive_seed(seed, "pairing.x"));
    std::mt19937_64 ry(derive_seed(seed, "pairing.y"));
    std::shuffle(xi.begin(), xi.end(), rx);
    std::shuffle(yi.begin(), yi.end(), ry);
    xi.resize(n);
    yi.resize(n);
    std::sort(xi.begin(), xi.end());  // x keeps corpus order; y carries the permutation
    out.x = x.take_rows(xi);
    out.y = y.take_rows(yi);
    out.x_rows = std::move(xi);
    out.y_rows = std::move(yi);
    return out;
}

}  // namespace mib
