#pragma once

#include <algorithm>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "mib/common.hpp"
#include "mib/ksg.hpp"

namespace mib {

struct BootstrapCi {
    double low = 0.0, high = 0.0;
    std::vector<double> stats;   // replicate values, evaluation order
    std::size_t requested = 0;   // B
    std::size_t used = 0;        // replicates that produced a value
};

/// Percentile confidence interval over B row resamples (with replacement).
/// With small B the percentile convention is outward nearest-rank, so a 95%
/// interval at B=10 spans the replicate min/max. Replicates returning
/// nullopt are skipped; all-skipped is an error.
inline BootstrapCi bootstrap_ci(
    const std::function<std::optional<double>(const std::vector<std::size_t>&)>& statistic,
    std::size_t n_rows, std::size_t b = 10, double level = 0.95, std::uint64_t seed = 0) {
    if (b < 2) throw UsageError("bootstrap_ci: need B >= 2");
    if (n_rows == 0) throw UsageError("bootstrap_ci: empty data");
    if (!(level > 0.0 && level < 1.0)) throw UsageError("bootstrap_ci: level in (0,1)");

    BootstrapCi ci;
    ci.requested = b;
    for (std::size_t rep = 0; rep < b; ++rep) {
        std::mt19937_64 rng(derive_seed(seed, "bootstrap", rep));
        std::uniform_int_distribution<std::size_t> pick(0, n_rows - 1);
        std::vector<std::size_t> rows(n_rows);
        for (auto& r : rows) r = pick(rng);
        if (auto v = statistic(rows)) ci.stats.push_back(*v);
    }
    ci.used = ci.stats.size();
    if (ci.used == 0)
        throw DomainError("bootstrap_ci: statistic undefined on every replicate");
    std::vector<double> sorted = ci.stats;
    std::sort(sorted.begin(), sorted.end());
    const double tail = (1.0 - level) / 2.0;
    const auto lo_idx = static_cast<std::size_t>(
        std::floor(tail * static_cast<double>(ci.used)));
    const std::size_t hi_idx = ci.used - 1 - lo_idx;
    ci.low = sorted[std::min(lo_idx, ci.used - 1)];
    ci.high = sorted[std::min(hi_idx, ci.used - 1)];
    return ci;
}

/// Source/filter MI shares of a semantic dimension with a bootstrap CI on
/// the source share.
struct AttributionResult {
    std::string dimension;
    double i_source = 0.0, i_filter = 0.0;          // floored KSG estimates
    double raw_i_source = 0.0, raw_i_filter = 0.0;  // as estimated
    bool floored_source = false, floored_filter = false;
    double a_source = 0.0, a_filter = 0.0;
    double ci_low = 0.0, ci_high = 0.0;
    std::size_t bootstrap_b = 10;
    std::size_t bootstrap_used = 10;
    std::uint64_t seed = 0;
};

/// Share of the dimension's total (source + filter) KSG information carried
/// by the source features. Negative estimates are floored at zero before
/// the ratio; a both-zero numerator and denominator is an undefined ratio.
inline AttributionResult attribute(const Matrix& source, const Matrix& filter,
                                   const Matrix& dim, const KsgConfig& ksg_cfg,
                                   std::size_t bootstrap_b = 10, std::uint64_t seed = 0,
                                   const std::string& dim_name = "") {
    if (source.rows() != dim.rows() || filter.rows() != dim.rows())
        throw ShapeError("attribute: matrices must be row-aligned");

    auto source_share = [&](const Matrix& s, const Matrix& f, const Matrix& d,
                            double* is_out, double* if_out, double* raw_s,
                            double* raw_f) -> std::optional<double> {
        const double rs = ksg_estimate(s, d, ksg_cfg);
        const double rf = ksg_estimate(f, d, ksg_cfg);
        const double is = std::max(0.0, rs);
        const double fi = std::max(0.0, rf);
        if (raw_s) *raw_s = rs;
        if (raw_f) *raw_f = rf;
        if (is_out) *is_out = is;
        if (if_out) *if_out = fi;
        if (is + fi == 0.0) return std::nullopt;
        return is / (is + fi);
    };

    AttributionResult res;
    res.dimension = dim_name;
    res.seed = seed;
    res.bootstrap_b = bootstrap_b;
    auto share = source_share(source, filter, dim, &res.i_source, &res.i_filter,
                              &res.raw_i_source, &res.raw_i_filter);
    if (!share)
        throw DomainError("attribute: ratio undefined for dimension '" + dim_name +
                          "' (both MI estimates zero after flooring)");
    res.floored_source = res.raw_i_source < 0.0;
    res.floored_filter = res.raw_i_filter < 0.0;
    // both shares over one denominator: swapping the roles swaps the shares
    // bit-for-bit, and the shares sum to 1 within an ulp
    const double total = res.i_source + res.i_filter;
    res.a_source = res.i_source / total;
    res.a_filter = res.i_filter / total;

    const BootstrapCi ci = bootstrap_ci(
        [&](const std::vector<std::size_t>& rows) {
            return source_share(source.take_rows(rows), filter.take_rows(rows),
                                dim.take_rows(rows), nullptr, nullptr, nullptr, nullptr);
        },
        dim.rows(), bootstrap_b, 0.95, derive_seed(seed, "attribution"));
    res.ci_low = ci.low;
    res.ci_high = ci.high;
    res.bootstrap_used = ci.used;
    return res;
}

}  // namespace mib
