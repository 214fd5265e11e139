#pragma once

#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "mib/attribution.hpp"
#include "mib/config.hpp"
#include "mib/fusion.hpp"
#include "mib/preprocess.hpp"
#include "mib/synthetic.hpp"

namespace mib {

/// Everything reported for one estimated pair, including the audit trail
/// (row composition, normalisation stats) needed to replay it.
struct PairReport {
    std::string name;
    std::string combination;
    std::string policy;
    std::string x_provenance, y_provenance;
    std::size_t rows_used = 0;
    double true_mi = std::numeric_limits<double>::quiet_NaN();  // synthetic pairs only
    EnsembleResult ensemble;
    double mine_zero_clamped = 0.0;  // reporting-layer floor of the lower bound
    std::vector<ColumnStats> x_stats, y_stats;
    std::vector<std::size_t> x_rows, y_rows;  // original rows, pair order
    std::vector<std::string> warnings;
};

struct RunReport {
    RunConfig config;
    std::vector<PairReport> pairs;
    std::vector<AttributionResult> attributions;
    double wall_seconds = 0.0;  // serialized to the sidecar, not the report body
};

namespace detail {

inline std::vector<std::size_t> compose_rows(const std::vector<std::size_t>& outer,
                                             const std::vector<std::size_t>& inner) {
    std::vector<std::size_t> out;
    out.reserve(inner.size());
    for (std::size_t i : inner) out.push_back(outer[i]);
    return out;
}

}  // namespace detail

/// Full pipeline for one configured pair: obtain, align, subsample,
/// normalise, train the ensemble, fuse.
inline PairReport run_single_pair(const RunConfig& cfg, const PairSpec& spec) {
    PairReport rep;
    rep.name = spec.name;
    rep.combination = spec.combination;

    FeatureMatrix x, y;
    PairingPolicy policy;
    if (spec.synth) {
        SyntheticPair g = synth_generate(*spec.synth);
        x = std::move(g.x);
        y = std::move(g.y);
        rep.true_mi = g.true_mi;
        // synthetic pairs are row-coupled by construction
        policy = spec.pairing.value_or(PairingPolicy::SameRows);
    } else {
        x = load_features(spec.x_path);
        y = load_features(spec.y_path);
        policy = spec.pairing.value_or(cfg.pairing_enum());
    }
    rep.policy = to_string(policy);
    rep.x_provenance = x.provenance;
    rep.y_provenance = y.provenance;
    if (policy == PairingPolicy::SameRows && !spec.synth &&
        x.provenance != y.provenance)
        rep.warnings.push_back("same-rows pairing across differing provenances");

    const std::uint64_t pair_seed = derive_seed(cfg.seed, "pair", fnv1a64(spec.name));
    AlignedPair aligned =
        pair_alignment(x, y, policy, derive_seed(pair_seed, "pairing"));
    rep.x_rows = aligned.x_rows;
    rep.y_rows = aligned.y_rows;

    if (cfg.n_samples < aligned.x.rows()) {
        const auto& strata = aligned.x.has_strata() ? aligned.x.strata : aligned.y.strata;
        const auto sample_idx = stratified_sample_indices(
            strata, aligned.x.rows(), cfg.n_samples, derive_seed(pair_seed, "sample"));
        aligned.x = aligned.x.take_rows(sample_idx);
        aligned.y = aligned.y.take_rows(sample_idx);
        rep.x_rows = detail::compose_rows(rep.x_rows, sample_idx);
        rep.y_rows = detail::compose_rows(rep.y_rows, sample_idx);
    }
    rep.rows_used = aligned.x.rows();

    ZScoreResult zx = zscore(aligned.x);
    ZScoreResult zy = zscore(aligned.y);
    rep.x_stats = zx.stats;
    rep.y_stats = zy.stats;
    for (const auto& w : zx.warnings) rep.warnings.push_back("x: " + w);
    for (const auto& w : zy.warnings) rep.warnings.push_back("y: " + w);

    TrainPairConfig tcfg = cfg.trainer_config();
    tcfg.seed = pair_seed;
    rep.ensemble = train_pair(zx.matrix.values, zy.matrix.values, tcfg);
    rep.mine_zero_clamped = std::max(0.0, rep.ensemble.bracket.mine);
    return rep;
}

inline std::vector<AttributionResult> run_attribution(const RunConfig& cfg) {
    if (!cfg.attribution) return {};
    const AttributionSpec& spec = *cfg.attribution;
    FeatureMatrix source = load_features(spec.source_path);
    FeatureMatrix filter = load_features(spec.filter_path);
    if (source.rows() != filter.rows())
        throw UsageError("attribution: source and filter row counts differ");

    const std::size_t original_n = source.rows();
    std::vector<std::size_t> rows(original_n);
    std::iota(rows.begin(), rows.end(), 0);
    if (cfg.n_samples < original_n) {
        rows = stratified_sample_indices(source.strata, original_n, cfg.n_samples,
                                         derive_seed(cfg.seed, "attribution.sample"));
        source = source.take_rows(rows);
        filter = filter.take_rows(rows);
    }

    KsgConfig ksg_cfg;
    ksg_cfg.k = cfg.ksg_k;
    ksg_cfg.noise = cfg.ksg_noise;
    ksg_cfg.seed = derive_seed(cfg.seed, "attribution.ksg");

    std::vector<AttributionResult> out;
    for (const auto& dim_spec : spec.dimensions) {
        FeatureMatrix dim = load_features(dim_spec.path);
        if (dim.rows() != original_n)
            throw UsageError("attribution: dimension '" + dim_spec.name +
                             "' is not row-aligned with source/filter");
        dim = dim.take_rows(rows);
        out.push_back(attribute(source.values, filter.values, dim.values, ksg_cfg,
                                cfg.bootstrap,
                                derive_seed(cfg.seed, "attribution", fnv1a64(dim_spec.name)),
                                dim_spec.name));
    }
    return out;
}

/// Run every configured pair (and the attribution block when present).
inline RunReport run_estimate(const RunConfig& cfg) {
    cfg.validate(/*require_pairs=*/true);
    const auto t0 = std::chrono::steady_clock::now();
    RunReport report;
    report.config = cfg;
    for (const auto& spec : cfg.pairs) report.pairs.push_back(run_single_pair(cfg, spec));
    report.attributions = run_attribution(cfg);
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

}  // namespace mib
