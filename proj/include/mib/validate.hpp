#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "mib/attribution.hpp"
#include "mib/fusion.hpp"
#include "mib/ksg.hpp"
#include "mib/report.hpp"
#include "mib/runner.hpp"
#include "mib/synthetic.hpp"

namespace mib {

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;  // per-cell margins, one line each
};

struct ValidateOptions {
    bool quick = false;        // 3 seeds per statistical check instead of 10
    std::size_t workers = 2;   // ensemble-member parallelism
    std::uint64_t seed = 1;    // battery base seed
    // fault-injection hooks for the self-test of the battery itself
    double (*digamma_override)(double) = nullptr;
    std::optional<std::size_t> ksg_k_override;
};

namespace checks {

inline std::string fmt(double v, int prec = 4) {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(prec);
    os << v;
    return os.str();
}

// --- estimator-fusion arithmetic against the reference rows ---------------

inline CheckResult fusion_table(const ValidateOptions&) {
    struct Row {
        const char* pair;
        double mine, club, ksg, expected;
    };
    const Row rows[] = {
        {"emotion-linguistic", 0.00, 0.14, 0.25, 0.12},
        {"emotion-pathology", 0.00, 0.07, 0.26, 0.10},
        {"linguistic-pathology", 0.00, 0.10, 0.21, 0.10},
        {"source-filter", 0.24, 0.59, 0.60, 0.47},
    };
    CheckResult r{"fusion-table", true, ""};
    for (const Row& row : rows) {
        const MiBracket b = fuse(row.mine, row.club, row.ksg);
        const double err = std::abs(b.final - row.expected);
        const bool ok = err <= 0.005;
        r.passed = r.passed && ok;
        r.detail += std::string("  ") + row.pair + ": final=" + fmt(b.final) +
                    " expected=" + fmt(row.expected) + " |err|=" + fmt(err) +
                    (ok ? " <= 0.005\n" : " EXCEEDS 0.005\n");
    }
    return r;
}

// --- Gaussian oracle grid --------------------------------------------------

struct GridCell {
    bool ok = false;
    double ksg = 0, mine = 0, club = 0, final_v = 0, seconds = 0;
    std::string error;
};

inline GridCell run_grid_cell(const ValidateOptions& opts, double rho, double truth,
                              std::uint64_t cell_seed) {
    GridCell cell;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        SyntheticSpec spec;
        spec.family = SynthFamily::CorrelatedGaussian;
        spec.rho = rho;
        spec.n = 2000;
        spec.seed = derive_seed(cell_seed, "data");
        SyntheticPair data = synth_generate(spec);
        const Matrix zx = zscore_columns(data.x.values);
        const Matrix zy = zscore_columns(data.y.values);

        TrainPairConfig cfg;
        cfg.seed = derive_seed(cell_seed, "train");
        cfg.workers = opts.workers;
        if (opts.ksg_k_override) cfg.ksg.k = *opts.ksg_k_override;
        EnsembleResult res = train_pair(zx, zy, cfg);

        cell.ksg = res.ksg_value;
        if (opts.digamma_override) {
            KsgConfig kc = cfg.ksg;
            kc.seed = derive_seed(cfg.seed, "ksg");
            cell.ksg = ksg_from_parts(ksg_parts(zx, zy, kc), opts.digamma_override);
        }
        cell.mine = res.bracket.raw_mine;
        cell.club = res.bracket.club;
        cell.final_v = fuse(cell.mine, cell.club, cell.ksg).final;
        cell.ok = std::abs(cell.ksg - truth) <= 0.08 &&
                  cell.mine >= truth - 0.15 && cell.mine <= truth + 0.05 &&
                  cell.club >= truth - 0.05 && cell.club <= truth + 0.25 &&
                  std::abs(cell.final_v - truth) <= 0.12;
    } catch (const Error& e) {
        cell.error = e.what();
        cell.ok = false;
    }
    cell.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (cell.seconds > 60.0) cell.ok = false;
    return cell;
}

inline CheckResult gaussian_grid(const ValidateOptions& opts) {
    const double rhos[] = {0.0, 0.3, 0.6, 0.9};
    const std::size_t n_seeds = opts.quick ? 3 : 10;
    const std::size_t need = opts.quick ? 2 : 9;  // >= 90% at full depth
    CheckResult r{"gaussian-oracle-grid", true, ""};
    for (std::size_t ri = 0; ri < 4; ++ri) {
        const double rho = rhos[ri];
        const double truth = -0.5 * std::log(1.0 - rho * rho);
        std::size_t passed = 0;
        double max_sec = 0.0;
        double worst_ksg = 0.0, worst_mine_lo = 1e9, worst_mine_hi = -1e9,
               worst_club_lo = 1e9, worst_club_hi = -1e9, worst_final = 0.0;
        std::string first_error;
        for (std::size_t s = 0; s < n_seeds; ++s) {
            const GridCell cell =
                run_grid_cell(opts, rho, truth, derive_seed(opts.seed, "grid", ri, s));
            if (cell.ok) ++passed;
            if (!cell.error.empty() && first_error.empty()) first_error = cell.error;
            max_sec = std::max(max_sec, cell.seconds);
            worst_ksg = std::max(worst_ksg, std::abs(cell.ksg - truth));
            worst_mine_lo = std::min(worst_mine_lo, cell.mine - truth);
            worst_mine_hi = std::max(worst_mine_hi, cell.mine - truth);
            worst_club_lo = std::min(worst_club_lo, cell.club - truth);
            worst_club_hi = std::max(worst_club_hi, cell.club - truth);
            worst_final = std::max(worst_final, std::abs(cell.final_v - truth));
        }
        const bool ok = passed >= need;
        r.passed = r.passed && ok;
        r.detail += "  rho=" + fmt(rho, 1) + " truth=" + fmt(truth) + ": " +
                    std::to_string(passed) + "/" + std::to_string(n_seeds) +
                    " runs in-band; |ksg err|<=" + fmt(worst_ksg) + " mine-truth in [" +
                    fmt(worst_mine_lo) + "," + fmt(worst_mine_hi) + "] club-truth in [" +
                    fmt(worst_club_lo) + "," + fmt(worst_club_hi) + "] |final err|<=" +
                    fmt(worst_final) + " max " + fmt(max_sec, 1) + "s" +
                    (ok ? "\n" : " FAIL\n");
        if (!first_error.empty()) r.detail += "    error: " + first_error + "\n";
    }
    return r;
}

// --- independence null under random cross-corpus pairing -------------------

inline CheckResult independence_null(const ValidateOptions& opts) {
    const std::size_t n_seeds = opts.quick ? 3 : 10;
    const std::size_t need = opts.quick ? 2 : 8;  // >= 80%
    CheckResult r{"independence-null", true, ""};
    std::size_t passed = 0;
    double worst_final = 0.0;
    int worst_stop = 0;
    for (std::size_t s = 0; s < n_seeds; ++s) {
        const std::uint64_t run_seed = derive_seed(opts.seed, "null", s);
        SyntheticSpec a, b;
        a.family = b.family = SynthFamily::CorrelatedGaussian;
        a.rho = 0.7;
        b.rho = 0.5;
        a.d_x = 2; a.d_y = 2;
        b.d_x = 3; b.d_y = 3;
        a.n = b.n = 1000;
        a.seed = derive_seed(run_seed, "corpus-a");
        b.seed = derive_seed(run_seed, "corpus-b");
        // unrelated corpora: x features of A paired with y features of B
        const FeatureMatrix xa = synth_generate(a).x;
        const FeatureMatrix yb = synth_generate(b).y;
        AlignedPair ap = pair_alignment(xa, yb, PairingPolicy::RandomPairing,
                                        derive_seed(run_seed, "pairing"));
        const auto rows = stratified_sample_indices({}, ap.x.rows(), 500,
                                                    derive_seed(run_seed, "sample"));
        const Matrix zx = zscore_columns(ap.x.take_rows(rows).values);
        const Matrix zy = zscore_columns(ap.y.take_rows(rows).values);
        TrainPairConfig cfg;
        cfg.seed = derive_seed(run_seed, "train");
        cfg.workers = opts.workers;
        const EnsembleResult res = train_pair(zx, zy, cfg);
        bool stopped_early = true;
        int latest_stop = 0;
        for (const auto& t : res.traces) {
            stopped_early = stopped_early && t.early_stop_epoch > 0 &&
                            t.early_stop_epoch <= 30;
            latest_stop = std::max(latest_stop,
                                   t.early_stop_epoch > 0 ? t.early_stop_epoch
                                                          : static_cast<int>(t.epochs()));
        }
        const bool ok = std::abs(res.bracket.final) <= 0.08 && stopped_early;
        if (ok) ++passed;
        worst_final = std::max(worst_final, std::abs(res.bracket.final));
        worst_stop = std::max(worst_stop, latest_stop);
    }
    r.passed = passed >= need;
    r.detail = "  " + std::to_string(passed) + "/" + std::to_string(n_seeds) +
               " runs with |final| <= 0.08 and early stop <= 30 epochs; worst |final|=" +
               fmt(worst_final) + ", latest stop epoch " + std::to_string(worst_stop) +
               (r.passed ? "\n" : " FAIL\n");
    return r;
}

// --- finite-difference gradient audit --------------------------------------

inline double mine_surrogate_loss(const MineEstimator& est, const Matrix& x,
                                  const Matrix& y,
                                  std::span<const std::size_t> joint_rows,
                                  std::span<const std::size_t> marg_rows, double zhat) {
    const auto s = detail::mine_eval_batch(est, x, y, joint_rows, marg_rows);
    return -s.mean_t_joint + s.mean_exp_marg / (zhat + est.ema().floor);
}

struct FdWorst {
    double rel = 0.0;
    std::string param;
};

template <typename LossFn>
void fd_audit_params(const std::vector<nn::ParamRef>& params, LossFn&& loss,
                     FdWorst& worst) {
    const double h = 1e-5;
    for (const auto& p : params) {
        for (std::size_t i = 0; i < p.size; ++i) {
            const double saved = p.value[i];
            p.value[i] = saved + h;
            const double up = loss();
            p.value[i] = saved - h;
            const double down = loss();
            p.value[i] = saved;
            const double fd = (up - down) / (2.0 * h);
            const double analytic = p.grad[i];
            const double rel = std::abs(analytic - fd) /
                               std::max({std::abs(analytic), std::abs(fd), 1e-8});
            if (rel > worst.rel) {
                worst.rel = rel;
                worst.param = p.name + "[" + std::to_string(i) + "]";
            }
        }
    }
}

inline CheckResult gradient_audit(const ValidateOptions& opts) {
    CheckResult r{"gradient-audit", true, ""};
    FdWorst worst_mine, worst_club;
    const std::size_t points = 5;
    const std::size_t batch = 16;
    // audit at a generic point: output layers start at zero, which would
    // zero out most of the gradient field
    auto scatter_output_layer = [](nn::MlpNet& net, std::mt19937_64& r) {
        std::uniform_real_distribution<double> u(-0.3, 0.3);
        for (double& w : net.layer2().w) w = u(r);
        for (double& b : net.layer2().b) b = u(r);
    };
    for (std::size_t pt = 0; pt < points; ++pt) {
        const std::uint64_t seed = derive_seed(opts.seed, "fd", pt);
        std::mt19937_64 rng(derive_seed(seed, "data"));
        std::normal_distribution<double> g(0.0, 1.0);
        Matrix x(batch, 3), y(batch, 2);
        for (auto& v : x.data()) v = g(rng);
        for (auto& v : y.data()) v = g(rng);
        std::vector<std::size_t> joint(batch), marg(batch);
        std::iota(joint.begin(), joint.end(), 0);
        marg = joint;
        std::shuffle(marg.begin(), marg.end(), rng);

        MineEstimator mine(3, 2, derive_seed(seed, "mine"));
        scatter_output_layer(mine.critic(), rng);
        // warm the EMA on a different marginal draw first; a denominator
        // equal to the audited batch's own mean exp makes the joint and
        // marginal contributions cancel on input-independent coordinates,
        // leaving nothing but FD roundoff to compare against
        std::vector<std::size_t> warm = joint;
        std::shuffle(warm.begin(), warm.end(), rng);
        mine.ema().update(detail::mine_marginal_mean_exp(mine, x, y, joint, warm));
        const double mean_exp = detail::mine_marginal_mean_exp(mine, x, y, joint, marg);
        const double zhat = mine.ema().update(mean_exp);
        mine.critic().zero_grad();
        mine_accumulate_gradients(mine, x, y, joint, marg, zhat);
        auto mine_params = mine.critic().params("critic.");
        fd_audit_params(mine_params,
                        [&] { return mine_surrogate_loss(mine, x, y, joint, marg, zhat); },
                        worst_mine);

        ClubEstimator club(3, 2, derive_seed(seed, "club"));
        scatter_output_layer(club.mean_net(), rng);
        scatter_output_layer(club.logvar_net(), rng);
        club.zero_grad();
        club_accumulate_gradients(club, x, y, joint);
        auto club_params = club.params();
        fd_audit_params(club_params,
                        [&] {
                            // recompute the batch NLL without touching gradients
                            double nll = 0.0;
                            for (std::size_t row : joint) {
                                nll -= club.log_likelihood({x.row(row), x.cols()},
                                                           {y.row(row), y.cols()}) /
                                       static_cast<double>(batch);
                            }
                            return nll;
                        },
                        worst_club);
    }
    const bool mine_ok = worst_mine.rel < 1e-4;
    const bool club_ok = worst_club.rel < 1e-4;
    r.passed = mine_ok && club_ok;
    r.detail = "  lower-bound critic: worst rel err " + fmt(worst_mine.rel, 8) + " at " +
               worst_mine.param + (mine_ok ? "\n" : " FAIL\n") +
               "  upper-bound heads:  worst rel err " + fmt(worst_club.rel, 8) + " at " +
               worst_club.param + (club_ok ? "\n" : " FAIL\n");
    return r;
}

// --- kd-tree vs brute-force structural equivalence -------------------------

inline CheckResult ksg_structural(const ValidateOptions& opts) {
    CheckResult r{"ksg-structural-equivalence", true, ""};
    std::size_t mismatches = 0;
    double max_est_diff = 0.0;
    for (std::size_t i = 0; i < 20; ++i) {
        std::mt19937_64 rng(derive_seed(opts.seed, "struct", i));
        std::uniform_int_distribution<std::size_t> n_pick(50, 300);
        std::uniform_int_distribution<std::size_t> d_pick(1, 4);
        const std::size_t n = n_pick(rng), dx = d_pick(rng), dy = d_pick(rng);
        std::normal_distribution<double> g(0.0, 1.0);
        Matrix x(n, dx), y(n, dy);
        for (auto& v : x.data()) v = g(rng);
        for (auto& v : y.data()) v = g(rng);
        // duplicate a block of rows to stress tie handling
        for (std::size_t row = 0; row < n / 10; ++row) {
            for (std::size_t j = 0; j < dx; ++j) x(n - 1 - row, j) = x(row, j);
            for (std::size_t j = 0; j < dy; ++j) y(n - 1 - row, j) = y(row, j);
        }
        KsgConfig tree_cfg, brute_cfg;
        tree_cfg.seed = brute_cfg.seed = derive_seed(opts.seed, "struct.jitter", i);
        brute_cfg.brute_force = true;
        const KsgParts pt = ksg_parts(x, y, tree_cfg);
        const KsgParts pb = ksg_parts(x, y, brute_cfg);
        const bool same_counts = pt.nx == pb.nx && pt.ny == pb.ny && pt.radii == pb.radii;
        const double et = ksg_from_parts(pt);
        const double eb = ksg_from_parts(pb);
        max_est_diff = std::max(max_est_diff, std::abs(et - eb));
        if (!same_counts || et != eb) ++mismatches;
    }
    r.passed = mismatches == 0;
    r.detail = "  20 datasets (N in [50,300], duplicates injected): " +
               std::to_string(20 - mismatches) +
               "/20 identical counts and estimates; max |est diff|=" +
               fmt(max_est_diff, 12) + (r.passed ? "\n" : " FAIL\n");
    return r;
}

// --- variance clamping under a deterministic map ----------------------------

inline CheckResult club_clamp_stress(const ValidateOptions& opts) {
    CheckResult r{"club-clamp-stress", true, ""};
    SyntheticSpec spec;
    spec.family = SynthFamily::DeterministicMap;
    spec.d_x = spec.d_y = 1;
    spec.n = 500;
    spec.seed = derive_seed(opts.seed, "clamp");
    const SyntheticPair data = synth_generate(spec);
    const Matrix zx = zscore_columns(data.x.values);
    const Matrix zy = zscore_columns(data.y.values);
    ClubEstimator club(1, 1, derive_seed(opts.seed, "clamp.init"));
    bool all_finite = true;
    double last_bound = 0.0;
    for (std::size_t epoch = 1; epoch <= 100; ++epoch) {
        last_bound = club_train_epoch(club, zx, zy, 128,
                                      derive_seed(opts.seed, "clamp.epoch", epoch));
        all_finite = all_finite && std::isfinite(last_bound);
    }
    const bool lv_ok = club.emitted_logvar_min() >= kClubLogVarLo &&
                       club.emitted_logvar_max() <= kClubLogVarHi;
    r.passed = all_finite && lv_ok;
    r.detail = "  100 epochs on y=x: bounds finite=" + std::string(all_finite ? "yes" : "NO") +
               ", emitted logvar range [" + fmt(club.emitted_logvar_min()) + ", " +
               fmt(club.emitted_logvar_max()) + "] within [-6, 2]=" +
               (lv_ok ? "yes" : "NO") + ", last bound " + fmt(last_bound) +
               (r.passed ? "\n" : " FAIL\n");
    return r;
}

// --- attribution construction oracle ----------------------------------------

inline CheckResult attribution_check(const ValidateOptions& opts) {
    CheckResult r{"attribution", true, ""};
    const std::size_t n = 800;
    std::mt19937_64 rng(derive_seed(opts.seed, "attr"));
    std::normal_distribution<double> g(0.0, 1.0);
    Matrix source(n, 3), filter(n, 3), dim(n, 2);
    for (auto& v : source.data()) v = g(rng);
    for (auto& v : filter.data()) v = g(rng);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < 2; ++j)
            dim(i, j) = 0.9 * source(i, j) + 0.1 * g(rng);

    KsgConfig kc;
    kc.seed = derive_seed(opts.seed, "attr.ksg");
    const AttributionResult a =
        attribute(source, filter, dim, kc, 10, derive_seed(opts.seed, "attr.seed"), "dim");
    const AttributionResult swapped =
        attribute(filter, source, dim, kc, 10, derive_seed(opts.seed, "attr.seed"), "dim");
    const AttributionResult again =
        attribute(source, filter, dim, kc, 10, derive_seed(opts.seed, "attr.seed"), "dim");

    const bool dominant = a.a_source > 0.9;
    const bool complement = swapped.a_source == a.a_filter &&
                            std::abs(swapped.a_source - (1.0 - a.a_source)) <= 1e-12;
    const bool sums = std::abs(a.a_source + a.a_filter - 1.0) <= 1e-12;
    const bool deterministic = a.ci_low == again.ci_low && a.ci_high == again.ci_high &&
                               a.a_source == again.a_source && a.bootstrap_b == 10;
    r.passed = dominant && complement && sums && deterministic;
    r.detail = "  source-coupled dimension: A_source=" + fmt(a.a_source) + " (> 0.9: " +
               (dominant ? "yes" : "NO") + "), swap complement exact: " +
               (complement ? "yes" : "NO") + ", shares sum to 1: " + (sums ? "yes" : "NO") +
               ", B=10 CI deterministic: " + (deterministic ? "yes" : "NO") + " CI=[" +
               fmt(a.ci_low) + ", " + fmt(a.ci_high) + "]" + (r.passed ? "\n" : " FAIL\n");
    return r;
}

// --- report determinism ------------------------------------------------------

inline RunConfig determinism_config(std::uint64_t seed) {
    RunConfig cfg;
    cfg.seed = seed;
    cfg.n_samples = 300;
    cfg.ensemble = 2;
    cfg.epochs = 12;
    cfg.batch_size = 64;
    PairSpec coupled;
    coupled.name = "coupled";
    SyntheticSpec cs;
    cs.rho = 0.8;
    cs.n = 400;
    cs.seed = derive_seed(seed, "det.coupled");
    coupled.synth = cs;
    PairSpec indep;
    indep.name = "independent";
    SyntheticSpec is;
    is.family = SynthFamily::IndependentUniform;
    is.n = 400;
    is.seed = derive_seed(seed, "det.indep");
    indep.synth = is;
    cfg.pairs = {coupled, indep};
    return cfg;
}

inline CheckResult determinism(const ValidateOptions& opts) {
    CheckResult r{"determinism", true, ""};
    RunConfig cfg = determinism_config(derive_seed(opts.seed, "det"));
    cfg.workers = 1;
    const std::string first = report_to_json(run_estimate(cfg)).dump(2);
    const std::string rerun = report_to_json(run_estimate(cfg)).dump(2);
    const bool identical = first == rerun;
    // the member schedule must not leak into results either
    cfg.workers = std::max<std::size_t>(opts.workers, 2);
    json threaded = report_to_json(run_estimate(cfg));
    json serial = json::parse(first);
    serial["config"].erase("workers");
    threaded["config"].erase("workers");
    const bool schedule_free = serial.dump(2) == threaded.dump(2);
    r.passed = identical && schedule_free;
    r.detail = "  same master seed, rerun: report body byte-identical: " +
               std::string(identical ? "yes" : "NO") + " (" +
               std::to_string(first.size()) + " bytes); workers 1 vs " +
               std::to_string(cfg.workers) + " equivalent: " +
               (schedule_free ? "yes" : "NO") + "\n";
    return r;
}

}  // namespace checks

/// The full acceptance battery, in criterion order.
inline std::vector<CheckResult> run_validation(const ValidateOptions& opts = {}) {
    std::vector<CheckResult> results;
    results.push_back(checks::fusion_table(opts));
    results.push_back(checks::gaussian_grid(opts));
    results.push_back(checks::independence_null(opts));
    results.push_back(checks::gradient_audit(opts));
    results.push_back(checks::ksg_structural(opts));
    results.push_back(checks::club_clamp_stress(opts));
    results.push_back(checks::attribution_check(opts));
    results.push_back(checks::determinism(opts));
    return results;
}

}  // namespace mib
