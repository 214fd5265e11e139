#pragma once

#include <algorithm>
#include <cmath>
#include <exception>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "mib/club.hpp"
#include "mib/common.hpp"
#include "mib/ksg.hpp"
#include "mib/mine.hpp"

namespace mib {

/// One pair's estimate record: the neural bracket, its width, the KSG
/// anchor and the fused value.
struct MiBracket {
    double mine = 0.0;      // lower bound after enforcement
    double club = 0.0;      // upper bound
    double delta = 0.0;     // club - mine, >= 0
    double ksg = 0.0;
    double weight = 0.3;    // KSG anchor weight
    double final = 0.0;
    double raw_mine = 0.0;  // pre-enforcement value
};

/// Anchor weight as a function of the bracket width: 0.3 while the bracket
/// is tight, growing by 0.1 per nat of width beyond 1, capped at 0.6.
inline double adaptive_weight(double delta) {
    if (delta < 0.0)
        throw UsageError("adaptive_weight: negative delta; enforce bounds first");
    if (delta <= 1.0) return 0.3;
    return std::min(0.6, 0.3 + 0.1 * delta);
}

/// Fuse the three estimates: enforce mine <= club, weight by bracket width,
/// blend the bracket midpoint with the KSG anchor.
inline MiBracket fuse(double mine, double club, double ksg) {
    if (!std::isfinite(mine) || !std::isfinite(club) || !std::isfinite(ksg))
        throw DomainError("fuse: estimates must be finite");
    MiBracket b;
    b.raw_mine = mine;
    b.mine = std::min(mine, club);
    b.club = club;
    b.delta = b.club - b.mine;
    b.ksg = ksg;
    b.weight = adaptive_weight(b.delta);
    b.final = (1.0 - b.weight) * 0.5 * (b.mine + b.club) + b.weight * b.ksg;
    return b;
}

/// True iff the most recent `window` entries all lie below `threshold`.
inline bool early_stop_check(std::span<const double> deltas, double threshold = 0.1,
                             std::size_t window = 7) {
    if (deltas.size() < window) return false;
    for (std::size_t i = deltas.size() - window; i < deltas.size(); ++i)
        if (!(deltas[i] < threshold)) return false;
    return true;
}

/// Per-epoch trajectory of one ensemble member.
struct TrainTrace {
    std::vector<double> mine, club, delta, lr;
    std::uint64_t member_seed = 0;
    int early_stop_epoch = -1;  // 1-based; -1 when never triggered
    std::size_t epochs() const { return mine.size(); }
};

struct MemberSummary {
    double mine_avg = 0.0;   // mean over the final window
    double club_avg = 0.0;
    std::size_t window = 0;  // epochs actually averaged
};

struct TrainPairConfig {
    std::size_t ensemble = 3;       // independent estimator pairs M
    std::size_t epochs = 100;       // cap T
    std::size_t batch_size = 128;
    double learning_rate = 1e-4;
    double weight_decay = 1e-5;
    bool decoupled_weight_decay = true;
    double clip_norm = 1.0;
    double scheduler_factor = 0.5;
    int scheduler_patience = 10;
    double early_stop_delta = 0.1;
    std::size_t early_stop_epochs = 7;
    std::size_t final_window = 10;  // epochs averaged into the member estimate
    std::size_t hidden_dim = 256;
    double leaky_slope = 0.2;
    double ema_decay = 0.01;
    bool ema_per_batch = true;
    bool mine_ema_gradient = true;
    MarginalMode marginal_mode = MarginalMode::WithinBatch;
    bool club_all_pairs = false;
    KsgConfig ksg;
    std::uint64_t seed = 0;
    std::size_t workers = 1;
};

struct EnsembleResult {
    std::vector<TrainTrace> traces;
    std::vector<MemberSummary> members;
    std::vector<std::uint64_t> member_seeds;
    double ksg_value = 0.0;
    MiBracket bracket;
    TrainPairConfig config;
};

namespace detail {

inline MineHyper mine_hyper_from(const TrainPairConfig& cfg) {
    MineHyper h;
    h.hidden_dim = cfg.hidden_dim;
    h.leaky_slope = cfg.leaky_slope;
    h.lr = cfg.learning_rate;
    h.weight_decay = cfg.weight_decay;
    h.decoupled_weight_decay = cfg.decoupled_weight_decay;
    h.clip_norm = cfg.clip_norm;
    h.ema_decay = cfg.ema_decay;
    h.ema_per_batch = cfg.ema_per_batch;
    h.ema_gradient = cfg.mine_ema_gradient;
    return h;
}

inline ClubHyper club_hyper_from(const TrainPairConfig& cfg) {
    ClubHyper h;
    h.hidden_dim = cfg.hidden_dim;
    h.leaky_slope = cfg.leaky_slope;
    h.lr = cfg.learning_rate;
    h.weight_decay = cfg.weight_decay;
    h.decoupled_weight_decay = cfg.decoupled_weight_decay;
    h.clip_norm = cfg.clip_norm;
    h.all_pairs = cfg.club_all_pairs;
    return h;
}

/// Train one MINE/CLUB pair on a shared minibatch stream with plateau
/// scheduling on the per-epoch gap and early stopping.
inline TrainTrace train_member(const Matrix& x, const Matrix& y,
                               const TrainPairConfig& cfg, std::uint64_t member_seed) {
    TrainTrace trace;
    trace.member_seed = member_seed;
    MineEstimator mine(x.cols(), y.cols(), derive_seed(member_seed, "init.mine"),
                       mine_hyper_from(cfg));
    ClubEstimator club(x.cols(), y.cols(), derive_seed(member_seed, "init.club"),
                       club_hyper_from(cfg));
    nn::PlateauScheduler sched{cfg.scheduler_factor, cfg.scheduler_patience};
    double lr = cfg.learning_rate;
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const std::uint64_t stream_seed = derive_seed(member_seed, "epoch", epoch);
        const double mv =
            mine_train_epoch(mine, x, y, cfg.batch_size, stream_seed, cfg.marginal_mode);
        const double cv =
            club_train_epoch(club, x, y, cfg.batch_size, stream_seed, cfg.marginal_mode);
        trace.mine.push_back(mv);
        trace.club.push_back(cv);
        trace.delta.push_back(cv - mv);
        trace.lr.push_back(lr);
        lr = sched.step(cv - mv, lr);
        mine.optimizer().lr = lr;
        club.optimizer().lr = lr;
        if (early_stop_check(trace.delta, cfg.early_stop_delta, cfg.early_stop_epochs)) {
            trace.early_stop_epoch = static_cast<int>(epoch);
            break;
        }
    }
    return trace;
}

inline MemberSummary summarize_member(const TrainTrace& trace, std::size_t final_window) {
    MemberSummary s;
    const std::size_t n = trace.epochs();
    s.window = std::min(final_window, n);
    for (std::size_t i = n - s.window; i < n; ++i) {
        s.mine_avg += trace.mine[i];
        s.club_avg += trace.club[i];
    }
    s.mine_avg /= static_cast<double>(s.window);
    s.club_avg /= static_cast<double>(s.window);
    return s;
}

}  // namespace detail

/// Full ensemble protocol on a z-scored, row-aligned pair: M independently
/// seeded members, per-member final-window averages, the cross-member mean,
/// one KSG run on the same data, then fusion. Members run in parallel up to
/// cfg.workers; results do not depend on the schedule.
inline EnsembleResult train_pair(const Matrix& x, const Matrix& y,
                                 const TrainPairConfig& cfg) {
    if (x.rows() != y.rows()) throw ShapeError("train_pair: row count mismatch");
    if (x.rows() < 2) throw UsageError("train_pair: need at least 2 rows");
    if (cfg.ensemble == 0) throw UsageError("train_pair: ensemble size must be >= 1");

    EnsembleResult result;
    result.config = cfg;
    result.traces.resize(cfg.ensemble);
    result.member_seeds.resize(cfg.ensemble);
    for (std::size_t m = 0; m < cfg.ensemble; ++m)
        result.member_seeds[m] = derive_seed(cfg.seed, "member", m);

    std::vector<std::exception_ptr> errors(cfg.ensemble);
    auto run_member = [&](std::size_t m) {
        try {
            result.traces[m] = detail::train_member(x, y, cfg, result.member_seeds[m]);
        } catch (...) {
            errors[m] = std::current_exception();
        }
    };

    const std::size_t workers = std::max<std::size_t>(cfg.workers, 1);
    if (workers == 1) {
        for (std::size_t m = 0; m < cfg.ensemble; ++m) run_member(m);
    } else {
        std::size_t next = 0;
        while (next < cfg.ensemble) {
            const std::size_t wave = std::min(workers, cfg.ensemble - next);
            std::vector<std::thread> pool;
            pool.reserve(wave);
            for (std::size_t i = 0; i < wave; ++i) pool.emplace_back(run_member, next + i);
            for (auto& t : pool) t.join();
            next += wave;
        }
    }
    for (std::size_t m = 0; m < cfg.ensemble; ++m) {
        if (errors[m]) {
            try {
                std::rethrow_exception(errors[m]);
            } catch (const Error& e) {
                throw TrainingFault("ensemble member " + std::to_string(m) + ": " +
                                    e.what());
            }
        }
    }

    KsgConfig ksg_cfg = cfg.ksg;
    ksg_cfg.seed = derive_seed(cfg.seed, "ksg");
    result.ksg_value = ksg_estimate(x, y, ksg_cfg);

    double mine_hat = 0.0, club_hat = 0.0;
    for (std::size_t m = 0; m < cfg.ensemble; ++m) {
        result.members.push_back(detail::summarize_member(result.traces[m],
                                                          cfg.final_window));
        mine_hat += result.members[m].mine_avg;
        club_hat += result.members[m].club_avg;
    }
    mine_hat /= static_cast<double>(cfg.ensemble);
    club_hat /= static_cast<double>(cfg.ensemble);
    result.bracket = fuse(mine_hat, club_hat, result.ksg_value);
    return result;
}

}  // namespace mib
