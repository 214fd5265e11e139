#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "mib/batching.hpp"
#include "mib/common.hpp"
#include "mib/nn.hpp"
#include "mib/optim.hpp"

namespace mib {

/// Exponential moving average of the partition function estimate, with
/// geometric-decay bias correction. The corrected value recovers the first
/// sample exactly (zbar starts at 0).
struct EmaState {
    double zbar = 0.0;
    double alpha = 0.01;
    std::uint64_t t = 0;
    double floor = 1e-8;

    /// zbar <- (1-alpha) zbar + alpha * batch_mean_exp; returns corrected
    /// estimate zbar / (1 - (1-alpha)^t).
    double update(double batch_mean_exp) {
        if (!(batch_mean_exp > 0.0) || !std::isfinite(batch_mean_exp))
            throw DomainError("ema_update: input must be positive and finite");
        zbar = (1.0 - alpha) * zbar + alpha * batch_mean_exp;
        ++t;
        return corrected();
    }

    double corrected() const {
        if (t == 0) throw UsageError("ema corrected value undefined before first update");
        return zbar / (1.0 - std::pow(1.0 - alpha, static_cast<double>(t)));
    }
};

struct MineHyper {
    std::size_t hidden_dim = 256;
    double leaky_slope = 0.2;
    double lr = 1e-4;
    double weight_decay = 1e-5;
    bool decoupled_weight_decay = true;
    double clip_norm = 1.0;
    double ema_decay = 0.01;
    bool ema_per_batch = true;  // false: one EMA update per epoch
    // Gradient denominator for the log-partition term. With the EMA value a
    // single heavy-tailed exp(T) spike inflates the denominator for hundreds
    // of batches, the marginal pull-down vanishes and the critic ramps off to
    // -inf objectives on strongly dependent pairs. The per-batch mean keeps
    // the denominator calibrated at the cost of extra gradient bias.
    bool ema_gradient = true;
};

/// Donsker-Varadhan lower-bound estimator with an EMA-stabilised partition
/// function. The critic scores concatenated [x; y] pairs.
class MineEstimator {
public:
    MineEstimator(std::size_t d_x, std::size_t d_y, std::uint64_t seed,
                  const MineHyper& hyper = {})
        : dx_(d_x), dy_(d_y), hyper_(hyper),
          critic_(d_x + d_y, 1, derive_seed(seed, "mine.critic"),
                  hyper.hidden_dim, hyper.leaky_slope) {
        ema_.alpha = hyper.ema_decay;
        auto prefs = critic_.params("critic.");
        opt_ = nn::AdamState(prefs, hyper.lr, hyper.weight_decay,
                             hyper.decoupled_weight_decay);
    }

    std::size_t d_x() const { return dx_; }
    std::size_t d_y() const { return dy_; }
    nn::MlpNet& critic() { return critic_; }
    const nn::MlpNet& critic() const { return critic_; }
    EmaState& ema() { return ema_; }
    const EmaState& ema() const { return ema_; }
    nn::AdamState& optimizer() { return opt_; }
    const MineHyper& hyper() const { return hyper_; }

    /// T(x, y) for a single pair, concatenation order x-then-y.
    double score(std::span<const double> x, std::span<const double> y) const {
        check_pair(x.size(), y.size());
        std::vector<double> in(dx_ + dy_);
        std::copy(x.begin(), x.end(), in.begin());
        std::copy(y.begin(), y.end(), in.begin() + static_cast<long>(dx_));
        return critic_.forward(in)[0];
    }

    void check_pair(std::size_t nx, std::size_t ny) const {
        if (nx != dx_ || ny != dy_)
            throw ShapeError("mine critic: pair widths (" + std::to_string(nx) + ", " +
                             std::to_string(ny) + "), expected (" + std::to_string(dx_) +
                             ", " + std::to_string(dy_) + ")");
    }

private:
    std::size_t dx_, dy_;
    MineHyper hyper_;
    nn::MlpNet critic_;
    EmaState ema_;
    nn::AdamState opt_;
};

inline double critic_score(const MineEstimator& est, std::span<const double> x,
                           std::span<const double> y) {
    return est.score(x, y);
}

namespace detail {

inline void fill_pair_input(std::vector<double>& buf, const Matrix& x, const Matrix& y,
                            std::size_t xi, std::size_t yi) {
    const std::size_t dx = x.cols(), dy = y.cols();
    buf.resize(dx + dy);
    const double* xr = x.row(xi);
    const double* yr = y.row(yi);
    std::copy(xr, xr + dx, buf.begin());
    std::copy(yr, yr + dy, buf.begin() + static_cast<long>(dx));
}

struct MineBatchStats {
    double mean_t_joint = 0.0;
    double mean_exp_marg = 0.0;
};

/// Critic statistics of one batch, no caches kept.
inline MineBatchStats mine_eval_batch(const MineEstimator& est, const Matrix& x,
                                      const Matrix& y,
                                      std::span<const std::size_t> joint_rows,
                                      std::span<const std::size_t> marg_y_rows) {
    if (joint_rows.empty()) throw UsageError("mine objective: empty batch");
    if (joint_rows.size() != marg_y_rows.size())
        throw UsageError("mine objective: joint and marginal batch sizes differ");
    est.check_pair(x.cols(), y.cols());
    MineBatchStats s;
    std::vector<double> in;
    const double bs = static_cast<double>(joint_rows.size());
    for (std::size_t i = 0; i < joint_rows.size(); ++i) {
        fill_pair_input(in, x, y, joint_rows[i], joint_rows[i]);
        s.mean_t_joint += est.critic().forward(in)[0] / bs;
        fill_pair_input(in, x, y, joint_rows[i], marg_y_rows[i]);
        s.mean_exp_marg += std::exp(est.critic().forward(in)[0]) / bs;
    }
    return s;
}

}  // namespace detail

/// Stabilised batch objective: mean_joint T - log(Zhat + floor), where Zhat
/// is the bias-corrected EMA fed with mean(exp T) over the marginal batch.
/// Advances the EMA state.
inline double mine_batch_objective(MineEstimator& est, const Matrix& x, const Matrix& y,
                                   std::span<const std::size_t> joint_rows,
                                   std::span<const std::size_t> marg_y_rows) {
    const auto s = detail::mine_eval_batch(est, x, y, joint_rows, marg_y_rows);
    const double zhat = est.ema().update(s.mean_exp_marg);
    return s.mean_t_joint - std::log(zhat + est.ema().floor);
}

namespace detail {

/// Accumulate critic gradients for one batch, treating the denominator as a
/// constant (stop-gradient). Returns the joint-batch mean score. No clipping
/// or optimiser step.
inline double mine_joint_mean_with_gradients(MineEstimator& est, const Matrix& x,
                                             const Matrix& y,
                                             std::span<const std::size_t> joint_rows,
                                             std::span<const std::size_t> marg_y_rows,
                                             double denominator) {
    if (joint_rows.empty()) throw UsageError("mine gradients: empty batch");
    est.check_pair(x.cols(), y.cols());
    auto& net = est.critic();
    const double bs = static_cast<double>(joint_rows.size());
    const double denom = denominator + est.ema().floor;
    std::vector<double> in;
    std::vector<double> out(1);
    nn::MlpCache cache;
    double mean_t_joint = 0.0;
    // minimising the negated bound: joint samples push T up ...
    for (std::size_t i = 0; i < joint_rows.size(); ++i) {
        fill_pair_input(in, x, y, joint_rows[i], joint_rows[i]);
        net.forward(in, out, cache);
        mean_t_joint += out[0] / bs;
        const double g[1] = {-1.0 / bs};
        net.backward(cache, g);
    }
    // ... marginal samples push exp(T)/denom down
    for (std::size_t i = 0; i < joint_rows.size(); ++i) {
        fill_pair_input(in, x, y, joint_rows[i], marg_y_rows[i]);
        net.forward(in, out, cache);
        const double e = std::exp(out[0]);
        const double g[1] = {e / (bs * denom)};
        net.backward(cache, g);
    }
    return mean_t_joint;
}

}  // namespace detail

/// Accumulate critic gradients of the stabilised objective for one batch
/// with an explicit stop-gradient denominator. Returns the batch objective
/// evaluated at that denominator.
inline double mine_accumulate_gradients(MineEstimator& est, const Matrix& x,
                                        const Matrix& y,
                                        std::span<const std::size_t> joint_rows,
                                        std::span<const std::size_t> marg_y_rows,
                                        double zhat) {
    const double mean_t = detail::mine_joint_mean_with_gradients(
        est, x, y, joint_rows, marg_y_rows, zhat);
    return mean_t - std::log(zhat + est.ema().floor);
}

namespace detail {

inline double mine_marginal_mean_exp(const MineEstimator& est, const Matrix& x,
                                     const Matrix& y,
                                     std::span<const std::size_t> joint_rows,
                                     std::span<const std::size_t> marg_y_rows) {
    std::vector<double> in;
    double mean_exp = 0.0;
    const double bs = static_cast<double>(joint_rows.size());
    for (std::size_t i = 0; i < joint_rows.size(); ++i) {
        fill_pair_input(in, x, y, joint_rows[i], marg_y_rows[i]);
        mean_exp += std::exp(est.critic().forward(in)[0]) / bs;
    }
    return mean_exp;
}

}  // namespace detail

/// One training epoch over a seeded minibatch stream: per batch, fresh
/// marginal pairing, backprop with stop-gradient denominator, clip, Adam
/// step. The reported value always follows the EMA-stabilised objective.
/// Returns the epoch-mean objective.
inline double mine_train_epoch(MineEstimator& est, const Matrix& x, const Matrix& y,
                               std::size_t batch_size, std::uint64_t stream_seed,
                               MarginalMode mode = MarginalMode::WithinBatch) {
    if (x.rows() != y.rows()) throw ShapeError("mine_train_epoch: row count mismatch");
    const BatchPlan plan = make_batch_plan(x.rows(), batch_size, stream_seed, mode);
    auto params = est.critic().params("critic.");
    double epoch_sum = 0.0;
    double epoch_mean_exp = 0.0;
    for (std::size_t b = 0; b < plan.joint.size(); ++b) {
        const double batch_mean_exp =
            detail::mine_marginal_mean_exp(est, x, y, plan.joint[b], plan.marg_y[b]);
        double zhat;
        if (est.hyper().ema_per_batch) {
            zhat = est.ema().update(batch_mean_exp);
        } else {
            // literal per-epoch reading of the EMA recurrence
            zhat = est.ema().t > 0 ? est.ema().corrected() : batch_mean_exp;
            epoch_mean_exp += batch_mean_exp / static_cast<double>(plan.joint.size());
        }
        const double grad_denom = est.hyper().ema_gradient ? zhat : batch_mean_exp;
        est.critic().zero_grad();
        const double mean_t = detail::mine_joint_mean_with_gradients(
            est, x, y, plan.joint[b], plan.marg_y[b], grad_denom);
        epoch_sum += mean_t - std::log(zhat + est.ema().floor);
        nn::clip_grad_norm(params, est.hyper().clip_norm);
        est.optimizer().step(params);
    }
    if (!est.hyper().ema_per_batch) est.ema().update(epoch_mean_exp);
    return epoch_sum / static_cast<double>(plan.joint.size());
}

}  // namespace mib
