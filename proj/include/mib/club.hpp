#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "mib/batching.hpp"
#include "mib/common.hpp"
#include "mib/nn.hpp"
#include "mib/optim.hpp"

namespace mib {

constexpr double kClubLogVarLo = -6.0;
constexpr double kClubLogVarHi = 2.0;

/// Elementwise clamp of raw log-variances to [-6, 2], i.e. variances to
/// [e^-6, e^2].
inline std::vector<double> clamp_logvar(std::vector<double> raw) {
    for (double& v : raw) v = std::clamp(v, kClubLogVarLo, kClubLogVarHi);
    return raw;
}

struct ClubHyper {
    std::size_t hidden_dim = 256;
    double leaky_slope = 0.2;
    double lr = 1e-4;
    double weight_decay = 1e-5;
    bool decoupled_weight_decay = true;
    double clip_norm = 1.0;
    bool all_pairs = false;  // marginal term over all batch pairs instead of a permutation
};

/// Contrastive upper-bound estimator with a diagonal-Gaussian variational
/// conditional q(y|x). Separate mean and log-variance heads; emitted
/// log-variances are always clamped.
class ClubEstimator {
public:
    ClubEstimator(std::size_t d_x, std::size_t d_y, std::uint64_t seed,
                  const ClubHyper& hyper = {})
        : dx_(d_x), dy_(d_y), hyper_(hyper),
          mean_net_(d_x, d_y, derive_seed(seed, "club.mean"), hyper.hidden_dim,
                    hyper.leaky_slope),
          logvar_net_(d_x, d_y, derive_seed(seed, "club.logvar"), hyper.hidden_dim,
                      hyper.leaky_slope) {
        opt_ = nn::AdamState(params(), hyper.lr, hyper.weight_decay,
                             hyper.decoupled_weight_decay);
    }

    std::size_t d_x() const { return dx_; }
    std::size_t d_y() const { return dy_; }
    nn::MlpNet& mean_net() { return mean_net_; }
    nn::MlpNet& logvar_net() { return logvar_net_; }
    nn::AdamState& optimizer() { return opt_; }
    const ClubHyper& hyper() const { return hyper_; }

    std::vector<nn::ParamRef> params() {
        auto p = mean_net_.params("mean.");
        auto q = logvar_net_.params("logvar.");
        p.insert(p.end(), q.begin(), q.end());
        return p;
    }

    void zero_grad() {
        mean_net_.zero_grad();
        logvar_net_.zero_grad();
    }

    struct Prediction {
        std::vector<double> mu;
        std::vector<double> logvar_raw;
        std::vector<double> logvar;  // clamped
    };

    Prediction predict(std::span<const double> x) const {
        if (x.size() != dx_)
            throw ShapeError("club predict: input width " + std::to_string(x.size()) +
                             ", expected " + std::to_string(dx_));
        Prediction p;
        p.mu = mean_net_.forward(x);
        p.logvar_raw = logvar_net_.forward(x);
        p.logvar = clamp_logvar(p.logvar_raw);
        for (double v : p.logvar) {
            emitted_lv_min_ = std::min(emitted_lv_min_, v);
            emitted_lv_max_ = std::max(emitted_lv_max_, v);
        }
        return p;
    }

    /// log q(y|x) up to the -(d_y/2) log 2pi constant, which cancels in the
    /// bound's difference and is omitted throughout.
    double log_likelihood(std::span<const double> x, std::span<const double> y) const {
        if (y.size() != dy_)
            throw ShapeError("club log-likelihood: y width " + std::to_string(y.size()) +
                             ", expected " + std::to_string(dy_));
        const Prediction p = predict(x);
        double ll = 0.0;
        for (std::size_t j = 0; j < dy_; ++j) {
            const double var = std::exp(p.logvar[j]);
            const double r = y[j] - p.mu[j];
            ll -= 0.5 * (p.logvar[j] + r * r / var);
        }
        return ll;
    }

    // extreme clamped log-variances ever emitted; clamp-guarantee audit
    double emitted_logvar_min() const { return emitted_lv_min_; }
    double emitted_logvar_max() const { return emitted_lv_max_; }

private:
    std::size_t dx_, dy_;
    ClubHyper hyper_;
    nn::MlpNet mean_net_, logvar_net_;
    nn::AdamState opt_;
    mutable double emitted_lv_min_ = std::numeric_limits<double>::infinity();
    mutable double emitted_lv_max_ = -std::numeric_limits<double>::infinity();
};

inline double club_log_likelihood(const ClubEstimator& est, std::span<const double> x,
                                  std::span<const double> y) {
    return est.log_likelihood(x, y);
}

/// Contrastive bound over one batch: mean joint log-likelihood minus mean
/// marginal log-likelihood. With all_pairs the marginal term averages over
/// every (x_i, y_j) combination in the batch.
inline double club_bound(const ClubEstimator& est, const Matrix& x, const Matrix& y,
                         std::span<const std::size_t> joint_rows,
                         std::span<const std::size_t> marg_y_rows) {
    if (joint_rows.empty()) throw UsageError("club_bound: empty batch");
    if (x.cols() != est.d_x() || y.cols() != est.d_y())
        throw ShapeError("club_bound: feature widths do not match the estimator");
    const double bs = static_cast<double>(joint_rows.size());
    double joint_term = 0.0, marg_term = 0.0;
    if (est.hyper().all_pairs) {
        for (std::size_t i = 0; i < joint_rows.size(); ++i) {
            const auto p = est.predict({x.row(joint_rows[i]), x.cols()});
            for (std::size_t j = 0; j < joint_rows.size(); ++j) {
                double ll = 0.0;
                const double* yr = y.row(joint_rows[j]);
                for (std::size_t c = 0; c < est.d_y(); ++c) {
                    const double r = yr[c] - p.mu[c];
                    ll -= 0.5 * (p.logvar[c] + r * r / std::exp(p.logvar[c]));
                }
                if (i == j) joint_term += ll / bs;
                marg_term += ll / (bs * bs);
            }
        }
    } else {
        if (joint_rows.size() != marg_y_rows.size())
            throw UsageError("club_bound: joint and marginal batch sizes differ");
        for (std::size_t i = 0; i < joint_rows.size(); ++i) {
            joint_term += est.log_likelihood({x.row(joint_rows[i]), x.cols()},
                                             {y.row(joint_rows[i]), y.cols()}) / bs;
            marg_term += est.log_likelihood({x.row(joint_rows[i]), x.cols()},
                                            {y.row(marg_y_rows[i]), y.cols()}) / bs;
        }
    }
    return joint_term - marg_term;
}

/// Accumulate gradients of the mean negative joint log-likelihood over one
/// batch (the variational fit). Clamped-out log-variance coordinates get a
/// zero gradient. Returns the batch NLL. No clipping or optimiser step.
inline double club_accumulate_gradients(ClubEstimator& est, const Matrix& x,
                                        const Matrix& y,
                                        std::span<const std::size_t> joint_rows) {
    if (joint_rows.empty()) throw UsageError("club gradients: empty batch");
    if (x.cols() != est.d_x() || y.cols() != est.d_y())
        throw ShapeError("club gradients: feature widths do not match the estimator");
    const double bs = static_cast<double>(joint_rows.size());
    const std::size_t dy = est.d_y();
    std::vector<double> mu(dy), lv_raw(dy), g_mu(dy), g_lv(dy);
    nn::MlpCache mean_cache, lv_cache;
    double nll = 0.0;
    for (std::size_t row : joint_rows) {
        const std::span<const double> xin{x.row(row), x.cols()};
        const double* yr = y.row(row);
        est.mean_net().forward(xin, mu, mean_cache);
        est.logvar_net().forward(xin, lv_raw, lv_cache);
        for (std::size_t j = 0; j < dy; ++j) {
            const bool clamped = lv_raw[j] < kClubLogVarLo || lv_raw[j] > kClubLogVarHi;
            const double lv = std::clamp(lv_raw[j], kClubLogVarLo, kClubLogVarHi);
            const double var = std::exp(lv);
            const double r = yr[j] - mu[j];
            nll += 0.5 * (lv + r * r / var) / bs;
            g_mu[j] = -r / var / bs;
            g_lv[j] = clamped ? 0.0 : 0.5 * (1.0 - r * r / var) / bs;
        }
        est.mean_net().backward(mean_cache, g_mu);
        est.logvar_net().backward(lv_cache, g_lv);
    }
    return nll;
}

/// One training epoch: per batch, a maximum-likelihood step on the joint
/// samples followed by a bound evaluation on the same batch with the
/// updated parameters. Returns the epoch-mean bound.
inline double club_train_epoch(ClubEstimator& est, const Matrix& x, const Matrix& y,
                               std::size_t batch_size, std::uint64_t stream_seed,
                               MarginalMode mode = MarginalMode::WithinBatch) {
    if (x.rows() != y.rows()) throw ShapeError("club_train_epoch: row count mismatch");
    const BatchPlan plan = make_batch_plan(x.rows(), batch_size, stream_seed, mode);
    auto params = est.params();
    double epoch_sum = 0.0;
    for (std::size_t b = 0; b < plan.joint.size(); ++b) {
        est.zero_grad();
        club_accumulate_gradients(est, x, y, plan.joint[b]);
        nn::clip_grad_norm(params, est.hyper().clip_norm);
        est.optimizer().step(params);
        epoch_sum += club_bound(est, x, y, plan.joint[b], plan.marg_y[b]);
    }
    return epoch_sum / static_cast<double>(plan.joint.size());
}

}  // namespace mib
