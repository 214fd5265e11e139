#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "mib/nn.hpp"

namespace mib::nn {

/// Adam with bias-corrected moments. Weight decay is decoupled by default:
/// applied directly to the parameters before the Adam delta, not folded into
/// the gradient. The coupled variant is selectable for comparison runs.
struct AdamState {
    double lr = 1e-4;
    double weight_decay = 1e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    bool decoupled = true;
    std::uint64_t t = 0;
    std::vector<std::vector<double>> m, v;  // aligned with the params order

    AdamState() = default;
    AdamState(const std::vector<ParamRef>& params, double lr_, double weight_decay_,
              bool decoupled_ = true)
        : lr(lr_), weight_decay(weight_decay_), decoupled(decoupled_) {
        for (const auto& p : params) {
            m.emplace_back(p.size, 0.0);
            v.emplace_back(p.size, 0.0);
        }
    }

    void step(const std::vector<ParamRef>& params) {
        if (m.size() != params.size())
            throw UsageError("adam_step: state built for a different parameter set");
        ++t;
        const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
        const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
        for (std::size_t k = 0; k < params.size(); ++k) {
            const ParamRef& p = params[k];
            if (m[k].size() != p.size)
                throw UsageError("adam_step: shape mismatch for parameter " + p.name);
            for (std::size_t i = 0; i < p.size; ++i) {
                double g = p.grad[i];
                if (!std::isfinite(g))
                    throw TrainingFault("adam_step: non-finite gradient in " + p.name);
                if (decoupled) {
                    p.value[i] -= lr * weight_decay * p.value[i];
                } else {
                    g += weight_decay * p.value[i];
                }
                m[k][i] = beta1 * m[k][i] + (1.0 - beta1) * g;
                v[k][i] = beta2 * v[k][i] + (1.0 - beta2) * g * g;
                const double mhat = m[k][i] / bc1;
                const double vhat = v[k][i] / bc2;
                p.value[i] -= lr * mhat / (std::sqrt(vhat) + eps);
                if (!std::isfinite(p.value[i]))
                    throw TrainingFault("adam_step: non-finite parameter in " + p.name);
            }
        }
    }
};

/// Scale all gradients so the global L2 norm does not exceed max_norm (up
/// to a relative 1e-12 slack that keeps the operation idempotent under
/// floating-point rescaling). Returns the pre-clip norm.
inline double clip_grad_norm(const std::vector<ParamRef>& params, double max_norm = 1.0) {
    double sq = 0.0;
    for (const auto& p : params)
        for (std::size_t i = 0; i < p.size; ++i) sq += p.grad[i] * p.grad[i];
    const double norm = std::sqrt(sq);
    if (norm > max_norm * (1.0 + 1e-12)) {
        const double scale = max_norm / norm;
        for (const auto& p : params)
            for (std::size_t i = 0; i < p.size; ++i) p.grad[i] *= scale;
    }
    return norm;
}

/// Halve the learning rate after `patience` consecutive epochs without
/// improvement of a lower-is-better metric.
struct PlateauScheduler {
    double factor = 0.5;
    int patience = 10;
    double best = std::numeric_limits<double>::infinity();
    int bad_epochs = 0;

    double step(double metric, double current_lr) {
        if (!std::isfinite(metric)) throw DomainError("scheduler_step: non-finite metric");
        if (metric < best) {
            best = metric;
            bad_epochs = 0;
            return current_lr;
        }
        if (++bad_epochs >= patience) {
            bad_epochs = 0;
            return current_lr * factor;
        }
        return current_lr;
    }
};

}  // namespace mib::nn
