#pragma once

#include <algorithm>
#include <numeric>
#include <random>
#include <vector>

#include "mib/common.hpp"

namespace mib {

enum class MarginalMode {
    WithinBatch,  // permute y within each minibatch
    FullShuffle,  // draw marginal y rows from the whole dataset
};

inline const char* to_string(MarginalMode m) {
    return m == MarginalMode::WithinBatch ? "within-batch" : "full-shuffle";
}

/// One epoch's minibatch stream: joint row indices plus the y rows used for
/// the product-of-marginals term. Derived purely from a seed so MINE and
/// CLUB can train on the identical stream.
struct BatchPlan {
    std::vector<std::vector<std::size_t>> joint;   // rows per batch
    std::vector<std::vector<std::size_t>> marg_y;  // y rows per batch, same length
};

inline BatchPlan make_batch_plan(std::size_t n_rows, std::size_t batch_size,
                                 std::uint64_t stream_seed,
                                 MarginalMode mode = MarginalMode::WithinBatch) {
    if (n_rows == 0) throw UsageError("make_batch_plan: empty dataset");
    if (batch_size == 0) throw UsageError("make_batch_plan: batch size must be >= 1");
    std::vector<std::size_t> order(n_rows);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 shuffle_rng(derive_seed(stream_seed, "batch.shuffle"));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    BatchPlan plan;
    for (std::size_t start = 0; start < n_rows; start += batch_size) {
        const std::size_t len = std::min(batch_size, n_rows - start);
        if (len < 2 && !plan.joint.empty()) break;  // drop trailing singleton
        plan.joint.emplace_back(order.begin() + static_cast<long>(start),
                                order.begin() + static_cast<long>(start + len));
    }
    for (std::size_t b = 0; b < plan.joint.size(); ++b) {
        std::mt19937_64 rng(derive_seed(stream_seed, "batch.marginal", b));
        std::vector<std::size_t> marg;
        if (mode == MarginalMode::WithinBatch) {
            marg = plan.joint[b];
            std::shuffle(marg.begin(), marg.end(), rng);
        } else {
            std::uniform_int_distribution<std::size_t> pick(0, n_rows - 1);
            marg.resize(plan.joint[b].size());
            for (auto& r : marg) r = pick(rng);
        }
        plan.marg_y.push_back(std::move(marg));
    }
    return plan;
}

}  // namespace mib
