#pragma once

// Test-only oracles and fixtures, kept independent of the library's own
// computation paths.

#include <cmath>
#include <random>
#include <vector>

#include "mib/common.hpp"
#include "mib/nn.hpp"

namespace test_helpers {

/// Straight-line re-evaluation of the 2-layer net: dense, LeakyReLU,
/// LayerNorm, dense — written as one flat pass over explicit parameters.
inline std::vector<double> straight_line_mlp(mib::nn::MlpNet& net,
                                             const std::vector<double>& input) {
    auto& l1 = net.layer1();
    auto& l2 = net.layer2();
    const std::size_t h = net.hidden_dim();

    std::vector<double> a(h);
    for (std::size_t o = 0; o < h; ++o) {
        double acc = l1.b[o];
        for (std::size_t i = 0; i < l1.in; ++i) acc += l1.w[o * l1.in + i] * input[i];
        a[o] = acc > 0.0 ? acc : net.leaky_slope() * acc;
    }
    double mean = 0.0;
    for (double v : a) mean += v;
    mean /= static_cast<double>(h);
    double var = 0.0;
    for (double v : a) var += (v - mean) * (v - mean);
    var /= static_cast<double>(h);
    const double denom = std::sqrt(var + mib::nn::MlpNet::kLnEps);
    std::vector<double> hdn(h);
    for (std::size_t i = 0; i < h; ++i)
        hdn[i] = net.ln_gain()[i] * ((a[i] - mean) / denom) + net.ln_shift()[i];

    std::vector<double> out(l2.out);
    for (std::size_t o = 0; o < l2.out; ++o) {
        double acc = l2.b[o];
        for (std::size_t i = 0; i < l2.in; ++i) acc += l2.w[o * l2.in + i] * hdn[i];
        out[o] = acc;
    }
    return out;
}

inline mib::Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed,
                                 double scale = 1.0) {
    mib::Matrix m(rows, cols);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, scale);
    for (auto& v : m.data()) v = g(rng);
    return m;
}

inline std::vector<double> random_vector(std::size_t n, std::uint64_t seed,
                                         double scale = 1.0) {
    std::vector<double> v(n);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, scale);
    for (auto& x : v) x = g(rng);
    return v;
}

inline void zero_all_params(mib::nn::MlpNet& net) {
    for (auto& p : net.params())
        for (std::size_t i = 0; i < p.size; ++i) p.value[i] = 0.0;
}

/// Output layers initialise to zero; tests that need a non-degenerate net
/// (oracles, gradient audits) fill them with random values.
inline void randomize_output_layer(mib::nn::MlpNet& net, std::uint64_t seed,
                                   double scale = 0.3) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-scale, scale);
    for (double& w : net.layer2().w) w = u(rng);
    for (double& b : net.layer2().b) b = u(rng);
}

}  // namespace test_helpers
