#pragma once

#include <random>
#include <span>
#include <string>
#include <vector>

#include "mib/common.hpp"

namespace mib::nn {

/// View of one named parameter block and its gradient buffer.
struct ParamRef {
    std::string name;
    double* value = nullptr;
    double* grad = nullptr;
    std::size_t size = 0;
};

struct DenseLayer {
    std::size_t in = 0, out = 0;
    std::vector<double> w, b;    // w is out x in, row-major
    std::vector<double> gw, gb;

    DenseLayer() = default;
    DenseLayer(std::size_t in_dim, std::size_t out_dim)
        : in(in_dim), out(out_dim),
          w(in_dim * out_dim, 0.0), b(out_dim, 0.0),
          gw(in_dim * out_dim, 0.0), gb(out_dim, 0.0) {}

    /// out_v = w . in_v + b
    void forward(std::span<const double> in_v, std::span<double> out_v) const {
        for (std::size_t o = 0; o < out; ++o) {
            const double* wr = w.data() + o * in;
            double acc = b[o];
            for (std::size_t i = 0; i < in; ++i) acc += wr[i] * in_v[i];
            out_v[o] = acc;
        }
    }

    /// Accumulates gw, gb; writes d(loss)/d(in_v) into g_in when non-empty.
    void backward(std::span<const double> in_v, std::span<const double> g_out,
                  std::span<double> g_in) {
        for (std::size_t o = 0; o < out; ++o) {
            const double g = g_out[o];
            double* gwr = gw.data() + o * in;
            for (std::size_t i = 0; i < in; ++i) gwr[i] += g * in_v[i];
            gb[o] += g;
        }
        if (!g_in.empty()) {
            for (std::size_t i = 0; i < in; ++i) {
                double acc = 0.0;
                for (std::size_t o = 0; o < out; ++o) acc += w[o * in + i] * g_out[o];
                g_in[i] = acc;
            }
        }
    }
};

/// Per-sample activation cache from a forward pass, consumed by backward.
struct MlpCache {
    std::vector<double> input;
    std::vector<double> pre;    // W1.x + b1
    std::vector<double> act;    // LeakyReLU(pre)
    std::vector<double> xhat;   // normalised act, before gain/shift
    std::vector<double> hidden; // gain*xhat + shift
    double inv_sigma = 0.0;     // 1/sqrt(var + eps)
    bool valid = false;
};

/// 2-layer perceptron: dense -> LeakyReLU -> LayerNorm -> dense.
/// LayerNorm is applied after the activation. Hidden width defaults to 256,
/// LeakyReLU slope to 0.2.
class MlpNet {
public:
    MlpNet() = default;
    MlpNet(std::size_t in_dim, std::size_t out_dim, std::uint64_t seed,
           std::size_t hidden_dim = 256, double leaky_slope = 0.2)
        : l1_(in_dim, hidden_dim), l2_(hidden_dim, out_dim),
          gain_(hidden_dim, 1.0), shift_(hidden_dim, 0.0),
          ggain_(hidden_dim, 0.0), gshift_(hidden_dim, 0.0),
          slope_(leaky_slope) {
        init_weights(seed);
    }

    std::size_t in_dim() const { return l1_.in; }
    std::size_t hidden_dim() const { return l1_.out; }
    std::size_t out_dim() const { return l2_.out; }
    double leaky_slope() const { return slope_; }

    void forward(std::span<const double> input, std::span<double> output,
                 MlpCache& cache) const {
        if (input.size() != l1_.in)
            throw ShapeError("mlp_forward: input width " + std::to_string(input.size()) +
                             ", expected " + std::to_string(l1_.in));
        for (double v : input)
            if (!std::isfinite(v)) throw DomainError("mlp_forward: non-finite input");
        const std::size_t h = hidden_dim();
        cache.input.assign(input.begin(), input.end());
        cache.pre.resize(h);
        cache.act.resize(h);
        cache.xhat.resize(h);
        cache.hidden.resize(h);

        l1_.forward(input, cache.pre);
        for (std::size_t i = 0; i < h; ++i)
            cache.act[i] = cache.pre[i] > 0.0 ? cache.pre[i] : slope_ * cache.pre[i];

        double mean = 0.0;
        for (double a : cache.act) mean += a;
        mean /= static_cast<double>(h);
        double var = 0.0;
        for (double a : cache.act) {
            const double c = a - mean;
            var += c * c;
        }
        var /= static_cast<double>(h);
        cache.inv_sigma = 1.0 / std::sqrt(var + kLnEps);
        for (std::size_t i = 0; i < h; ++i) {
            cache.xhat[i] = (cache.act[i] - mean) * cache.inv_sigma;
            cache.hidden[i] = gain_[i] * cache.xhat[i] + shift_[i];
        }
        l2_.forward(cache.hidden, output);
        cache.valid = true;
    }

    std::vector<double> forward(std::span<const double> input) const {
        MlpCache cache;
        std::vector<double> out(out_dim());
        forward(input, out, cache);
        return out;
    }

    /// Accumulates parameter gradients from one sample. g_input, when
    /// non-empty, receives d(loss)/d(input).
    void backward(const MlpCache& cache, std::span<const double> g_output,
                  std::span<double> g_input = {}) {
        if (!cache.valid)
            throw UsageError("mlp_backward: cache does not hold a forward pass");
        const std::size_t h = hidden_dim();
        std::vector<double> g_hidden(h);
        l2_.backward(cache.hidden, g_output, g_hidden);

        std::vector<double> g_xhat(h);
        for (std::size_t i = 0; i < h; ++i) {
            ggain_[i] += g_hidden[i] * cache.xhat[i];
            gshift_[i] += g_hidden[i];
            g_xhat[i] = g_hidden[i] * gain_[i];
        }
        // LayerNorm backward: mean/variance chain rule over the hidden vector
        double mg = 0.0, mgx = 0.0;
        for (std::size_t i = 0; i < h; ++i) {
            mg += g_xhat[i];
            mgx += g_xhat[i] * cache.xhat[i];
        }
        mg /= static_cast<double>(h);
        mgx /= static_cast<double>(h);
        std::vector<double> g_act(h);
        for (std::size_t i = 0; i < h; ++i)
            g_act[i] = cache.inv_sigma * (g_xhat[i] - mg - cache.xhat[i] * mgx);

        std::vector<double> g_pre(h);
        for (std::size_t i = 0; i < h; ++i)
            g_pre[i] = g_act[i] * (cache.pre[i] > 0.0 ? 1.0 : slope_);
        l1_.backward(cache.input, g_pre, g_input);
    }

    void zero_grad() {
        std::fill(l1_.gw.begin(), l1_.gw.end(), 0.0);
        std::fill(l1_.gb.begin(), l1_.gb.end(), 0.0);
        std::fill(l2_.gw.begin(), l2_.gw.end(), 0.0);
        std::fill(l2_.gb.begin(), l2_.gb.end(), 0.0);
        std::fill(ggain_.begin(), ggain_.end(), 0.0);
        std::fill(gshift_.begin(), gshift_.end(), 0.0);
    }

    /// Parameter views in a fixed order; optimiser state is keyed by it.
    std::vector<ParamRef> params(const std::string& prefix = "") {
        return {
            {prefix + "w1", l1_.w.data(), l1_.gw.data(), l1_.w.size()},
            {prefix + "b1", l1_.b.data(), l1_.gb.data(), l1_.b.size()},
            {prefix + "ln.gain", gain_.data(), ggain_.data(), gain_.size()},
            {prefix + "ln.shift", shift_.data(), gshift_.data(), shift_.size()},
            {prefix + "w2", l2_.w.data(), l2_.gw.data(), l2_.w.size()},
            {prefix + "b2", l2_.b.data(), l2_.gb.data(), l2_.b.size()},
        };
    }

    DenseLayer& layer1() { return l1_; }
    DenseLayer& layer2() { return l2_; }
    std::vector<double>& ln_gain() { return gain_; }
    std::vector<double>& ln_shift() { return shift_; }

    static constexpr double kLnEps = 1e-5;

private:
    void init_weights(std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        const double limit = std::sqrt(6.0 / static_cast<double>(l1_.in));
        std::uniform_real_distribution<double> u(-limit, limit);
        for (double& x : l1_.w) x = u(rng);
        // the output layer starts at zero so a fresh estimator reads exactly
        // 0; He-scaled output weights give every net a large random
        // x-dependent value that takes thousands of steps to unlearn and
        // poisons early readouts. Biases zero, gain 1, shift 0.
    }

    DenseLayer l1_, l2_;
    std::vector<double> gain_, shift_, ggain_, gshift_;
    double slope_ = 0.2;
};

}  // namespace mib::nn
