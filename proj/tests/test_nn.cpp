#include "catch_amalgamated.hpp"

#include <numeric>
#include <random>

#include "mib/nn.hpp"
#include "mib/optim.hpp"

#include "helpers.hpp"

using namespace mib;
using nn::MlpNet;
using Catch::Approx;

TEST_CASE("mlp forward with all-zero parameters is zero") {
    MlpNet net(4, 3, 17);
    test_helpers::zero_all_params(net);
    const auto out = net.forward(std::vector<double>{1.0, -2.0, 0.5, 3.0});
    for (double v : out) REQUIRE(v == 0.0);
}

TEST_CASE("width-1 hidden layer normalises to the output bias") {
    MlpNet net(1, 1, 99, /*hidden_dim=*/1);
    net.layer2().b[0] = 0.37;
    // whatever the first layer computes, a width-1 LayerNorm centers it away
    for (double x : {-3.0, 0.0, 1.25, 8.0})
        REQUIRE(net.forward(std::vector<double>{x})[0] == Approx(0.37).margin(1e-12));
}

TEST_CASE("mlp forward matches the straight-line oracle") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 5; ++trial) {
        MlpNet net(6, 2, rng(), /*hidden_dim=*/32);
        test_helpers::randomize_output_layer(net, rng());
        // make gain/shift non-trivial too
        for (auto& g : net.ln_gain()) g = 1.0 + 0.1 * static_cast<double>(trial);
        for (auto& s : net.ln_shift()) s = 0.05 * static_cast<double>(trial);
        const auto input = test_helpers::random_vector(6, rng());
        const auto expected = test_helpers::straight_line_mlp(net, input);
        const auto got = net.forward(input);
        REQUIRE(got.size() == expected.size());
        for (std::size_t i = 0; i < got.size(); ++i)
            REQUIRE(got[i] == Approx(expected[i]).margin(1e-12));
    }
}

TEST_CASE("mlp forward rejects bad input") {
    MlpNet net(3, 1, 7);
    REQUIRE_THROWS_AS(net.forward(std::vector<double>{1.0, 2.0}), ShapeError);
    REQUIRE_THROWS_AS(
        net.forward(std::vector<double>{1.0, std::nan(""), 0.0}), DomainError);
}

TEST_CASE("layernorm pre-gain statistics are standardised") {
    MlpNet net(5, 1, 23, /*hidden_dim=*/64);
    nn::MlpCache cache;
    std::vector<double> out(1);
    // a non-degenerate input scale keeps the variance well above the eps guard
    net.forward(test_helpers::random_vector(5, 81, 3.0), out, cache);
    double mean = 0.0, var = 0.0;
    for (double v : cache.xhat) mean += v;
    mean /= static_cast<double>(cache.xhat.size());
    for (double v : cache.xhat) var += (v - mean) * (v - mean);
    var /= static_cast<double>(cache.xhat.size());
    REQUIRE(std::abs(mean) < 1e-6);
    REQUIRE(std::abs(var - 1.0) < 1e-4);
}

TEST_CASE("zero output gradient leaves all parameter gradients zero") {
    MlpNet net(4, 2, 31, /*hidden_dim=*/16);
    nn::MlpCache cache;
    std::vector<double> out(2);
    net.forward(test_helpers::random_vector(4, 3), out, cache);
    net.zero_grad();
    net.backward(cache, std::vector<double>{0.0, 0.0});
    for (auto& p : net.params())
        for (std::size_t i = 0; i < p.size; ++i) REQUIRE(p.grad[i] == 0.0);
}

TEST_CASE("dense layer gradient of w*x is x") {
    nn::DenseLayer layer(1, 1);
    layer.w[0] = 1.7;
    const double x[1] = {2.5};
    const double g[1] = {1.0};
    layer.backward(std::span<const double>{x, 1}, std::span<const double>{g, 1}, {});
    REQUIRE(layer.gw[0] == 2.5);
    REQUIRE(layer.gb[0] == 1.0);
}

TEST_CASE("backward requires a forward cache") {
    MlpNet net(2, 1, 11, 8);
    nn::MlpCache cache;
    REQUIRE_THROWS_AS(net.backward(cache, std::vector<double>{1.0}), UsageError);
}

TEST_CASE("analytic gradients match central finite differences") {
    // loss = sum_o r_o * out_o for a fixed random direction r
    std::mt19937_64 rng(123);
    MlpNet net(4, 3, rng(), /*hidden_dim=*/8);
    test_helpers::randomize_output_layer(net, rng());
    const auto input = test_helpers::random_vector(4, rng());
    const auto direction = test_helpers::random_vector(3, rng());

    auto loss = [&]() {
        const auto out = net.forward(input);
        return std::inner_product(out.begin(), out.end(), direction.begin(), 0.0);
    };

    nn::MlpCache cache;
    std::vector<double> out(3);
    net.forward(input, out, cache);
    net.zero_grad();
    std::vector<double> g_input(4);
    net.backward(cache, direction, g_input);

    const double h = 1e-5;
    for (auto& p : net.params()) {
        for (std::size_t i = 0; i < p.size; ++i) {
            const double saved = p.value[i];
            p.value[i] = saved + h;
            const double up = loss();
            p.value[i] = saved - h;
            const double down = loss();
            p.value[i] = saved;
            const double fd = (up - down) / (2 * h);
            const double rel = std::abs(p.grad[i] - fd) /
                               std::max({std::abs(p.grad[i]), std::abs(fd), 1e-8});
            INFO(p.name << "[" << i << "]");
            REQUIRE(rel < 1e-4);
        }
    }
    // input gradient as well
    auto input_copy = input;
    for (std::size_t i = 0; i < input_copy.size(); ++i) {
        const double saved = input_copy[i];
        auto eval = [&](double v) {
            input_copy[i] = v;
            const auto o = net.forward(input_copy);
            input_copy[i] = saved;
            return std::inner_product(o.begin(), o.end(), direction.begin(), 0.0);
        };
        const double fd = (eval(saved + h) - eval(saved - h)) / (2 * h);
        const double rel =
            std::abs(g_input[i] - fd) / std::max({std::abs(g_input[i]), std::abs(fd), 1e-8});
        REQUIRE(rel < 1e-4);
    }
}

TEST_CASE("adam with zero gradient and zero decay is the identity") {
    MlpNet net(3, 2, 41, 8);
    auto params = net.params();
    nn::AdamState adam(params, 1e-3, 0.0);
    net.zero_grad();
    std::vector<double> before;
    for (auto& p : params)
        before.insert(before.end(), p.value, p.value + p.size);
    adam.step(params);
    adam.step(params);
    std::size_t idx = 0;
    for (auto& p : params)
        for (std::size_t i = 0; i < p.size; ++i) REQUIRE(p.value[i] == before[idx++]);
}

TEST_CASE("adam scalar first step moves by about the learning rate") {
    double value = 1.0, grad = 1.0;
    std::vector<nn::ParamRef> params{{"w", &value, &grad, 1}};
    nn::AdamState adam(params, 1e-4, 0.0);
    adam.step(params);
    // hand-computed: m_hat = v_hat = 1, delta = -lr / (1 + eps)
    const double expected = 1.0 - 1e-4 / (1.0 + 1e-8);
    REQUIRE(value == Approx(expected).margin(1e-15));
    REQUIRE(adam.t == 1);
}

TEST_CASE("adam moment accumulators follow the closed-form recurrence") {
    double value = 0.0, grad = 0.7;
    std::vector<nn::ParamRef> params{{"w", &value, &grad, 1}};
    nn::AdamState adam(params, 1e-4, 0.0);
    adam.step(params);
    grad = 0.7;  // same gradient again
    adam.step(params);
    const double b1 = 0.9, b2 = 0.999, g = 0.7;
    REQUIRE(adam.m[0][0] == Approx((1 - b1) * g * (1 + b1)).epsilon(1e-12));
    REQUIRE(adam.v[0][0] == Approx((1 - b2) * g * g * (1 + b2)).epsilon(1e-12));
}

TEST_CASE("decoupled weight decay shrinks parameters before the adam delta") {
    double value = 2.0, grad = 0.0;
    std::vector<nn::ParamRef> params{{"w", &value, &grad, 1}};
    nn::AdamState adam(params, 0.1, 0.01);
    adam.step(params);
    // zero gradient: only the decay term acts
    REQUIRE(value == Approx(2.0 * (1.0 - 0.1 * 0.01)).margin(1e-15));
}

TEST_CASE("adam rejects non-finite gradients with the parameter name") {
    double value = 0.0, grad = std::numeric_limits<double>::infinity();
    std::vector<nn::ParamRef> params{{"ln.gain", &value, &grad, 1}};
    nn::AdamState adam(params, 1e-4, 0.0);
    try {
        adam.step(params);
        FAIL("expected TrainingFault");
    } catch (const TrainingFault& e) {
        REQUIRE(std::string(e.what()).find("ln.gain") != std::string::npos);
    }
}

TEST_CASE("gradient clipping") {
    SECTION("norm below the threshold is untouched") {
        double v = 0.0;
        std::vector<double> g{0.3, 0.4};
        std::vector<nn::ParamRef> params{{"w", &v, g.data(), 2}};
        REQUIRE(nn::clip_grad_norm(params, 1.0) == Approx(0.5));
        REQUIRE(g[0] == 0.3);
        REQUIRE(g[1] == 0.4);
    }
    SECTION("3-4-5 vector scales onto the unit sphere") {
        double v = 0.0;
        std::vector<double> g{3.0, 4.0};
        std::vector<nn::ParamRef> params{{"w", &v, g.data(), 2}};
        REQUIRE(nn::clip_grad_norm(params, 1.0) == Approx(5.0));
        REQUIRE(g[0] == Approx(0.6));
        REQUIRE(g[1] == Approx(0.8));
    }
    SECTION("random gradients end up within the ball, idempotently") {
        std::mt19937_64 rng(7);
        std::normal_distribution<double> dist(0.0, 2.0);
        std::vector<double> g(64);
        for (auto& x : g) x = dist(rng);
        double v = 0.0;
        std::vector<nn::ParamRef> params{{"w", &v, g.data(), g.size()}};
        nn::clip_grad_norm(params, 1.0);
        double norm_sq = 0.0;
        for (double x : g) norm_sq += x * x;
        REQUIRE(std::sqrt(norm_sq) <= 1.0 + 1e-12);
        const auto once = g;
        nn::clip_grad_norm(params, 1.0);
        REQUIRE(g == once);
    }
}

TEST_CASE("plateau scheduler") {
    SECTION("improving metric never reduces the rate") {
        nn::PlateauScheduler sched;
        double lr = 1e-4;
        for (int e = 0; e < 50; ++e) lr = sched.step(1.0 - 0.01 * e, lr);
        REQUIRE(lr == 1e-4);
    }
    SECTION("constant metric for 11 epochs halves exactly once") {
        nn::PlateauScheduler sched;
        double lr = 1e-4;
        for (int e = 0; e < 11; ++e) lr = sched.step(0.5, lr);
        REQUIRE(lr == Approx(5e-5));
    }
    SECTION("alternating improve/stall matches a scripted counter") {
        nn::PlateauScheduler sched;
        double lr = 1.0;
        // independent simulation of the counter rules
        double best = std::numeric_limits<double>::infinity();
        int bad = 0;
        double expected_lr = 1.0;
        std::mt19937_64 rng(13);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        double metric = 1.0;
        for (int e = 0; e < 40; ++e) {
            metric += (u(rng) < 0.35) ? -0.05 : 0.0;
            lr = sched.step(metric, lr);
            if (metric < best) {
                best = metric;
                bad = 0;
            } else if (++bad >= 10) {
                bad = 0;
                expected_lr *= 0.5;
            }
            REQUIRE(lr == Approx(expected_lr));
        }
    }
    SECTION("non-finite metric is rejected") {
        nn::PlateauScheduler sched;
        REQUIRE_THROWS_AS(sched.step(std::nan(""), 1e-4), DomainError);
    }
}
