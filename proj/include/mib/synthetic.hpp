#pragma once

#include <limits>
#include <random>
#include <string>

#include "mib/common.hpp"
#include "mib/feature_matrix.hpp"

namespace mib {

/// Ground-truth generators for estimator validation. Closed-form MI:
/// c coupled standard-normal coordinate pairs at correlation rho carry
/// I = -(c/2) ln(1 - rho^2) nats.
enum class SynthFamily {
    CorrelatedGaussian,
    IndependentUniform,
    DeterministicMap,  // y duplicates x; infinite MI stress case
};

inline const char* to_string(SynthFamily f) {
    switch (f) {
        case SynthFamily::CorrelatedGaussian: return "correlated-gaussian";
        case SynthFamily::IndependentUniform: return "independent-uniform";
        case SynthFamily::DeterministicMap: return "deterministic-map";
    }
    return "?";
}

inline SynthFamily synth_family_from_string(const std::string& s) {
    if (s == "correlated-gaussian") return SynthFamily::CorrelatedGaussian;
    if (s == "independent-uniform") return SynthFamily::IndependentUniform;
    if (s == "deterministic-map") return SynthFamily::DeterministicMap;
    throw UsageError("unknown synthetic family '" + s + "'");
}

struct SyntheticSpec {
    SynthFamily family = SynthFamily::CorrelatedGaussian;
    std::size_t d_x = 1, d_y = 1;
    std::size_t coupled = 0;  // coupled coordinate pairs; 0 means min(d_x, d_y)
    double rho = 0.0;
    std::size_t n = 1000;
    std::uint64_t seed = 0;

    std::size_t coupled_pairs() const {
        const std::size_t c = std::min(d_x, d_y);
        return coupled == 0 ? c : coupled;
    }

    void validate() const {
        if (d_x == 0 || d_y == 0) throw UsageError("synth: dimensions must be >= 1");
        if (n < 2) throw UsageError("synth: need n >= 2");
        if (coupled > std::min(d_x, d_y))
            throw UsageError("synth: coupled pairs exceed min(d_x, d_y)");
        if (family == SynthFamily::CorrelatedGaussian &&
            !(rho > -1.0 && rho < 1.0))
            throw UsageError("synth: rho must lie in (-1, 1)");
    }
};

struct SyntheticPair {
    FeatureMatrix x, y;
    double true_mi = 0.0;  // +inf for deterministic maps
};

inline SyntheticPair synth_generate(const SyntheticSpec& spec) {
    spec.validate();
    SyntheticPair out;
    out.x.values = Matrix(spec.n, spec.d_x);
    out.y.values = Matrix(spec.n, spec.d_y);
    for (std::size_t j = 0; j < spec.d_x; ++j) out.x.names.push_back("x" + std::to_string(j + 1));
    for (std::size_t j = 0; j < spec.d_y; ++j) out.y.names.push_back("y" + std::to_string(j + 1));
    const std::string tag = std::string("synthetic:") + to_string(spec.family) +
                            ":seed=" + std::to_string(spec.seed);
    out.x.provenance = tag;
    out.y.provenance = tag;

    std::mt19937_64 rng(derive_seed(spec.seed, "synth", static_cast<std::uint64_t>(spec.family)));
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const std::size_t c = spec.coupled_pairs();

    switch (spec.family) {
        case SynthFamily::CorrelatedGaussian: {
            const double tail = std::sqrt(1.0 - spec.rho * spec.rho);
            for (std::size_t i = 0; i < spec.n; ++i) {
                for (std::size_t j = 0; j < spec.d_x; ++j) out.x.values(i, j) = gauss(rng);
                for (std::size_t j = 0; j < spec.d_y; ++j) {
                    if (j < c)
                        out.y.values(i, j) = spec.rho * out.x.values(i, j) + tail * gauss(rng);
                    else
                        out.y.values(i, j) = gauss(rng);
                }
            }
            out.true_mi = -0.5 * static_cast<double>(c) * std::log(1.0 - spec.rho * spec.rho);
            break;
        }
        case SynthFamily::IndependentUniform: {
            for (std::size_t i = 0; i < spec.n; ++i) {
                for (std::size_t j = 0; j < spec.d_x; ++j) out.x.values(i, j) = unif(rng);
                for (std::size_t j = 0; j < spec.d_y; ++j) out.y.values(i, j) = unif(rng);
            }
            out.true_mi = 0.0;
            break;
        }
        case SynthFamily::DeterministicMap: {
            for (std::size_t i = 0; i < spec.n; ++i) {
                for (std::size_t j = 0; j < spec.d_x; ++j) out.x.values(i, j) = gauss(rng);
                for (std::size_t j = 0; j < spec.d_y; ++j)
                    out.y.values(i, j) = out.x.values(i, j % spec.d_x);
            }
            out.true_mi = std::numeric_limits<double>::infinity();
            break;
        }
    }
    return out;
}

}  // namespace mib
