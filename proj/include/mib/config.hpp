#pragma once

#include <cstdlib>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "mib/batching.hpp"
#include "mib/common.hpp"
#include "mib/fusion.hpp"
#include "mib/preprocess.hpp"
#include "mib/synthetic.hpp"

namespace mib {

using json = nlohmann::json;

/// One feature-set pair to estimate: either two feature files or an inline
/// synthetic specification.
struct PairSpec {
    std::string name;
    std::string combination = "default";
    std::string x_path, y_path;            // file-backed pair
    std::optional<SyntheticSpec> synth;    // or generated pair
    std::optional<PairingPolicy> pairing;  // overrides the run-level policy

    bool is_synthetic() const { return synth.has_value(); }
};

struct DimensionSpec {
    std::string name;
    std::string path;
};

struct AttributionSpec {
    std::string source_path;
    std::string filter_path;
    std::vector<DimensionSpec> dimensions;
};

/// Full run configuration. Defaults are the protocol constants; everything
/// is overridable from the config file or MIB_* environment variables.
struct RunConfig {
    std::uint64_t seed = 42;
    std::size_t n_samples = 500;
    std::size_t ensemble = 3;
    std::size_t epochs = 100;
    std::size_t batch_size = 128;
    double learning_rate = 1e-4;
    double weight_decay = 1e-5;
    bool decoupled_weight_decay = true;
    double clip_norm = 1.0;
    double scheduler_factor = 0.5;
    int scheduler_patience = 10;
    double early_stop_delta = 0.1;
    std::size_t early_stop_epochs = 7;
    std::size_t final_window = 10;
    std::size_t hidden_dim = 256;
    double leaky_slope = 0.2;
    double ema_decay = 0.01;
    bool ema_per_batch = true;
    bool mine_ema_gradient = true;
    std::string marginal_mode = "within-batch";
    bool club_all_pairs = false;
    std::size_t ksg_k = 5;
    double ksg_noise = 1e-10;
    std::size_t bootstrap = 10;
    std::string pairing = "same-rows";
    std::size_t workers = 1;
    std::vector<PairSpec> pairs;
    std::optional<AttributionSpec> attribution;

    MarginalMode marginal_mode_enum() const {
        if (marginal_mode == "within-batch") return MarginalMode::WithinBatch;
        if (marginal_mode == "full-shuffle") return MarginalMode::FullShuffle;
        throw ConfigError("marginal_mode must be 'within-batch' or 'full-shuffle'");
    }

    PairingPolicy pairing_enum() const {
        if (pairing == "same-rows") return PairingPolicy::SameRows;
        if (pairing == "random") return PairingPolicy::RandomPairing;
        throw ConfigError("pairing must be 'same-rows' or 'random'");
    }

    /// Trainer view of this configuration; the pair seed is set per pair.
    TrainPairConfig trainer_config() const {
        TrainPairConfig t;
        t.ensemble = ensemble;
        t.epochs = epochs;
        t.batch_size = batch_size;
        t.learning_rate = learning_rate;
        t.weight_decay = weight_decay;
        t.decoupled_weight_decay = decoupled_weight_decay;
        t.clip_norm = clip_norm;
        t.scheduler_factor = scheduler_factor;
        t.scheduler_patience = scheduler_patience;
        t.early_stop_delta = early_stop_delta;
        t.early_stop_epochs = early_stop_epochs;
        t.final_window = final_window;
        t.hidden_dim = hidden_dim;
        t.leaky_slope = leaky_slope;
        t.ema_decay = ema_decay;
        t.ema_per_batch = ema_per_batch;
        t.mine_ema_gradient = mine_ema_gradient;
        t.marginal_mode = marginal_mode_enum();
        t.club_all_pairs = club_all_pairs;
        t.ksg.k = ksg_k;
        t.ksg.noise = ksg_noise;
        t.workers = workers;
        return t;
    }

    /// Collects every violated field into one error message.
    void validate(bool require_pairs) const {
        std::vector<std::string> bad;
        if (n_samples < 2) bad.push_back("n_samples must be >= 2");
        if (ensemble == 0) bad.push_back("ensemble must be >= 1");
        if (epochs == 0) bad.push_back("epochs must be >= 1");
        if (batch_size == 0) bad.push_back("batch_size must be >= 1");
        if (!(learning_rate > 0.0)) bad.push_back("learning_rate must be > 0");
        if (weight_decay < 0.0) bad.push_back("weight_decay must be >= 0");
        if (!(clip_norm > 0.0)) bad.push_back("clip_norm must be > 0");
        if (!(scheduler_factor > 0.0 && scheduler_factor <= 1.0))
            bad.push_back("scheduler_factor must lie in (0, 1]");
        if (scheduler_patience < 1) bad.push_back("scheduler_patience must be >= 1");
        if (!(early_stop_delta > 0.0)) bad.push_back("early_stop_delta must be > 0");
        if (early_stop_epochs == 0) bad.push_back("early_stop_epochs must be >= 1");
        if (final_window == 0) bad.push_back("final_window must be >= 1");
        if (hidden_dim == 0) bad.push_back("hidden_dim must be >= 1");
        if (ema_decay <= 0.0 || ema_decay > 1.0) bad.push_back("ema_decay must lie in (0, 1]");
        if (marginal_mode != "within-batch" && marginal_mode != "full-shuffle")
            bad.push_back("marginal_mode must be 'within-batch' or 'full-shuffle'");
        if (ksg_k == 0) bad.push_back("ksg_k must be >= 1");
        if (ksg_noise < 0.0) bad.push_back("ksg_noise must be >= 0");
        if (bootstrap < 2) bad.push_back("bootstrap must be >= 2");
        if (pairing != "same-rows" && pairing != "random")
            bad.push_back("pairing must be 'same-rows' or 'random'");
        if (workers == 0) bad.push_back("workers must be >= 1");
        if (require_pairs && pairs.empty()) bad.push_back("pairs must not be empty");
        std::vector<std::string> seen;
        for (const auto& p : pairs) {
            if (p.name.empty()) {
                bad.push_back("every pair needs a name");
                continue;
            }
            if (std::find(seen.begin(), seen.end(), p.name) != seen.end())
                bad.push_back("duplicate pair name '" + p.name + "'");
            seen.push_back(p.name);
            const bool files = !p.x_path.empty() && !p.y_path.empty();
            if (files == p.synth.has_value())
                bad.push_back("pair '" + p.name + "' needs either x/y paths or a synth block");
        }
        if (attribution) {
            if (attribution->source_path.empty()) bad.push_back("attribution.source missing");
            if (attribution->filter_path.empty()) bad.push_back("attribution.filter missing");
            if (attribution->dimensions.empty())
                bad.push_back("attribution.dimensions must not be empty");
        }
        if (!bad.empty()) {
            std::string msg = "invalid configuration:";
            for (const auto& b : bad) msg += "\n  - " + b;
            throw ConfigError(msg);
        }
    }
};

namespace detail {

template <typename T>
void get_if_present(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

inline SyntheticSpec synth_from_json(const json& j) {
    SyntheticSpec s;
    std::string family = "correlated-gaussian";
    get_if_present(j, "family", family);
    s.family = synth_family_from_string(family);
    get_if_present(j, "dx", s.d_x);
    get_if_present(j, "dy", s.d_y);
    get_if_present(j, "coupled", s.coupled);
    get_if_present(j, "rho", s.rho);
    get_if_present(j, "n", s.n);
    get_if_present(j, "seed", s.seed);
    return s;
}

inline json synth_to_json(const SyntheticSpec& s) {
    return json{{"family", to_string(s.family)}, {"dx", s.d_x},   {"dy", s.d_y},
                {"coupled", s.coupled},          {"rho", s.rho},  {"n", s.n},
                {"seed", s.seed}};
}

}  // namespace detail

inline RunConfig config_from_json(const json& j) {
    RunConfig c;
    using detail::get_if_present;
    get_if_present(j, "seed", c.seed);
    get_if_present(j, "n_samples", c.n_samples);
    get_if_present(j, "ensemble", c.ensemble);
    get_if_present(j, "epochs", c.epochs);
    get_if_present(j, "batch_size", c.batch_size);
    get_if_present(j, "learning_rate", c.learning_rate);
    get_if_present(j, "weight_decay", c.weight_decay);
    get_if_present(j, "decoupled_weight_decay", c.decoupled_weight_decay);
    get_if_present(j, "clip_norm", c.clip_norm);
    get_if_present(j, "scheduler_factor", c.scheduler_factor);
    get_if_present(j, "scheduler_patience", c.scheduler_patience);
    get_if_present(j, "early_stop_delta", c.early_stop_delta);
    get_if_present(j, "early_stop_epochs", c.early_stop_epochs);
    get_if_present(j, "final_window", c.final_window);
    get_if_present(j, "hidden_dim", c.hidden_dim);
    get_if_present(j, "leaky_slope", c.leaky_slope);
    get_if_present(j, "ema_decay", c.ema_decay);
    get_if_present(j, "ema_per_batch", c.ema_per_batch);
    get_if_present(j, "mine_ema_gradient", c.mine_ema_gradient);
    get_if_present(j, "marginal_mode", c.marginal_mode);
    get_if_present(j, "club_all_pairs", c.club_all_pairs);
    get_if_present(j, "ksg_k", c.ksg_k);
    get_if_present(j, "ksg_noise", c.ksg_noise);
    get_if_present(j, "bootstrap", c.bootstrap);
    get_if_present(j, "pairing", c.pairing);
    get_if_present(j, "workers", c.workers);
    if (j.contains("pairs")) {
        for (const auto& pj : j.at("pairs")) {
            PairSpec p;
            detail::get_if_present(pj, "name", p.name);
            detail::get_if_present(pj, "combination", p.combination);
            detail::get_if_present(pj, "x", p.x_path);
            detail::get_if_present(pj, "y", p.y_path);
            if (pj.contains("synth")) p.synth = detail::synth_from_json(pj.at("synth"));
            if (pj.contains("pairing")) {
                const std::string pol = pj.at("pairing").get<std::string>();
                if (pol == "same-rows") p.pairing = PairingPolicy::SameRows;
                else if (pol == "random") p.pairing = PairingPolicy::RandomPairing;
                else throw ConfigError("pair '" + p.name + "': unknown pairing '" + pol + "'");
            }
            c.pairs.push_back(std::move(p));
        }
    }
    if (j.contains("attribution")) {
        const auto& aj = j.at("attribution");
        AttributionSpec a;
        detail::get_if_present(aj, "source", a.source_path);
        detail::get_if_present(aj, "filter", a.filter_path);
        if (aj.contains("dimensions")) {
            for (const auto& dj : aj.at("dimensions")) {
                DimensionSpec d;
                detail::get_if_present(dj, "name", d.name);
                detail::get_if_present(dj, "path", d.path);
                a.dimensions.push_back(std::move(d));
            }
        }
        c.attribution = std::move(a);
    }
    return c;
}

inline json config_to_json(const RunConfig& c) {
    json j{{"seed", c.seed},
           {"n_samples", c.n_samples},
           {"ensemble", c.ensemble},
           {"epochs", c.epochs},
           {"batch_size", c.batch_size},
           {"learning_rate", c.learning_rate},
           {"weight_decay", c.weight_decay},
           {"decoupled_weight_decay", c.decoupled_weight_decay},
           {"clip_norm", c.clip_norm},
           {"scheduler_factor", c.scheduler_factor},
           {"scheduler_patience", c.scheduler_patience},
           {"early_stop_delta", c.early_stop_delta},
           {"early_stop_epochs", c.early_stop_epochs},
           {"final_window", c.final_window},
           {"hidden_dim", c.hidden_dim},
           {"leaky_slope", c.leaky_slope},
           {"ema_decay", c.ema_decay},
           {"ema_per_batch", c.ema_per_batch},
           {"mine_ema_gradient", c.mine_ema_gradient},
           {"marginal_mode", c.marginal_mode},
           {"club_all_pairs", c.club_all_pairs},
           {"ksg_k", c.ksg_k},
           {"ksg_noise", c.ksg_noise},
           {"bootstrap", c.bootstrap},
           {"pairing", c.pairing},
           {"workers", c.workers}};
    j["pairs"] = json::array();
    for (const auto& p : c.pairs) {
        json pj{{"name", p.name}, {"combination", p.combination}};
        if (p.synth) pj["synth"] = detail::synth_to_json(*p.synth);
        else {
            pj["x"] = p.x_path;
            pj["y"] = p.y_path;
        }
        if (p.pairing) pj["pairing"] = to_string(*p.pairing);
        j["pairs"].push_back(std::move(pj));
    }
    if (c.attribution) {
        json aj{{"source", c.attribution->source_path},
                {"filter", c.attribution->filter_path}};
        aj["dimensions"] = json::array();
        for (const auto& d : c.attribution->dimensions)
            aj["dimensions"].push_back(json{{"name", d.name}, {"path", d.path}});
        j["attribution"] = std::move(aj);
    }
    return j;
}

/// Every top-level scalar key can be overridden through MIB_<UPPERCASE_KEY>
/// (e.g. MIB_SEED, MIB_BATCH_SIZE). The mapping is documented in the README.
inline void apply_env_overrides(RunConfig& c) {
    auto env = [](const char* key) -> std::optional<std::string> {
        const char* v = std::getenv(key);
        if (!v) return std::nullopt;
        return std::string(v);
    };
    auto parse_bool = [](const std::string& key, const std::string& s) {
        if (s == "1" || s == "true") return true;
        if (s == "0" || s == "false") return false;
        throw ConfigError(key + ": boolean env override must be 0/1/true/false");
    };
    auto set_u64 = [&](const char* key, auto& out) {
        if (auto v = env(key)) {
            try {
                out = static_cast<std::remove_reference_t<decltype(out)>>(std::stoull(*v));
            } catch (const std::exception&) {
                throw ConfigError(std::string(key) + ": invalid integer '" + *v + "'");
            }
        }
    };
    auto set_int = [&](const char* key, int& out) {
        if (auto v = env(key)) {
            try {
                out = std::stoi(*v);
            } catch (const std::exception&) {
                throw ConfigError(std::string(key) + ": invalid integer '" + *v + "'");
            }
        }
    };
    auto set_double = [&](const char* key, double& out) {
        if (auto v = env(key)) {
            try {
                out = std::stod(*v);
            } catch (const std::exception&) {
                throw ConfigError(std::string(key) + ": invalid number '" + *v + "'");
            }
        }
    };
    auto set_bool = [&](const char* key, bool& out) {
        if (auto v = env(key)) out = parse_bool(key, *v);
    };
    auto set_string = [&](const char* key, std::string& out) {
        if (auto v = env(key)) out = *v;
    };

    set_u64("MIB_SEED", c.seed);
    set_u64("MIB_N_SAMPLES", c.n_samples);
    set_u64("MIB_ENSEMBLE", c.ensemble);
    set_u64("MIB_EPOCHS", c.epochs);
    set_u64("MIB_BATCH_SIZE", c.batch_size);
    set_double("MIB_LEARNING_RATE", c.learning_rate);
    set_double("MIB_WEIGHT_DECAY", c.weight_decay);
    set_bool("MIB_DECOUPLED_WEIGHT_DECAY", c.decoupled_weight_decay);
    set_double("MIB_CLIP_NORM", c.clip_norm);
    set_double("MIB_SCHEDULER_FACTOR", c.scheduler_factor);
    set_int("MIB_SCHEDULER_PATIENCE", c.scheduler_patience);
    set_double("MIB_EARLY_STOP_DELTA", c.early_stop_delta);
    set_u64("MIB_EARLY_STOP_EPOCHS", c.early_stop_epochs);
    set_u64("MIB_FINAL_WINDOW", c.final_window);
    set_u64("MIB_HIDDEN_DIM", c.hidden_dim);
    set_double("MIB_LEAKY_SLOPE", c.leaky_slope);
    set_double("MIB_EMA_DECAY", c.ema_decay);
    set_bool("MIB_EMA_PER_BATCH", c.ema_per_batch);
    set_bool("MIB_MINE_EMA_GRADIENT", c.mine_ema_gradient);
    set_string("MIB_MARGINAL_MODE", c.marginal_mode);
    set_bool("MIB_CLUB_ALL_PAIRS", c.club_all_pairs);
    set_u64("MIB_KSG_K", c.ksg_k);
    set_double("MIB_KSG_NOISE", c.ksg_noise);
    set_u64("MIB_BOOTSTRAP", c.bootstrap);
    set_string("MIB_PAIRING", c.pairing);
    set_u64("MIB_WORKERS", c.workers);
}

inline RunConfig load_config(const std::string& path, bool env_overrides = true) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
    RunConfig c;
    try {
        c = config_from_json(j);
    } catch (const json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
    if (env_overrides) apply_env_overrides(c);
    return c;
}

}  // namespace mib
