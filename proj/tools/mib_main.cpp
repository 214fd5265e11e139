// mib: bracket mutual information between paired feature sets with a neural
// lower bound, a neural upper bound and a non-parametric anchor, then fuse
// and attribute. See README.md for the config schema and output layout.

#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "mib/config.hpp"
#include "mib/report.hpp"
#include "mib/runner.hpp"
#include "mib/synthetic.hpp"
#include "mib/validate.hpp"

namespace {

enum ExitCode : int {
    kOk = 0,
    kInternal = 1,
    kConfigError = 2,
    kDataError = 3,
    kTrainingFault = 4,
    kValidationFailure = 5,
};

struct CommonFlags {
    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> workers;
    std::optional<std::string> pairing;
};

mib::RunConfig load_with_overrides(const CommonFlags& flags) {
    mib::RunConfig cfg = mib::load_config(flags.config_path);
    if (flags.seed) cfg.seed = *flags.seed;
    if (flags.workers) cfg.workers = *flags.workers;
    if (flags.pairing) cfg.pairing = *flags.pairing;
    return cfg;
}

void print_bracket_row(const mib::PairReport& p) {
    const mib::MiBracket& b = p.ensemble.bracket;
    std::cout << std::left << std::setw(24) << p.name << std::right << std::fixed
              << std::setprecision(4) << "  mine " << std::setw(8) << b.mine << "  club "
              << std::setw(8) << b.club << "  delta " << std::setw(8) << b.delta
              << "  ksg " << std::setw(8) << b.ksg << "  w " << std::setprecision(2)
              << b.weight << "  final " << std::setprecision(4) << b.final << "\n";
}

int cmd_estimate(const CommonFlags& flags) {
    mib::RunConfig cfg = load_with_overrides(flags);
    cfg.validate(/*require_pairs=*/true);
    mib::RunReport report = mib::run_estimate(cfg);
    mib::write_report(report, flags.out_dir);
    for (const auto& p : report.pairs) print_bracket_row(p);
    for (const auto& a : report.attributions)
        std::cout << "attribution " << a.dimension << ": source " << std::fixed
                  << std::setprecision(3) << a.a_source << " filter " << a.a_filter
                  << " ci [" << a.ci_low << ", " << a.ci_high << "]\n";
    std::cout << "report written to " << flags.out_dir << " ("
              << std::setprecision(1) << report.wall_seconds << "s)\n";
    return kOk;
}

int cmd_attribute(const CommonFlags& flags) {
    mib::RunConfig cfg = load_with_overrides(flags);
    cfg.validate(/*require_pairs=*/false);
    if (!cfg.attribution)
        throw mib::ConfigError("attribute: config has no attribution block");
    mib::RunReport report;
    report.config = cfg;
    report.attributions = mib::run_attribution(cfg);
    std::filesystem::create_directories(flags.out_dir);
    const mib::json body = mib::report_to_json(report);
    mib::detail::write_text(std::filesystem::path(flags.out_dir) / "attribution.json",
                            body.at("attribution").dump(2) + "\n");
    mib::detail::write_text(std::filesystem::path(flags.out_dir) / "attribution.csv",
                            mib::attribution_csv(body));
    for (const auto& a : report.attributions)
        std::cout << std::left << std::setw(20) << a.dimension << std::fixed
                  << std::setprecision(4) << " source " << a.a_source << "  filter "
                  << a.a_filter << "  ci [" << a.ci_low << ", " << a.ci_high << "]  B="
                  << a.bootstrap_b << "\n";
    return kOk;
}

struct SynthFlags {
    std::string family = "correlated-gaussian";
    double rho = 0.0;
    std::size_t dx = 1, dy = 1, coupled = 0, n = 1000;
    std::uint64_t seed = 0;
    std::string out_dir;
};

int cmd_synth(const SynthFlags& flags) {
    mib::SyntheticSpec spec;
    spec.family = mib::synth_family_from_string(flags.family);
    spec.rho = flags.rho;
    spec.d_x = flags.dx;
    spec.d_y = flags.dy;
    spec.coupled = flags.coupled;
    spec.n = flags.n;
    spec.seed = flags.seed;
    const mib::SyntheticPair pair = mib::synth_generate(spec);

    std::filesystem::create_directories(flags.out_dir);
    const auto dir = std::filesystem::path(flags.out_dir);
    mib::save_features(pair.x, (dir / "x.csv").string());
    mib::save_features(pair.y, (dir / "y.csv").string());
    mib::json sidecar{{"family", mib::to_string(spec.family)},
                      {"dx", spec.d_x},
                      {"dy", spec.d_y},
                      {"coupled", spec.coupled_pairs()},
                      {"rho", spec.rho},
                      {"n", spec.n},
                      {"seed", spec.seed}};
    if (std::isfinite(pair.true_mi)) sidecar["true_mi"] = pair.true_mi;
    else sidecar["true_mi"] = "infinity";
    mib::detail::write_text(dir / "truth.json", sidecar.dump(2) + "\n");
    std::cout << "wrote " << (dir / "x.csv").string() << ", " << (dir / "y.csv").string()
              << "; true MI ";
    if (std::isfinite(pair.true_mi))
        std::cout << std::fixed << std::setprecision(4) << pair.true_mi;
    else
        std::cout << "infinite";
    std::cout << " nats\n";
    return kOk;
}

int cmd_validate(bool quick, std::uint64_t seed, std::size_t workers) {
    mib::ValidateOptions opts;
    opts.quick = quick;
    opts.seed = seed;
    opts.workers = workers;
    const auto results = mib::run_validation(opts);
    bool all_ok = true;
    for (const auto& r : results) {
        std::cout << (r.passed ? "[PASS] " : "[FAIL] ") << r.name << "\n" << r.detail;
        all_ok = all_ok && r.passed;
    }
    if (!all_ok) {
        std::cout << "failed checks:";
        for (const auto& r : results)
            if (!r.passed) std::cout << " " << r.name;
        std::cout << "\n";
        return kValidationFailure;
    }
    std::cout << "all checks passed\n";
    return kOk;
}

int cmd_report(const std::string& report_path, const std::string& out_dir) {
    const mib::json report = mib::load_report(report_path);
    std::filesystem::create_directories(out_dir);
    mib::write_tables(report, out_dir);
    std::cout << "tables re-rendered into " << out_dir << "\n";
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"bracketed mutual-information estimation toolkit"};
    app.require_subcommand(1);

    CommonFlags est_flags;
    auto* est = app.add_subcommand("estimate", "run configured pairs, write a report");
    est->add_option("--config", est_flags.config_path, "run configuration (JSON)")
        ->required();
    est->add_option("--out", est_flags.out_dir, "output directory")->required();
    est->add_option("--seed", est_flags.seed, "override the master seed");
    est->add_option("--workers", est_flags.workers, "parallel worker budget");
    est->add_option("--pairing", est_flags.pairing, "row-pairing policy")
        ->check(CLI::IsMember({"same-rows", "random"}));

    CommonFlags attr_flags;
    auto* attr = app.add_subcommand("attribute", "source/filter attribution tables");
    attr->add_option("--config", attr_flags.config_path, "run configuration (JSON)")
        ->required();
    attr->add_option("--out", attr_flags.out_dir, "output directory")->required();
    attr->add_option("--seed", attr_flags.seed, "override the master seed");
    attr->add_option("--workers", attr_flags.workers, "parallel worker budget");

    SynthFlags synth_flags;
    auto* synth = app.add_subcommand("synth", "generate a ground-truth feature pair");
    synth->add_option("--family", synth_flags.family, "generator family")
        ->check(CLI::IsMember(
            {"correlated-gaussian", "independent-uniform", "deterministic-map"}));
    synth->add_option("--rho", synth_flags.rho, "per-coordinate correlation");
    synth->add_option("--dx", synth_flags.dx, "x dimensionality");
    synth->add_option("--dy", synth_flags.dy, "y dimensionality");
    synth->add_option("--coupled", synth_flags.coupled, "coupled pairs (0 = min(dx,dy))");
    synth->add_option("--n", synth_flags.n, "rows");
    synth->add_option("--seed", synth_flags.seed, "generator seed");
    synth->add_option("--out", synth_flags.out_dir, "output directory")->required();

    bool quick = false;
    std::uint64_t val_seed = 1;
    std::size_t val_workers = 2;
    auto* val = app.add_subcommand("validate", "run the estimator acceptance battery");
    val->add_flag("--quick", quick, "reduced-seed smoke run");
    val->add_option("--seed", val_seed, "battery base seed");
    val->add_option("--workers", val_workers, "parallel worker budget");

    std::string report_path, report_out;
    auto* rep = app.add_subcommand("report", "re-render tables from a saved report");
    rep->add_option("--report", report_path, "path to report.json")->required();
    rep->add_option("--out", report_out, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfigError;
    }

    try {
        if (est->parsed()) return cmd_estimate(est_flags);
        if (attr->parsed()) return cmd_attribute(attr_flags);
        if (synth->parsed()) return cmd_synth(synth_flags);
        if (val->parsed()) return cmd_validate(quick, val_seed, val_workers);
        if (rep->parsed()) return cmd_report(report_path, report_out);
    } catch (const mib::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfigError;
    } catch (const mib::TrainingFault& e) {
        std::cerr << "training fault: " << e.what() << "\n";
        return kTrainingFault;
    } catch (const mib::ParseError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kDataError;
    } catch (const mib::Error& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kDataError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kInternal;
    }
    return kInternal;
}
