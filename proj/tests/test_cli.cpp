#include "catch_amalgamated.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "mib/common.hpp"

// End-to-end runs of the built binary.

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct TempDir {
    fs::path path;
    explicit TempDir(const char* name) {
        path = fs::temp_directory_path() / name;
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

int run(const std::string& args) {
    const std::string cmd = std::string(MIB_BINARY) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write(const fs::path& p, const std::string& body) {
    std::ofstream out(p);
    out << body;
}

const char* kSweepConfig = R"({
  "seed": 21,
  "n_samples": 500,
  "ensemble": 2,
  "epochs": 30,
  "batch_size": 64,
  "workers": 2,
  "pairs": [
    {"name": "rho00", "synth": {"family": "correlated-gaussian", "rho": 0.0, "n": 600, "seed": 1}},
    {"name": "rho03", "synth": {"family": "correlated-gaussian", "rho": 0.3, "n": 600, "seed": 1}},
    {"name": "rho06", "synth": {"family": "correlated-gaussian", "rho": 0.6, "n": 600, "seed": 1}},
    {"name": "rho09", "synth": {"family": "correlated-gaussian", "rho": 0.9, "n": 600, "seed": 1}}
  ]
})";

}  // namespace

TEST_CASE("synth writes the pair and a ground-truth sidecar") {
    TempDir dir("mib_cli_synth");
    REQUIRE(run("synth --family correlated-gaussian --rho 0.9 --n 500 --seed 3 --out " +
                dir.path.string()) == 0);
    REQUIRE(fs::exists(dir.path / "x.csv"));
    REQUIRE(fs::exists(dir.path / "y.csv"));
    const json truth = json::parse(slurp(dir.path / "truth.json"));
    REQUIRE(truth.at("true_mi").get<double>() ==
            Catch::Approx(0.8303656034108255).margin(1e-9));

    // two seeds differ in data, agree in ground truth
    TempDir dir2("mib_cli_synth2");
    REQUIRE(run("synth --family correlated-gaussian --rho 0.9 --n 500 --seed 4 --out " +
                dir2.path.string()) == 0);
    REQUIRE(slurp(dir2.path / "x.csv") != slurp(dir.path / "x.csv"));
    REQUIRE(json::parse(slurp(dir2.path / "truth.json")).at("true_mi") ==
            truth.at("true_mi"));
}

TEST_CASE("synth rejects invalid correlation") {
    TempDir dir("mib_cli_synth_bad");
    REQUIRE(run("synth --rho 1.5 --n 100 --out " + dir.path.string()) == 3);
}

TEST_CASE("estimate produces a structurally sound, reproducible report") {
    TempDir dir("mib_cli_est");
    const fs::path cfg = dir.path / "cfg.json";
    write(cfg, kSweepConfig);

    REQUIRE(run("estimate --config " + cfg.string() + " --out " +
                (dir.path / "out1").string()) == 0);
    const json report = json::parse(slurp(dir.path / "out1" / "report.json"));
    REQUIRE(report.at("pairs").size() == 4);

    SECTION("every row is self-consistent under the fusion rule") {
        for (const auto& p : report.at("pairs")) {
            const auto& e = p.at("estimates");
            const double recomputed =
                (1.0 - e.at("weight").get<double>()) * 0.5 *
                    (e.at("mine").get<double>() + e.at("club").get<double>()) +
                e.at("weight").get<double>() * e.at("ksg").get<double>();
            REQUIRE(e.at("final").get<double>() ==
                    Catch::Approx(recomputed).margin(1e-12));
        }
    }
    SECTION("final column is monotone nondecreasing in rho") {
        std::vector<double> finals;
        for (const auto& p : report.at("pairs"))
            finals.push_back(p.at("estimates").at("final").get<double>());
        // adjacent analytic gaps at the low end (0 vs 0.046 nats) sit inside
        // estimator noise at n=500, hence the small slack
        for (std::size_t i = 1; i < finals.size(); ++i)
            REQUIRE(finals[i] >= finals[i - 1] - 0.02);
        REQUIRE(finals.back() > finals.front() + 0.2);
    }
    SECTION("rerun with the same master seed is byte-identical") {
        REQUIRE(run("estimate --config " + cfg.string() + " --out " +
                    (dir.path / "out2").string()) == 0);
        REQUIRE(slurp(dir.path / "out1" / "report.json") ==
                slurp(dir.path / "out2" / "report.json"));
        REQUIRE(slurp(dir.path / "out1" / "traces.csv") ==
                slurp(dir.path / "out2" / "traces.csv"));
    }
    SECTION("report subcommand re-renders identical tables") {
        REQUIRE(run("report --report " + (dir.path / "out1" / "report.json").string() +
                    " --out " + (dir.path / "rerender").string()) == 0);
        REQUIRE(slurp(dir.path / "rerender" / "heatmap.csv") ==
                slurp(dir.path / "out1" / "heatmap.csv"));
        REQUIRE(slurp(dir.path / "rerender" / "traces.csv") ==
                slurp(dir.path / "out1" / "traces.csv"));
    }
    SECTION("seed flag overrides the config seed") {
        REQUIRE(run("estimate --config " + cfg.string() + " --seed 99 --out " +
                    (dir.path / "out3").string()) == 0);
        REQUIRE(slurp(dir.path / "out1" / "report.json") !=
                slurp(dir.path / "out3" / "report.json"));
    }
}

TEST_CASE("config errors exit with the config code and list all violations") {
    TempDir dir("mib_cli_badcfg");
    const fs::path cfg = dir.path / "bad.json";
    write(cfg, R"({"epochs": 0, "pairing": "sideways", "pairs": []})");
    const std::string cmd = std::string(MIB_BINARY) + " estimate --config " +
                            cfg.string() + " --out " + (dir.path / "out").string() +
                            " 2> " + (dir.path / "err.txt").string();
    REQUIRE(WEXITSTATUS(std::system(cmd.c_str())) == 2);
    const std::string err = slurp(dir.path / "err.txt");
    REQUIRE(err.find("epochs") != std::string::npos);
    REQUIRE(err.find("pairing") != std::string::npos);
    REQUIRE(err.find("pairs") != std::string::npos);
}

TEST_CASE("missing input data exits with the data code") {
    TempDir dir("mib_cli_missing");
    const fs::path cfg = dir.path / "cfg.json";
    write(cfg, R"({"pairs": [{"name": "p", "x": "/nonexistent/x.csv", "y": "/nonexistent/y.csv"}]})");
    REQUIRE(run("estimate --config " + cfg.string() + " --out " +
                (dir.path / "out").string()) == 3);
}

TEST_CASE("unknown flags exit with the config code") {
    REQUIRE(run("estimate --nonsense") == 2);
}

TEST_CASE("attribute runs from feature files") {
    TempDir dir("mib_cli_attr");
    // dimension strongly coupled to the source block
    REQUIRE(run("synth --family correlated-gaussian --rho 0.95 --dx 3 --dy 3 --n 400 "
                "--seed 5 --out " +
                (dir.path / "sd").string()) == 0);
    REQUIRE(run("synth --family independent-uniform --dx 3 --dy 2 --n 400 --seed 6 "
                "--out " +
                (dir.path / "f").string()) == 0);
    const fs::path cfg = dir.path / "cfg.json";
    write(cfg, std::string(R"({
      "n_samples": 400,
      "attribution": {
        "source": ")") + (dir.path / "sd" / "x.csv").string() + R"(",
        "filter": ")" + (dir.path / "f" / "x.csv").string() + R"(",
        "dimensions": [{"name": "dim", "path": ")" +
                   (dir.path / "sd" / "y.csv").string() + R"("}]
      }
    })");
    REQUIRE(run("attribute --config " + cfg.string() + " --out " +
                (dir.path / "out").string()) == 0);
    const json attr = json::parse(slurp(dir.path / "out" / "attribution.json"));
    REQUIRE(attr.size() == 1);
    REQUIRE(attr[0].at("a_source").get<double>() > 0.9);
    const std::string csv = slurp(dir.path / "out" / "attribution.csv");
    REQUIRE(csv.find("dim,") != std::string::npos);

    // deterministic rerun
    REQUIRE(run("attribute --config " + cfg.string() + " --out " +
                (dir.path / "out2").string()) == 0);
    REQUIRE(slurp(dir.path / "out" / "attribution.json") ==
            slurp(dir.path / "out2" / "attribution.json"));
}
