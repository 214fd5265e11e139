#pragma once

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "mib/runner.hpp"

namespace mib {

inline constexpr const char* kReportSchema = "mibracket-report-v1";

namespace detail {

inline json bracket_to_json(const MiBracket& b, double zero_clamped) {
    return json{{"mine", b.mine},       {"club", b.club},
                {"delta", b.delta},     {"ksg", b.ksg},
                {"weight", b.weight},   {"final", b.final},
                {"raw_mine", b.raw_mine}, {"mine_zero_clamped", zero_clamped}};
}

inline json stats_to_json(const std::vector<ColumnStats>& stats) {
    json arr = json::array();
    for (const auto& s : stats)
        arr.push_back(json{{"mean", s.mean}, {"std", s.std}, {"constant", s.constant}});
    return arr;
}

inline json trace_to_json(const TrainTrace& t) {
    return json{{"mine", t.mine},
                {"club", t.club},
                {"delta", t.delta},
                {"lr", t.lr},
                {"member_seed", t.member_seed},
                {"early_stop_epoch", t.early_stop_epoch},
                {"epochs", t.epochs()}};
}

inline json attribution_to_json(const AttributionResult& a) {
    return json{{"dimension", a.dimension},
                {"i_source", a.i_source},
                {"i_filter", a.i_filter},
                {"raw_i_source", a.raw_i_source},
                {"raw_i_filter", a.raw_i_filter},
                {"floored_source", a.floored_source},
                {"floored_filter", a.floored_filter},
                {"a_source", a.a_source},
                {"a_filter", a.a_filter},
                {"ci_low", a.ci_low},
                {"ci_high", a.ci_high},
                {"bootstrap_b", a.bootstrap_b},
                {"bootstrap_used", a.bootstrap_used},
                {"seed", a.seed}};
}

/// Every reported final must be recomputable from its own row.
inline void check_row_consistency(const MiBracket& b, const std::string& pair_name) {
    const double recomputed = (1.0 - b.weight) * 0.5 * (b.mine + b.club) + b.weight * b.ksg;
    if (std::abs(recomputed - b.final) > 1e-12)
        throw Error("report: final value for pair '" + pair_name +
                    "' is not self-consistent");
}

}  // namespace detail

/// Deterministic report body: everything except wall-clock timing.
inline json report_to_json(const RunReport& report) {
    json j;
    j["schema"] = kReportSchema;
    j["config"] = config_to_json(report.config);
    j["conventions"] = json{
        {"std", "population"},
        {"ksg_tie_breaking", "seeded uniform jitter, content-keyed stream"},
        {"bootstrap_percentile", "outward nearest-rank (min/max at B=10)"},
        {"mi_units", "nats"}};
    j["pairs"] = json::array();
    for (const auto& p : report.pairs) {
        detail::check_row_consistency(p.ensemble.bracket, p.name);
        json pj{{"name", p.name},
                {"combination", p.combination},
                {"policy", p.policy},
                {"x_provenance", p.x_provenance},
                {"y_provenance", p.y_provenance},
                {"rows_used", p.rows_used},
                {"estimates", detail::bracket_to_json(p.ensemble.bracket,
                                                      p.mine_zero_clamped)},
                {"ksg_value", p.ensemble.ksg_value},
                {"member_seeds", p.ensemble.member_seeds},
                {"x_stats", detail::stats_to_json(p.x_stats)},
                {"y_stats", detail::stats_to_json(p.y_stats)},
                {"x_rows", p.x_rows},
                {"y_rows", p.y_rows},
                {"warnings", p.warnings}};
        if (std::isfinite(p.true_mi)) pj["true_mi"] = p.true_mi;
        else if (std::isinf(p.true_mi)) pj["true_mi"] = "infinity";
        json members = json::array();
        for (std::size_t m = 0; m < p.ensemble.traces.size(); ++m) {
            json mj = detail::trace_to_json(p.ensemble.traces[m]);
            mj["mine_avg"] = p.ensemble.members[m].mine_avg;
            mj["club_avg"] = p.ensemble.members[m].club_avg;
            mj["window"] = p.ensemble.members[m].window;
            members.push_back(std::move(mj));
        }
        pj["members"] = std::move(members);
        j["pairs"].push_back(std::move(pj));
    }
    j["attribution"] = json::array();
    for (const auto& a : report.attributions)
        j["attribution"].push_back(detail::attribution_to_json(a));
    return j;
}

namespace detail {

inline void write_text(const std::filesystem::path& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << body;
    if (!out) throw Error("write failed: " + path.string());
}

inline std::string fmt_double(double v) {
    char buf[32];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, p);
}

}  // namespace detail

/// Heatmap table: pair rows by combination columns, cells are Final values.
inline std::string heatmap_csv(const json& report) {
    std::set<std::string> combos;
    for (const auto& p : report.at("pairs")) combos.insert(p.at("combination"));
    std::vector<std::string> pair_names;
    for (const auto& p : report.at("pairs")) {
        const std::string n = p.at("name");
        if (std::find(pair_names.begin(), pair_names.end(), n) == pair_names.end())
            pair_names.push_back(n);
    }
    std::string out = "pair";
    for (const auto& c : combos) out += "," + c;
    out += "\n";
    for (const auto& name : pair_names) {
        out += name;
        for (const auto& c : combos) {
            out += ",";
            for (const auto& p : report.at("pairs"))
                if (p.at("name") == name && p.at("combination") == c)
                    out += detail::fmt_double(p.at("estimates").at("final").get<double>());
        }
        out += "\n";
    }
    return out;
}

/// Per-epoch convergence table across pairs and ensemble members.
inline std::string traces_csv(const json& report) {
    std::string out = "pair,combination,member,epoch,mine,club,delta,lr\n";
    for (const auto& p : report.at("pairs")) {
        const auto& members = p.at("members");
        for (std::size_t m = 0; m < members.size(); ++m) {
            const auto& t = members[m];
            const auto& mine = t.at("mine");
            for (std::size_t e = 0; e < mine.size(); ++e) {
                out += p.at("name").get<std::string>() + "," +
                       p.at("combination").get<std::string>() + "," + std::to_string(m) +
                       "," + std::to_string(e + 1) + "," +
                       detail::fmt_double(mine[e].get<double>()) + "," +
                       detail::fmt_double(t.at("club")[e].get<double>()) + "," +
                       detail::fmt_double(t.at("delta")[e].get<double>()) + "," +
                       detail::fmt_double(t.at("lr")[e].get<double>()) + "\n";
            }
        }
    }
    return out;
}

/// Stacked-bar-ready attribution table.
inline std::string attribution_csv(const json& report) {
    std::string out =
        "dimension,i_source,i_filter,a_source,a_filter,ci_low,ci_high,"
        "bootstrap_b,bootstrap_used,floored_source,floored_filter\n";
    for (const auto& a : report.at("attribution")) {
        out += a.at("dimension").get<std::string>() + "," +
               detail::fmt_double(a.at("i_source").get<double>()) + "," +
               detail::fmt_double(a.at("i_filter").get<double>()) + "," +
               detail::fmt_double(a.at("a_source").get<double>()) + "," +
               detail::fmt_double(a.at("a_filter").get<double>()) + "," +
               detail::fmt_double(a.at("ci_low").get<double>()) + "," +
               detail::fmt_double(a.at("ci_high").get<double>()) + "," +
               std::to_string(a.at("bootstrap_b").get<std::size_t>()) + "," +
               std::to_string(a.at("bootstrap_used").get<std::size_t>()) + "," +
               (a.at("floored_source").get<bool>() ? "1" : "0") + "," +
               (a.at("floored_filter").get<bool>() ? "1" : "0") + "\n";
    }
    return out;
}

/// Re-render the flat tables from a report document.
inline void write_tables(const json& report, const std::filesystem::path& out_dir) {
    detail::write_text(out_dir / "heatmap.csv", heatmap_csv(report));
    detail::write_text(out_dir / "traces.csv", traces_csv(report));
    if (!report.at("attribution").empty())
        detail::write_text(out_dir / "attribution.csv", attribution_csv(report));
}

/// Write report.json (deterministic body), run_meta.json (wall clock) and
/// the flat tables into out_dir.
inline void write_report(const RunReport& report, const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    const json body = report_to_json(report);
    detail::write_text(out_dir / "report.json", body.dump(2) + "\n");
    const json meta{{"wall_seconds", report.wall_seconds}};
    detail::write_text(out_dir / "run_meta.json", meta.dump(2) + "\n");
    write_tables(body, out_dir);
}

inline json load_report(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open report: " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    if (!j.contains("schema") || j.at("schema") != kReportSchema)
        throw ParseError(path.string() + ": not a " + std::string(kReportSchema) +
                         " document");
    return j;
}

}  // namespace mib
