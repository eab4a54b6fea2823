#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "srlab/checks.hpp"

namespace srlab {

struct RunConfig {
    std::string scenario = "hopf";
    std::vector<std::string> checks;  // empty or {"all"}: every applicable check
    std::map<std::string, double> tolerances;
    std::uint64_t seed = 1;
    int grid_n = 64;
    std::string output_dir;
    bool emit_traces = false;
    // Optional override for the integrator behind the scenario's local
    // additions; absent means the library's tuned default.
    std::optional<IntegratorConfig> integrator;
};

/// FNV-1a, used to derive a per-check seed so any subset of checks sees the
/// same random stream as a full run.
inline std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

namespace runner_detail {

inline const CheckDef* find_check(const std::string& name) {
    for (const CheckDef& d : check_registry())
        if (d.name == name) return &d;
    return nullptr;
}

/// Resolve requested check names to registry order, pulling in dependencies.
/// Explicit names must exist and be applicable; "all"/empty selects every
/// applicable check.
inline std::vector<const CheckDef*> resolve_checks(const std::vector<std::string>& requested,
                                                   const std::string& scenario) {
    const auto& reg = check_registry();
    bool everything =
        requested.empty() || (requested.size() == 1 && requested.front() == "all");

    std::set<std::string> selected;
    if (everything) {
        for (const CheckDef& d : reg)
            if (d.applicable_to(scenario)) selected.insert(d.name);
    } else {
        std::vector<std::string> frontier;
        for (const std::string& name : requested) {
            const CheckDef* d = find_check(name);
            if (!d)
                throw Error(ErrorCode::UnknownCheck, "unknown check '" + name + "'");
            if (!d->applicable_to(scenario))
                throw Error(ErrorCode::UnknownCheck, "check '" + name +
                                                         "' is not applicable to scenario '" +
                                                         scenario + "'");
            frontier.push_back(name);
        }
        while (!frontier.empty()) {
            std::string name = frontier.back();
            frontier.pop_back();
            if (!selected.insert(name).second) continue;
            for (const std::string& dep : find_check(name)->deps)
                if (find_check(dep)->applicable_to(scenario)) frontier.push_back(dep);
        }
    }

    std::vector<const CheckDef*> out;
    for (const CheckDef& d : reg)
        if (selected.count(d.name)) out.push_back(&d);
    return out;
}

}  // namespace runner_detail

inline Report run_scenario(const RunConfig& cfg) {
    auto sc = make_scenario(cfg.scenario, cfg.integrator);
    auto checks = runner_detail::resolve_checks(cfg.checks, cfg.scenario);

    std::string trace_dir;
    if (cfg.emit_traces && !cfg.output_dir.empty()) {
        std::filesystem::create_directories(cfg.output_dir);
        trace_dir = cfg.output_dir;
    }

    Report rep;
    rep.scenario = sc->name;
    rep.scenario_description = sc->description;
    rep.total_dim = sc->P->dim();
    rep.base_dim = sc->N->dim();
    rep.total_charts = sc->P->n_charts();
    rep.base_charts = sc->N->n_charts();
    rep.connection_description = sc->connection_description;
    for (auto* d : checks) rep.requested_checks.push_back(d->name);
    rep.seed = cfg.seed;
    rep.grid_n = cfg.grid_n;
    rep.tolerance_overrides = cfg.tolerances;
    rep.emit_traces = cfg.emit_traces;
    rep.integrator = cfg.integrator;

    for (const CheckDef* d : checks) {
        CheckContext ctx{*sc, Rng(cfg.seed ^ fnv1a64(d->name)), cfg.grid_n, &cfg.tolerances,
                         trace_dir};
        try {
            for (ReportEntry& e : d->run(ctx)) rep.entries.push_back(std::move(e));
        } catch (const Error& err) {
            ReportEntry e;
            e.check = d->name;
            e.anchor = d->anchor;
            e.pass = false;
            e.note = std::string("error: ") + err.what();
            rep.entries.push_back(std::move(e));
        }
    }
    return rep;
}

inline std::filesystem::path write_report(const Report& rep, const std::string& output_dir) {
    std::filesystem::create_directories(output_dir);
    std::filesystem::path path = std::filesystem::path(output_dir) / "report.json";
    std::ofstream os(path);
    if (!os)
        throw Error(ErrorCode::BadArgument, "cannot open " + path.string() + " for writing");
    os << rep.to_json_string();
    return path;
}

/// Parse an integrator block ({"method", "h", "atol", "rtol", "max_steps",
/// "chart_switch_margin"}, all optional) and enforce its invariants.
inline IntegratorConfig integrator_config_from_json(const nlohmann::json& j) {
    IntegratorConfig c;
    if (j.contains("method")) {
        std::string m = j.at("method").get<std::string>();
        if (m == "rk4_fixed")
            c.method = OdeMethod::Rk4Fixed;
        else if (m == "rk45_adaptive")
            c.method = OdeMethod::Rk45Adaptive;
        else
            throw Error(ErrorCode::ConfigParse, "integrator method '" + m +
                                                    "' is not rk4_fixed or rk45_adaptive");
    }
    if (j.contains("h")) c.h = j.at("h").get<double>();
    if (j.contains("atol")) c.atol = j.at("atol").get<double>();
    if (j.contains("rtol")) c.rtol = j.at("rtol").get<double>();
    if (j.contains("max_steps")) c.max_steps = j.at("max_steps").get<long>();
    if (j.contains("chart_switch_margin"))
        c.chart_switch_margin = j.at("chart_switch_margin").get<double>();
    if (!(c.h > 0.0)) throw Error(ErrorCode::ConfigParse, "integrator h must be > 0");
    if (!(c.atol > 0.0) || !(c.rtol > 0.0))
        throw Error(ErrorCode::ConfigParse, "integrator atol and rtol must be > 0");
    if (c.max_steps < 1) throw Error(ErrorCode::ConfigParse, "integrator max_steps must be >= 1");
    return c;
}

/// Populate a RunConfig from a JSON file; keys mirror the CLI flags.
inline RunConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw Error(ErrorCode::ConfigParse, "cannot open config file " + path);
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ConfigParse, std::string("config parse: ") + e.what());
    }
    RunConfig cfg;
    try {
        if (j.contains("scenario")) cfg.scenario = j.at("scenario").get<std::string>();
        if (j.contains("checks")) cfg.checks = j.at("checks").get<std::vector<std::string>>();
        if (j.contains("tolerances"))
            cfg.tolerances = j.at("tolerances").get<std::map<std::string, double>>();
        if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("grid_n")) cfg.grid_n = j.at("grid_n").get<int>();
        if (j.contains("out")) cfg.output_dir = j.at("out").get<std::string>();
        if (j.contains("emit_traces")) cfg.emit_traces = j.at("emit_traces").get<bool>();
        if (j.contains("integrator"))
            cfg.integrator = integrator_config_from_json(j.at("integrator"));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ConfigParse, std::string("config field: ") + e.what());
    }
    return cfg;
}

}  // namespace srlab
