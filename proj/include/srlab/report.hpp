#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "srlab/ode.hpp"

namespace srlab {

inline constexpr int kReportSchema = 1;
inline constexpr const char* kToolVersion = "0.1.0";

inline const char* to_string(OdeMethod m) {
    return m == OdeMethod::Rk4Fixed ? "rk4_fixed" : "rk45_adaptive";
}

inline nlohmann::ordered_json integrator_to_json(const IntegratorConfig& c) {
    nlohmann::ordered_json j;
    j["method"] = to_string(c.method);
    j["h"] = c.h;
    j["atol"] = c.atol;
    j["rtol"] = c.rtol;
    j["max_steps"] = c.max_steps;
    j["chart_switch_margin"] = c.chart_switch_margin;
    return j;
}

/// One verified property. `max_residual` holds the extremal statistic of the
/// check; for lower-bound checks (rank, injectivity gaps) `pass` requires the
/// statistic to EXCEED the tolerance, which the note spells out.
struct ReportEntry {
    std::string check;
    std::string anchor;  // the mathematical statement being verified
    int n_samples = 0;
    double max_residual = 0.0;
    double tolerance = 0.0;
    bool pass = false;
    bool expected_fail = false;
    std::string note;
};

struct Report {
    int schema = kReportSchema;
    std::string scenario;
    std::string scenario_description;
    // Scenario manifest: the shape of the submersion under test.
    int total_dim = 0, base_dim = 0;
    int total_charts = 0, base_charts = 0;
    std::string connection_description;
    // Config echo.
    std::vector<std::string> requested_checks;
    std::uint64_t seed = 0;
    int grid_n = 0;
    std::map<std::string, double> tolerance_overrides;
    bool emit_traces = false;
    std::optional<IntegratorConfig> integrator;

    std::vector<ReportEntry> entries;

    /// AND of all entries, excluding those flagged expected-fail.
    bool overall() const {
        for (const ReportEntry& e : entries)
            if (!e.expected_fail && !e.pass) return false;
        return true;
    }

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["schema"] = schema;
        j["tool"] = "srlab";
        j["version"] = kToolVersion;
        nlohmann::ordered_json manifest;
        manifest["dims"] = {{"total_space", total_dim}, {"base", base_dim}};
        manifest["charts"] = {{"total_space", total_charts}, {"base", base_charts}};
        manifest["connection"] = connection_description;
        j["scenario"] = {{"name", scenario},
                         {"description", scenario_description},
                         {"manifest", manifest}};
        nlohmann::ordered_json cfg;
        cfg["checks"] = requested_checks;
        cfg["seed"] = seed;
        cfg["grid_n"] = grid_n;
        cfg["tolerances"] = tolerance_overrides;  // std::map: key-sorted, deterministic
        cfg["emit_traces"] = emit_traces;
        if (integrator) cfg["integrator"] = integrator_to_json(*integrator);
        j["config"] = cfg;
        nlohmann::ordered_json es = nlohmann::ordered_json::array();
        for (const ReportEntry& e : entries) {
            nlohmann::ordered_json je;
            je["check"] = e.check;
            je["anchor"] = e.anchor;
            je["n_samples"] = e.n_samples;
            je["max_residual"] = e.max_residual;
            je["tolerance"] = e.tolerance;
            je["pass"] = e.pass;
            je["expected_fail"] = e.expected_fail;
            je["note"] = e.note;
            es.push_back(je);
        }
        j["entries"] = es;
        j["overall"] = overall();
        return j;
    }

    std::string to_json_string() const { return to_json().dump(2) + "\n"; }
};

}  // namespace srlab
