// srlab: numerical checks for submersions, sprays, connections, and local
// additions on charted manifolds, reported per scenario as deterministic JSON.
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "srlab/runner.hpp"

namespace {

int exit_code_for(const srlab::Error& e) {
    using srlab::ErrorCode;
    switch (e.code()) {
        case ErrorCode::UnknownScenario:
        case ErrorCode::UnknownCheck:
        case ErrorCode::ConfigParse:
        case ErrorCode::BadArgument:
            return 2;
        default:
            return 1;
    }
}

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

void apply_tol_flags(srlab::RunConfig& cfg, const std::vector<std::string>& kvs) {
    for (const std::string& kv : kvs) {
        auto eq = kv.find('=');
        if (eq == std::string::npos || eq == 0)
            throw srlab::Error(srlab::ErrorCode::BadArgument,
                               "--tol expects NAME=VALUE, got '" + kv + "'");
        try {
            cfg.tolerances[kv.substr(0, eq)] = std::stod(kv.substr(eq + 1));
        } catch (const std::exception&) {
            throw srlab::Error(srlab::ErrorCode::BadArgument,
                               "--tol value in '" + kv + "' is not a number");
        }
    }
}

void print_entries(const srlab::Report& rep) {
    for (const srlab::ReportEntry& e : rep.entries) {
        const char* tag = e.pass ? "[PASS]" : (e.expected_fail ? "[XFAIL]" : "[FAIL]");
        std::printf("%-7s %-28s statistic %- .3e  tolerance %- .3e  %s\n", tag,
                    e.check.c_str(), e.max_residual, e.tolerance, e.anchor.c_str());
        if (!e.pass && !e.expected_fail && !e.note.empty())
            std::printf("        note: %s\n", e.note.c_str());
    }
    std::printf("overall: %s\n", rep.overall() ? "PASS" : "FAIL");
}

int cmd_run(const srlab::RunConfig& cfg) {
    srlab::Report rep = srlab::run_scenario(cfg);
    print_entries(rep);
    if (!cfg.output_dir.empty()) {
        auto path = srlab::write_report(rep, cfg.output_dir);
        std::printf("report: %s\n", path.string().c_str());
    }
    return rep.overall() ? 0 : 1;
}

int cmd_list() {
    std::printf("scenarios:\n");
    for (const srlab::ScenarioInfo& s : srlab::scenario_registry())
        std::printf("  %-16s %s\n", s.name.c_str(), s.description.c_str());
    std::printf("\nchecks:\n");
    for (const srlab::CheckDef& d : srlab::check_registry()) {
        std::printf("  %-18s %s\n", d.name.c_str(), d.description.c_str());
        std::printf("  %-18s   verifies: %s\n", "", d.anchor.c_str());
        if (!d.scenarios.empty()) {
            std::string only;
            for (const auto& s : d.scenarios) only += (only.empty() ? "" : ", ") + s;
            std::printf("  %-18s   scenarios: %s\n", "", only.c_str());
        }
    }
    return 0;
}

int cmd_probe(const std::string& scenario, std::uint64_t seed) {
    auto sc = srlab::make_scenario(scenario);
    srlab::Rng rng(seed);
    srlab::Point z = sc->loop(0.0);
    std::printf("scenario %s, probing at the reference loop's base point (chart %d)\n",
                sc->name.c_str(), z.chart);
    for (double r : {0.5, 1.0, 2.0, 4.0}) {
        srlab::AdditionInjectivityResult res =
            srlab::addition_injectivity_probe(*sc->sigmaP, z, r, rng);
        std::printf(
            "  radius %4.1f: min pair gap %- .3e  min singular value %- .3e  flow failures %d\n",
            r, res.min_pair_gap, res.min_singular, res.n_flow_failures);
    }
    srlab::Point y = sc->geom.projection().eval(z);
    srlab::DomainProbeResult dom = srlab::domain_probe(*sc->SN, y, rng);
    std::printf(
        "  base spray domain at the projected point: radius %.4f  (flow failures %d, "
        "collisions %d)\n",
        dom.radius, dom.n_flow_failures, dom.n_collisions);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"numerical differential-geometry checks on charted manifolds"};
    app.require_subcommand(1);

    srlab::RunConfig cfg;
    if (const char* env_out = std::getenv("SRLAB_OUT")) cfg.output_dir = env_out;

    std::string checks_csv, config_path;
    std::vector<std::string> tol_kvs;

    CLI::App* run = app.add_subcommand("run", "run checks for a scenario and write a report");
    run->add_option("--scenario", cfg.scenario, "scenario name (see 'list')");
    run->add_option("--checks", checks_csv, "comma-separated check names, or 'all'");
    run->add_option("--seed", cfg.seed, "base seed for the deterministic sampler");
    run->add_option("--grid-n", cfg.grid_n, "nodes in the discretized source circle");
    run->add_option("--tol", tol_kvs, "tolerance override NAME=VALUE (repeatable)");
    run->add_option("--out", cfg.output_dir, "directory for report.json (default $SRLAB_OUT)");
    run->add_flag("--emit-traces", cfg.emit_traces, "write plot-data CSVs next to the report");
    run->add_option("--config", config_path, "JSON config file; explicit flags win");

    CLI::App* list = app.add_subcommand("list", "list scenarios and checks");

    std::string probe_scenario = "hopf";
    std::uint64_t probe_seed = 1;
    CLI::App* probe =
        app.add_subcommand("probe", "probe injectivity radii of the composite addition");
    probe->add_option("--scenario", probe_scenario, "scenario name");
    probe->add_option("--seed", probe_seed, "sampler seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (list->parsed()) return cmd_list();
        if (probe->parsed()) return cmd_probe(probe_scenario, probe_seed);

        if (!config_path.empty()) {
            srlab::RunConfig file_cfg = srlab::load_config(config_path);
            // Flags given on the command line override the file.
            if (run->count("--scenario") == 0) cfg.scenario = file_cfg.scenario;
            if (run->count("--checks") == 0) cfg.checks = file_cfg.checks;
            if (run->count("--seed") == 0) cfg.seed = file_cfg.seed;
            if (run->count("--grid-n") == 0) cfg.grid_n = file_cfg.grid_n;
            if (run->count("--out") == 0 && !file_cfg.output_dir.empty())
                cfg.output_dir = file_cfg.output_dir;
            if (run->count("--emit-traces") == 0) cfg.emit_traces = file_cfg.emit_traces;
            cfg.tolerances = file_cfg.tolerances;
            cfg.integrator = file_cfg.integrator;  // no flag equivalent
        }
        if (run->count("--checks") > 0) cfg.checks = split_csv(checks_csv);
        apply_tol_flags(cfg, tol_kvs);
        return cmd_run(cfg);
    } catch (const srlab::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
