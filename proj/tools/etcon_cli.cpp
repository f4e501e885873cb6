// etcon: design, gamma, simulate and verify from the command line.
// Talks to the library only through the C interface.

#include "etcon/etcon.h"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum Exit { kOk = 0, kFailed = 1, kUsage = 2 };

int exit_for(etcon_status st) {
    switch (st) {
        case ETCON_OK: return kOk;
        case ETCON_ERR_SCHEMA:
        case ETCON_ERR_ARGUMENT:
        case ETCON_ERR_IO:
        case ETCON_ERR_STRUCTURAL:
        case ETCON_ERR_VALIDATION: return kUsage;
        default: return kFailed;
    }
}

struct Failure {
    int code;
};

void check(etcon_status st, const char* what) {
    if (st == ETCON_OK) return;
    std::cerr << "etcon: " << what << ": " << etcon_last_error() << "\n";
    throw Failure{exit_for(st)};
}

struct CString {
    char* p = nullptr;
    ~CString() { etcon_string_free(p); }
    [[nodiscard]] std::string str() const { return p ? p : ""; }
};

struct ScenarioPtr {
    etcon_scenario* p = nullptr;
    ~ScenarioPtr() { etcon_scenario_free(p); }
};
struct DesignPtr {
    etcon_design* p = nullptr;
    ~DesignPtr() { etcon_design_free(p); }
};
struct BatchPtr {
    etcon_batch* p = nullptr;
    ~BatchPtr() { etcon_batch_free(p); }
};

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out || !(out << text)) {
        std::cerr << "etcon: cannot write " << path << "\n";
        throw Failure{kUsage};
    }
}

fs::path prepare_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        std::cerr << "etcon: cannot create " << dir << ": " << ec.message() << "\n";
        throw Failure{kUsage};
    }
    return fs::path(dir);
}

std::optional<etcon_gamma_mode> parse_mode(const std::string& s) {
    if (s.empty()) return std::nullopt;
    return s == "enumerate" ? ETCON_GAMMA_ENUMERATE : ETCON_GAMMA_WORST_CASE;
}

ScenarioPtr load_scenario(const std::string& path, const std::string& mode) {
    ScenarioPtr sc;
    check(etcon_scenario_load(path.c_str(), &sc.p), "config");
    if (auto m = parse_mode(mode)) check(etcon_scenario_set_gamma_mode(sc.p, *m), "config");
    return sc;
}

DesignPtr load_design(const std::string& path) {
    DesignPtr d;
    check(etcon_design_load(path.c_str(), &d.p), "design");
    return d;
}

void print_gamma(const std::string& gamma_json) {
    const json g = json::parse(gamma_json)["gamma_table"];
    std::printf("gamma table (%s), worst case %.6g\n", g["mode"].get<std::string>().c_str(),
                g["worst_case"].get<double>());
    for (const auto& e : g["entries"]) {
        std::string agents;
        for (const auto& a : e["agents"]) agents += (agents.empty() ? "" : ",") + std::to_string(a.get<int>());
        std::printf("  {%s}  gamma %.6g  alpha %.4g%s\n", agents.c_str(), e["gamma"].get<double>(),
                    e["alpha"].get<double>(), e["evaluated"].get<bool>() ? "" : "  (mapped)");
    }
}

int cmd_design(const std::string& config, const std::string& out_dir, const std::string& mode) {
    ScenarioPtr sc = load_scenario(config, mode);
    const fs::path dir = prepare_dir(out_dir);
    DesignPtr d;
    CString diag;
    const etcon_status st = etcon_design_run(sc.p, &d.p, &diag.p);
    if (diag.p) write_file(dir / "design_cells.json", diag.str() + "\n");
    if (st != ETCON_OK) {
        std::cerr << "etcon: design: " << etcon_last_error() << "\n";
        if (diag.p) std::cerr << "per-cell diagnostics in " << (dir / "design_cells.json").string() << "\n";
        return exit_for(st);
    }
    check(etcon_design_save(d.p, (dir / "design.json").string().c_str()), "design");
    CString js;
    check(etcon_design_to_json(d.p, &js.p), "design");
    const json doc = json::parse(js.str());
    const auto& ly = doc["lyapunov"];
    std::printf("design written to %s\n", (dir / "design.json").string().c_str());
    std::printf("alpha1 %.4g  alpha3 %.4g  gamma(full) %.6g  objective %.6g\n", ly["alpha1"].get<double>(),
                ly["alpha3"].get<double>(), ly["gamma_full"].get<double>(), ly["objective"].get<double>());
    std::printf("margins: state %.4g  full-connection error %.4g  trigger", doc["margins"]["state"].get<double>(),
                doc["margins"]["full_error"].get<double>());
    for (const auto& m : doc["margins"]["trigger"]) std::printf(" %.4g", m.get<double>());
    std::printf("\n");
    CString g;
    check(etcon_design_gamma_json(d.p, &g.p), "design");
    print_gamma(g.str());
    return kOk;
}

int cmd_gamma(const std::string& config, const std::string& design, const std::string& out_dir,
              const std::string& mode) {
    ScenarioPtr sc = load_scenario(config, mode);
    DesignPtr d = load_design(design);
    const fs::path dir = prepare_dir(out_dir);
    check(etcon_design_recompute_gamma(sc.p, d.p, parse_mode(mode).value_or(ETCON_GAMMA_WORST_CASE)), "gamma");
    CString g;
    check(etcon_design_gamma_json(d.p, &g.p), "gamma");
    write_file(dir / "gamma.json", g.str() + "\n");
    check(etcon_design_save(d.p, (dir / "design.json").string().c_str()), "gamma");
    print_gamma(g.str());
    std::printf("gamma table written to %s (design updated in %s)\n", (dir / "gamma.json").string().c_str(),
                (dir / "design.json").string().c_str());
    return kOk;
}

json run_batch(etcon_scenario* sc, etcon_design* d, etcon_sim_options opts, const fs::path& dir, bool per_trial) {
    BatchPtr b;
    check(etcon_simulate(sc, d, &opts, &b.p), "simulate");
    CString s;
    check(etcon_batch_summary_json(b.p, &s.p), "simulate");
    if (per_trial) {
        const fs::path trials = prepare_dir((dir / "trials").string());
        char name[64];
        for (int k = 0; k < etcon_batch_trials(b.p); ++k) {
            CString ts, ev;
            check(etcon_batch_trial_summary_json(b.p, k, &ts.p), "simulate");
            check(etcon_batch_events_csv(b.p, k, &ev.p), "simulate");
            std::snprintf(name, sizeof name, "trial_%04d", k);
            write_file(trials / (std::string(name) + "_summary.json"), ts.str() + "\n");
            write_file(trials / (std::string(name) + "_events.csv"), ev.str());
            if (k < opts.trace_limit) {
                CString tr;
                check(etcon_batch_trace_csv(b.p, k, &tr.p), "simulate");
                write_file(trials / (std::string(name) + "_trace.csv"), tr.str());
            }
        }
    }
    return json::parse(s.str());
}

void print_summary(const char* label, const json& s) {
    std::printf("%s: trials %d, converged %d, mean convergence time %s s, disconnected %.1f%% of the time\n", label,
                s["trials"].get<int>(), s["converged_trials"].get<int>(),
                s["convergence_time_s"].is_null() ? "n/a"
                                                  : std::to_string(s["convergence_time_s"].get<double>()).c_str(),
                100.0 * s["disconnect_fraction_mean"].get<double>());
    std::printf("  per agent:");
    const auto& f = s["disconnect_fraction_per_agent"];
    const auto& c = s["connection_counts_per_agent"];
    for (std::size_t i = 0; i < f.size(); ++i)
        std::printf("  [%zu] off %.1f%%, %.1f connections", i + 1, 100.0 * f[i].get<double>(), c[i].get<double>());
    std::printf("\n  events %.1f, invariance violations %d, soundness violations %d\n", s["n_events"].get<double>(),
                s["invariance_violations"].get<int>(), s["soundness_violations"].get<int>());
}

int cmd_simulate(const std::string& config, const std::string& design, const std::string& out_dir, int trials,
                 std::optional<std::uint64_t> seed, bool always, int threads, int traces, const std::string& mode) {
    ScenarioPtr sc = load_scenario(config, mode);
    DesignPtr d = load_design(design);
    const fs::path dir = prepare_dir(out_dir);
    etcon_sim_options opts;
    etcon_sim_options_init(&opts);
    opts.trials = trials;
    opts.threads = threads;
    opts.trace_limit = traces;
    if (seed) {
        opts.seed = *seed;
        opts.use_seed = 1;
    }
    const json protocol = run_batch(sc.p, d.p, opts, dir, true);
    print_summary("protocol", protocol);
    if (!always) {
        write_file(dir / "summary.json", protocol.dump(2) + "\n");
        std::printf("outputs in %s\n", dir.string().c_str());
        return kOk;
    }
    opts.always_connected = 1;
    const json baseline = run_batch(sc.p, d.p, opts, dir, false);
    print_summary("always connected", baseline);
    json cmp = {{"protocol", protocol}, {"always_connected", baseline}};
    if (!protocol["convergence_time_s"].is_null() && !baseline["convergence_time_s"].is_null()) {
        const double a = protocol["convergence_time_s"].get<double>();
        const double b = baseline["convergence_time_s"].get<double>();
        cmp["convergence_relative_difference"] = std::abs(a - b) / b;
        std::printf("relative difference in mean convergence time: %.3f%%\n", 100.0 * std::abs(a - b) / b);
    }
    write_file(dir / "summary.json", cmp.dump(2) + "\n");
    std::printf("outputs in %s\n", dir.string().c_str());
    return kOk;
}

int cmd_verify(const std::string& config, const std::string& design, const std::string& out_dir) {
    ScenarioPtr sc = load_scenario(config, "");
    DesignPtr d = load_design(design);
    CString rep;
    int pass = 0;
    check(etcon_verify(sc.p, d.p, &rep.p, &pass), "verify");
    const json r = json::parse(rep.str());
    for (const auto& c : r["checks"]) {
        std::printf("%s  %s  (margin %.4g)", c["pass"].get<bool>() ? "PASS" : "FAIL", c["name"].get<std::string>().c_str(),
                    c["margin"].get<double>());
        if (!c["pass"].get<bool>() && !c["detail"].get<std::string>().empty())
            std::printf("  %s", c["detail"].get<std::string>().c_str());
        std::printf("\n");
    }
    if (!out_dir.empty()) write_file(prepare_dir(out_dir) / "verify.json", rep.str() + "\n");
    std::printf("%s\n", pass ? "all checks passed" : "verification FAILED");
    return pass ? kOk : kFailed;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Event-triggered network connection: design, gamma tables, simulation and verification"};
    app.set_version_flag("--version", std::string(etcon_version()));
    app.require_subcommand(1);

    std::string config, design, out_dir = "out", mode;
    int trials = 1, threads = 0, traces = 1;
    std::optional<std::uint64_t> seed;
    bool always = false;
    const auto modes = CLI::IsMember({"enumerate", "worst_case"});

    auto* design_cmd = app.add_subcommand("design", "Synthesize gains and solve the Lyapunov design");
    design_cmd->add_option("config", config, "Scenario configuration (JSON)")->required()->check(CLI::ExistingFile);
    design_cmd->add_option("--out", out_dir, "Output directory");
    design_cmd->add_option("--gamma-mode", mode, "Gamma table mode")->check(modes);

    auto* gamma_cmd = app.add_subcommand("gamma", "Rebuild the gamma table of a design");
    gamma_cmd->add_option("config", config, "Scenario configuration (JSON)")->required()->check(CLI::ExistingFile);
    gamma_cmd->add_option("design", design, "Design file (JSON)")->required()->check(CLI::ExistingFile);
    gamma_cmd->add_option("--out", out_dir, "Output directory");
    gamma_cmd->add_option("--gamma-mode", mode, "Gamma table mode")->check(modes);

    auto* sim_cmd = app.add_subcommand("simulate", "Run simulation trials");
    sim_cmd->add_option("config", config, "Scenario configuration (JSON)")->required()->check(CLI::ExistingFile);
    sim_cmd->add_option("design", design, "Design file (JSON)")->required()->check(CLI::ExistingFile);
    sim_cmd->add_option("--out", out_dir, "Output directory");
    sim_cmd->add_option("--trials", trials, "Number of trials")->check(CLI::PositiveNumber);
    sim_cmd->add_option("--seed", seed, "Base seed (trial k uses seed + k)");
    sim_cmd->add_flag("--always-connected", always, "Also run the always-connected baseline and compare");
    sim_cmd->add_option("--threads", threads, "Worker threads (0: all cores)")->check(CLI::NonNegativeNumber);
    sim_cmd->add_option("--traces", traces, "Write full trace CSVs for this many trials")
        ->check(CLI::NonNegativeNumber);
    sim_cmd->add_option("--gamma-mode", mode, "Gamma mode the design was built with")->check(modes);

    auto* verify_cmd = app.add_subcommand("verify", "Re-check every LMI and table property of a design");
    verify_cmd->add_option("config", config, "Scenario configuration (JSON)")->required()->check(CLI::ExistingFile);
    verify_cmd->add_option("design", design, "Design file (JSON)")->required()->check(CLI::ExistingFile);
    verify_cmd->add_option("--out", out_dir, "Write verify.json here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*design_cmd) return cmd_design(config, out_dir, mode);
        if (*gamma_cmd) return cmd_gamma(config, design, out_dir, mode);
        if (*sim_cmd) return cmd_simulate(config, design, out_dir, trials, seed, always, threads, traces, mode);
        if (*verify_cmd) return cmd_verify(config, design, verify_cmd->count("--out") ? out_dir : "");
    } catch (const Failure& f) {
        return f.code;
    } catch (const std::exception& e) {
        std::cerr << "etcon: " << e.what() << "\n";
        return kFailed;
    }
    return kUsage;
}
