#include "etcon/etcon.h"

#include "etcon/config.hpp"
#include "etcon/error.hpp"
#include "etcon/pipeline.hpp"
#include "etcon/sim.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <memory>
#include <sstream>
#include <string>

using nlohmann::json;

struct etcon_scenario {
    etcon::ScenarioConfig cfg;
};

struct etcon_design {
    etcon::DesignArtifact artifact;
};

struct etcon_batch {
    std::vector<etcon::RunResult> runs;
    etcon::sim::BatchSummary summary;
    std::uint64_t seed = 0;
    int agents = 0;
    json meta;
};

namespace {

thread_local std::string last_error;

etcon_status status_of(etcon::ErrorKind k) {
    switch (k) {
        case etcon::ErrorKind::kStructural: return ETCON_ERR_STRUCTURAL;
        case etcon::ErrorKind::kValidation: return ETCON_ERR_VALIDATION;
        case etcon::ErrorKind::kSynthesis: return ETCON_ERR_SYNTHESIS;
        case etcon::ErrorKind::kInfeasible: return ETCON_ERR_INFEASIBLE;
        case etcon::ErrorKind::kDesign: return ETCON_ERR_DESIGN;
        case etcon::ErrorKind::kSchema: return ETCON_ERR_SCHEMA;
        case etcon::ErrorKind::kIo: return ETCON_ERR_IO;
    }
    return ETCON_ERR_INTERNAL;
}

template <class F>
etcon_status guarded(F&& f) {
    try {
        last_error.clear();
        f();
        return ETCON_OK;
    } catch (const etcon::Error& e) {
        last_error = e.what();
        return status_of(e.kind());
    } catch (const json::exception& e) {
        last_error = e.what();
        return ETCON_ERR_SCHEMA;
    } catch (const std::exception& e) {
        last_error = e.what();
        return ETCON_ERR_INTERNAL;
    } catch (...) {
        last_error = "unknown error";
        return ETCON_ERR_INTERNAL;
    }
}

etcon_status bad_argument(const char* what) {
    last_error = what;
    return ETCON_ERR_ARGUMENT;
}

char* dup(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (!out) throw std::bad_alloc();
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

json number_or_null(double v) { return std::isnan(v) ? json(nullptr) : json(v); }

json cells_json(const std::vector<etcon::CellDiagnostic>& cells) {
    json out = json::array();
    for (const auto& c : cells)
        out.push_back({{"alpha1", c.alpha1},
                       {"alpha3", c.alpha3},
                       {"feasible", c.feasible},
                       {"objective", c.objective},
                       {"note", c.note}});
    return out;
}

json trial_json(const etcon::RunSummary& s, std::uint64_t seed) {
    json seg = json::array();
    for (double v : s.segment_convergence) seg.push_back(number_or_null(v));
    return {{"seed", seed},
            {"convergence_time_s", number_or_null(s.convergence_time)},
            {"segment_convergence_times_s", seg},
            {"disconnect_fraction_mean", s.disconnect_fraction_mean},
            {"disconnect_fraction_per_agent", s.disconnect_fraction},
            {"connection_counts", s.connection_counts},
            {"n_events", s.n_events},
            {"invariance_violations", s.invariance_violations},
            {"soundness_violations", s.soundness_violations},
            {"conservativeness_violations", s.conservativeness_violations},
            {"decrease_violations", s.decrease_violations}};
}

etcon::GammaMode to_mode(etcon_gamma_mode m) {
    return m == ETCON_GAMMA_ENUMERATE ? etcon::GammaMode::kEnumerate : etcon::GammaMode::kWorstCase;
}

bool valid_mode(etcon_gamma_mode m) { return m == ETCON_GAMMA_ENUMERATE || m == ETCON_GAMMA_WORST_CASE; }

}  // namespace

extern "C" {

const char* etcon_version(void) { return etcon::kToolVersion; }

const char* etcon_last_error(void) { return last_error.c_str(); }

void etcon_string_free(char* s) { std::free(s); }

void etcon_sim_options_init(etcon_sim_options* opts) {
    if (!opts) return;
    opts->trials = 1;
    opts->seed = 0;
    opts->use_seed = 0;
    opts->always_connected = 0;
    opts->threads = 0;
    opts->trace_limit = 1;
}

// ---------------------------------------------------------------------------

etcon_status etcon_scenario_load(const char* path, etcon_scenario** out) {
    if (!path || !out) return bad_argument("etcon_scenario_load: null argument");
    return guarded([&] { *out = new etcon_scenario{etcon::config::load(path)}; });
}

etcon_status etcon_scenario_parse(const char* json_text, etcon_scenario** out) {
    if (!json_text || !out) return bad_argument("etcon_scenario_parse: null argument");
    return guarded([&] {
        json doc;
        try {
            doc = json::parse(json_text);
        } catch (const json::parse_error& e) {
            etcon::fail(etcon::ErrorKind::kSchema, std::string("malformed JSON: ") + e.what());
        }
        *out = new etcon_scenario{etcon::config::parse(doc)};
    });
}

void etcon_scenario_free(etcon_scenario* s) { delete s; }

etcon_status etcon_scenario_to_json(const etcon_scenario* s, char** json_out) {
    if (!s || !json_out) return bad_argument("etcon_scenario_to_json: null argument");
    return guarded([&] { *json_out = dup(etcon::config::to_json(s->cfg).dump(2)); });
}

etcon_status etcon_scenario_hash(const etcon_scenario* s, char** hash_out) {
    if (!s || !hash_out) return bad_argument("etcon_scenario_hash: null argument");
    return guarded([&] { *hash_out = dup(etcon::config::hash(s->cfg)); });
}

etcon_status etcon_scenario_set_gamma_mode(etcon_scenario* s, etcon_gamma_mode mode) {
    if (!s) return bad_argument("etcon_scenario_set_gamma_mode: null scenario");
    if (!valid_mode(mode)) return bad_argument("etcon_scenario_set_gamma_mode: unknown mode");
    s->cfg.gamma_mode = to_mode(mode);
    return ETCON_OK;
}

// ---------------------------------------------------------------------------

etcon_status etcon_design_run(const etcon_scenario* s, etcon_design** out, char** diagnostics_json) {
    if (!s || !out) return bad_argument("etcon_design_run: null argument");
    std::vector<etcon::CellDiagnostic> cells;
    const etcon_status st = guarded([&] { *out = new etcon_design{etcon::pipeline::run_design(s->cfg, &cells)}; });
    if (diagnostics_json) {
        try {
            *diagnostics_json = dup(json{{"cells", cells_json(cells)}}.dump(2));
        } catch (...) {
            *diagnostics_json = nullptr;
        }
    }
    return st;
}

etcon_status etcon_design_load(const char* path, etcon_design** out) {
    if (!path || !out) return bad_argument("etcon_design_load: null argument");
    return guarded([&] { *out = new etcon_design{etcon::config::load_design(path)}; });
}

etcon_status etcon_design_save(const etcon_design* d, const char* path) {
    if (!d || !path) return bad_argument("etcon_design_save: null argument");
    return guarded([&] { etcon::config::save_json(etcon::config::design_to_json(d->artifact), path); });
}

etcon_status etcon_design_to_json(const etcon_design* d, char** json_out) {
    if (!d || !json_out) return bad_argument("etcon_design_to_json: null argument");
    return guarded([&] { *json_out = dup(etcon::config::design_to_json(d->artifact).dump(2)); });
}

void etcon_design_free(etcon_design* d) { delete d; }

etcon_status etcon_design_recompute_gamma(const etcon_scenario* s, etcon_design* d, etcon_gamma_mode mode) {
    if (!s || !d) return bad_argument("etcon_design_recompute_gamma: null argument");
    if (!valid_mode(mode)) return bad_argument("etcon_design_recompute_gamma: unknown mode");
    return guarded([&] {
        etcon::ScenarioConfig cfg = s->cfg;
        cfg.gamma_mode = to_mode(mode);
        etcon::pipeline::recompute_gamma(cfg, d->artifact, cfg.gamma_mode);
        d->artifact.config_hash = etcon::config::hash(cfg);
    });
}

etcon_status etcon_design_gamma_json(const etcon_design* d, char** json_out) {
    if (!d || !json_out) return bad_argument("etcon_design_gamma_json: null argument");
    return guarded([&] {
        const json full = etcon::config::design_to_json(d->artifact);
        json out = {{"tool_version", full["tool_version"]},
                    {"config_hash", full["config_hash"]},
                    {"seed", full["seed"]},
                    {"gamma_table", full["gamma_table"]},
                    {"tolerances", full["tolerances"]},
                    {"alpha_grid", full["alpha_grid"]}};
        *json_out = dup(out.dump(2));
    });
}

// ---------------------------------------------------------------------------

etcon_status etcon_verify(const etcon_scenario* s, const etcon_design* d, char** report_json, int* all_pass) {
    if (!s || !d) return bad_argument("etcon_verify: null argument");
    return guarded([&] {
        const etcon::VerifyReport rep = etcon::pipeline::verify(s->cfg, d->artifact);
        if (all_pass) *all_pass = rep.pass() ? 1 : 0;
        if (report_json) {
            json checks = json::array();
            for (const auto& c : rep.checks)
                checks.push_back({{"name", c.name}, {"pass", c.pass}, {"margin", c.margin}, {"detail", c.detail}});
            json out = {{"tool_version", etcon::kToolVersion},
                        {"design_tool_version", d->artifact.tool_version},
                        {"config_hash", etcon::config::hash(s->cfg)},
                        {"seed", d->artifact.seed},
                        {"pass", rep.pass()},
                        {"checks", checks}};
            *report_json = dup(out.dump(2));
        }
    });
}

// ---------------------------------------------------------------------------

etcon_status etcon_simulate(const etcon_scenario* s, const etcon_design* d, const etcon_sim_options* opts,
                            etcon_batch** out) {
    if (!s || !d || !out) return bad_argument("etcon_simulate: null argument");
    etcon_sim_options o;
    etcon_sim_options_init(&o);
    if (opts) o = *opts;
    if (o.trials < 1) return bad_argument("etcon_simulate: trials must be at least 1");
    return guarded([&] {
        const etcon::Scenario sc = etcon::pipeline::make_scenario(s->cfg, d->artifact);
        etcon::SimSettings st = sc.sim;
        if (o.use_seed) st.seed = o.seed;
        st.always_connected = o.always_connected != 0;
        auto b = std::make_unique<etcon_batch>();
        b->runs = etcon::sim::run_batch(sc, st, o.trials, o.threads, o.trace_limit);
        b->summary = etcon::sim::aggregate(b->runs);
        b->seed = st.seed;
        b->agents = sc.plant.n_agents();
        json extensions = json::array();
        if (!st.jumps.empty())
            extensions.push_back("trigger exponent history, stay integrals and f restart at each scripted jump");
        b->meta = {{"tool_version", etcon::kToolVersion},
                   {"config_hash", etcon::config::hash(s->cfg)},
                   {"design_config_hash", d->artifact.config_hash},
                   {"seed", st.seed},
                   {"trials", o.trials},
                   {"always_connected", st.always_connected},
                   {"gamma_mode", etcon::config::gamma_mode_name(d->artifact.gamma_table.mode)},
                   {"non_paper_extensions", extensions},
                   {"config", etcon::config::to_json(s->cfg)}};
        *out = b.release();
    });
}

void etcon_batch_free(etcon_batch* b) { delete b; }

int etcon_batch_trials(const etcon_batch* b) { return b ? static_cast<int>(b->runs.size()) : 0; }

etcon_status etcon_batch_summary_json(const etcon_batch* b, char** json_out) {
    if (!b || !json_out) return bad_argument("etcon_batch_summary_json: null argument");
    return guarded([&] {
        const auto& s = b->summary;
        json out = b->meta;
        out["convergence_time_s"] = number_or_null(s.convergence_time_mean);
        out["converged_trials"] = s.converged;
        out["disconnect_fraction_mean"] = s.disconnect_fraction_mean;
        out["disconnect_fraction_per_agent"] = s.disconnect_fraction;
        out["connection_counts_per_agent"] = s.connection_counts;
        out["n_events"] = s.n_events_mean;
        out["invariance_violations"] = s.invariance_violations;
        out["soundness_violations"] = s.soundness_violations;
        out["conservativeness_violations"] = s.conservativeness_violations;
        out["decrease_violations"] = s.decrease_violations;
        *json_out = dup(out.dump(2));
    });
}

etcon_status etcon_batch_trial_summary_json(const etcon_batch* b, int trial, char** json_out) {
    if (!b || !json_out) return bad_argument("etcon_batch_trial_summary_json: null argument");
    if (trial < 0 || trial >= static_cast<int>(b->runs.size())) return bad_argument("trial index out of range");
    return guarded([&] {
        json out = trial_json(b->runs[trial].summary, b->seed + static_cast<std::uint64_t>(trial));
        out["trial"] = trial;
        out["tool_version"] = b->meta["tool_version"];
        out["config_hash"] = b->meta["config_hash"];
        *json_out = dup(out.dump(2));
    });
}

etcon_status etcon_batch_trace_csv(const etcon_batch* b, int trial, char** csv_out) {
    if (!b || !csv_out) return bad_argument("etcon_batch_trace_csv: null argument");
    if (trial < 0 || trial >= static_cast<int>(b->runs.size())) return bad_argument("trial index out of range");
    return guarded([&] {
        const auto& trace = b->runs[trial].trace;
        if (trace.empty()) etcon::fail(etcon::ErrorKind::kValidation, "no trace was recorded for this trial");
        std::ostringstream os;
        os << "t,V_x,V_e";
        for (int i = 1; i <= b->agents; ++i) os << ",connected_" << i << ",y_quad_" << i << ",bound_" << i;
        os << "\n";
        char buf[64];
        auto num = [&](double v) {
            std::snprintf(buf, sizeof buf, "%.10g", v);
            return buf;
        };
        for (const auto& r : trace) {
            os << num(r.t);
            os << "," << num(r.v_x);
            os << "," << num(r.v_e);
            for (int i = 0; i < b->agents; ++i) {
                os << "," << ((r.connected >> i) & 1u);
                os << "," << num(r.y_quad[i]);
                os << "," << num(r.bound[i]);
            }
            os << "\n";
        }
        *csv_out = dup(os.str());
    });
}

etcon_status etcon_batch_events_csv(const etcon_batch* b, int trial, char** csv_out) {
    if (!b || !csv_out) return bad_argument("etcon_batch_events_csv: null argument");
    if (trial < 0 || trial >= static_cast<int>(b->runs.size())) return bad_argument("trial index out of range");
    return guarded([&] {
        std::ostringstream os;
        os << "t_bar_k,config\n";
        char buf[64];
        for (const auto& e : b->runs[trial].events) {
            std::snprintf(buf, sizeof buf, "%.10g", e.t);
            os << buf << "," << e.config << "\n";
        }
        *csv_out = dup(os.str());
    });
}

}  // extern "C"
