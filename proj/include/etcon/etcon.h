#ifndef ETCON_ETCON_H
#define ETCON_ETCON_H

/*
 * C interface to the etcon library: scenario configurations, designs,
 * verification and simulation batches behind opaque handles.
 *
 * Every function returns an etcon_status. On failure the message is available
 * from etcon_last_error() (per thread, valid until the next call on that
 * thread). Strings returned through char** out-parameters are owned by the
 * caller and released with etcon_string_free().
 */

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum {
    ETCON_OK = 0,
    ETCON_ERR_STRUCTURAL = 1,
    ETCON_ERR_VALIDATION = 2,
    ETCON_ERR_SYNTHESIS = 3,
    ETCON_ERR_INFEASIBLE = 4,
    ETCON_ERR_DESIGN = 5,
    ETCON_ERR_SCHEMA = 6,
    ETCON_ERR_IO = 7,
    ETCON_ERR_ARGUMENT = 8, /* null handle or bad enum value */
    ETCON_ERR_INTERNAL = 9
} etcon_status;

typedef enum { ETCON_GAMMA_ENUMERATE = 0, ETCON_GAMMA_WORST_CASE = 1 } etcon_gamma_mode;

typedef struct etcon_scenario etcon_scenario;
typedef struct etcon_design etcon_design;
typedef struct etcon_batch etcon_batch;

typedef struct {
    int trials;            /* >= 1 */
    uint64_t seed;         /* trial k uses seed + k */
    int use_seed;          /* 0: take the seed from the scenario */
    int always_connected;  /* force every trigger on */
    int threads;           /* 0: one per hardware thread */
    int trace_limit;       /* full traces kept for the first trace_limit trials */
} etcon_sim_options;

const char* etcon_version(void);
const char* etcon_last_error(void);
void etcon_string_free(char* s);
void etcon_sim_options_init(etcon_sim_options* opts);

/* Scenario configuration */
etcon_status etcon_scenario_load(const char* path, etcon_scenario** out);
etcon_status etcon_scenario_parse(const char* json_text, etcon_scenario** out);
void etcon_scenario_free(etcon_scenario* s);
/* Normalized configuration with defaults filled in. */
etcon_status etcon_scenario_to_json(const etcon_scenario* s, char** json_out);
etcon_status etcon_scenario_hash(const etcon_scenario* s, char** hash_out);
etcon_status etcon_scenario_set_gamma_mode(etcon_scenario* s, etcon_gamma_mode mode);

/* Design */
/* On ETCON_ERR_INFEASIBLE, *diagnostics_json (if non-null) receives the per-cell report. */
etcon_status etcon_design_run(const etcon_scenario* s, etcon_design** out, char** diagnostics_json);
etcon_status etcon_design_load(const char* path, etcon_design** out);
etcon_status etcon_design_save(const etcon_design* d, const char* path);
etcon_status etcon_design_to_json(const etcon_design* d, char** json_out);
void etcon_design_free(etcon_design* d);
/* Rebuilds the gamma table in the given mode. */
etcon_status etcon_design_recompute_gamma(const etcon_scenario* s, etcon_design* d, etcon_gamma_mode mode);
etcon_status etcon_design_gamma_json(const etcon_design* d, char** json_out);

/* Verification: *all_pass is 1 when every check passes. */
etcon_status etcon_verify(const etcon_scenario* s, const etcon_design* d, char** report_json, int* all_pass);

/* Simulation */
etcon_status etcon_simulate(const etcon_scenario* s, const etcon_design* d, const etcon_sim_options* opts,
                            etcon_batch** out);
void etcon_batch_free(etcon_batch* b);
int etcon_batch_trials(const etcon_batch* b);
etcon_status etcon_batch_summary_json(const etcon_batch* b, char** json_out);
etcon_status etcon_batch_trial_summary_json(const etcon_batch* b, int trial, char** json_out);
/* Trace CSV: t, V_x, V_e, then connected_i, y_quad_i, bound_i per agent. */
etcon_status etcon_batch_trace_csv(const etcon_batch* b, int trial, char** csv_out);
/* Event log CSV: t_bar_k, config (bitmask, bit i = agent i+1). */
etcon_status etcon_batch_events_csv(const etcon_batch* b, int trial, char** csv_out);

#ifdef __cplusplus
}
#endif

#endif /* ETCON_ETCON_H */
