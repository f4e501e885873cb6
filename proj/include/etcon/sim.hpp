#pragma once

// Closed-loop simulation of plant + N distributed observers + connection
// protocol. The stacked state z = [x; xhat_1; ...; xhat_N] is advanced with
// exact zero-order-hold steps (disturbances held over each step).

#include "etcon/design.hpp"
#include "etcon/graph.hpp"
#include "etcon/plant.hpp"
#include "etcon/protocol.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

namespace etcon {

struct Jump {
    double t = 0.0;
    Vec delta;  // added to the plant state
};

struct SimSettings {
    double dt = 1e-3;
    double duration = 10.0;
    Vec x0;
    std::vector<Vec> xhat0;  // empty: every estimate starts at x0
    std::uint64_t seed = 1;
    DisturbanceMode disturbance = DisturbanceMode::kInterior;
    std::vector<Jump> jumps;
    bool always_connected = false;
    double eps_hold = 1e-3;        // convergence: V may not exceed 1 + eps_hold afterwards
    double invariance_tol = 1e-6;  // V <= 1 + tol once inside with e inside
    bool record_trace = true;
};

struct Scenario {
    PlantModel plant;
    CommGraph graph;
    GainSet gains;
    Mat p;      // plant-state Lyapunov matrix
    Mat p_bar;  // error Lyapunov matrix
    TriggerDesign trigger;
    SimSettings sim;
};

struct TraceRow {
    double t = 0.0;
    double v_x = 0.0;
    double v_e = 0.0;
    AgentMask connected = 0;
    std::vector<double> y_quad;
    std::vector<double> bound;
};

struct EventRecord {
    double t = 0.0;
    AgentMask config = 0;
};

struct RunSummary {
    double convergence_time = std::numeric_limits<double>::quiet_NaN();  // first segment
    std::vector<double> segment_convergence;  // one per segment between jumps
    double disconnect_fraction_mean = 0.0;
    std::vector<double> disconnect_fraction;  // per agent
    std::vector<int> connection_counts;       // rising edges per agent
    int n_events = 0;
    int invariance_violations = 0;
    int soundness_violations = 0;         // satisfaction condition fails for all agents, some agent untriggered
    int conservativeness_violations = 0;  // agent's bound below the true-history bound
    int decrease_violations = 0;          // V >= 1, some agent untriggered, V did not decrease
    double max_v_after_entry = 0.0;       // largest V once armed for the invariance check
};

struct RunResult {
    std::vector<TraceRow> trace;
    std::vector<EventRecord> events;
    RunSummary summary;
    Vec final_state;  // z at the horizon
};

struct StackedMatrices {
    Mat a;    // (N+1)n square
    Mat b_w;  // process disturbance input
    Mat b_v;  // measurement noise input
};

struct Discretized {
    Mat phi;    // e^{A dt}
    Mat gamma;  // int_0^dt e^{A s} ds [B_w B_v]
};

namespace sim {

/// Closed-loop matrices for a fixed connection set.
StackedMatrices stacked_matrices(const PlantModel& plant, const GainSet& gains, const CommGraph& graph,
                                 AgentMask connected);

/// Exact ZOH discretization via one augmented matrix exponential.
Discretized discretize(const StackedMatrices& m, double dt);

/// One classical RK4 step with w, v held constant.
Vec rk4_step(const StackedMatrices& m, const Vec& z, const Vec& w, const Vec& v, double h);

/// Stacked estimation error [x - xhat_1; ...; x - xhat_N].
Vec error_stack(const Vec& z, int n, int n_agents);

/// Throws kValidation if e(0) lies outside the error ellipsoid or any setting is out of range.
void validate(const Scenario& scenario, const SimSettings& settings);

RunResult run(const Scenario& scenario, const SimSettings& settings);
inline RunResult run(const Scenario& scenario) { return run(scenario, scenario.sim); }

struct BatchSummary {
    int trials = 0;
    int converged = 0;
    double convergence_time_mean = std::numeric_limits<double>::quiet_NaN();  // over converged trials
    double disconnect_fraction_mean = 0.0;
    std::vector<double> disconnect_fraction;  // per agent, averaged
    std::vector<double> connection_counts;    // per agent, averaged
    double n_events_mean = 0.0;
    int invariance_violations = 0;
    int soundness_violations = 0;
    int conservativeness_violations = 0;
    int decrease_violations = 0;
};

/// Trial k uses seed settings.seed + k; traces are kept for trials below
/// trace_limit, event logs for all. Results do not depend on the thread count.
std::vector<RunResult> run_batch(const Scenario& scenario, const SimSettings& settings, int trials, int threads = 0,
                                 int trace_limit = 0);
BatchSummary aggregate(const std::vector<RunResult>& runs);

}  // namespace sim
}  // namespace etcon
