#pragma once

// Per-agent network connection protocol: local trigger, stay-connected rule,
// conservative growth-rate bookkeeping and configuration-knowledge exchange.
//
// Time is the simulation step grid: step k covers [k dt, (k+1) dt) and the
// connection configuration is constant over a step.

#include "etcon/graph.hpp"
#include "etcon/lmi.hpp"
#include "etcon/numerics.hpp"

#include <cstdint>
#include <unordered_map>
#include <vector>

namespace etcon {

/// What an agent knows about the connection set during one step: the status
/// of the agents in `known`; `on` holds the connected ones among them.
struct PartialConfig {
    AgentMask known = 0;
    AgentMask on = 0;

    bool operator==(const PartialConfig& o) const { return known == o.known && on == o.on; }
};

/// Union of two records of the same step. Throws kStructural if they disagree.
PartialConfig merge(const PartialConfig& a, const PartialConfig& b);

/// Max of the table's gamma over every connection set consistent with a
/// partial record. Memoized; not safe for concurrent use.
class GammaBar {
public:
    GammaBar(const CommGraph& underlying, const GammaTable& table);

    double operator()(const PartialConfig& pc);
    /// Gamma of a fully known connection set.
    double exact(AgentMask connected);

private:
    const CommGraph* graph_;
    const GammaTable* table_;
    AgentMask all_;
    std::vector<double> by_mask_;  // filled for small N
    std::unordered_map<std::uint64_t, double> cache_;
};

struct KnowledgeRun {
    std::int64_t first = 0;  // first step
    std::int64_t end = 0;    // one past the last step
    PartialConfig config;
};

/// Run-length record of past connection sets as seen by one agent, plus the
/// exponent sum_j gammabar_j (t_{j+1} - t_j) over it.
class AgentKnowledge {
public:
    AgentKnowledge(int n_agents, double dt, std::int64_t origin = 0);

    /// Appends the record for the next step.
    void append(const PartialConfig& pc, GammaBar& gamma_bar);
    /// Adopts everything `other` knows; both must cover the same steps.
    /// Returns true if anything changed.
    bool merge_from(const AgentKnowledge& other, GammaBar& gamma_bar);
    /// Drops the history and restarts the clock at `step`.
    void restart(std::int64_t step);

    /// First step not fully known (the watermark tau as a step index).
    [[nodiscard]] std::int64_t tau_step() const;
    [[nodiscard]] double tau() const { return static_cast<double>(tau_step()) * dt_; }
    [[nodiscard]] std::int64_t origin() const { return origin_; }
    [[nodiscard]] std::int64_t end() const { return end_; }
    [[nodiscard]] const std::vector<KnowledgeRun>& runs() const { return runs_; }

    /// Exponent over [origin, end): settled part plus the partially known tail.
    double exponent(GammaBar& gamma_bar) const;
    /// Same quantity recomputed from the runs alone.
    double rebuild_exponent(GammaBar& gamma_bar) const;

private:
    void settle(GammaBar& gamma_bar);
    void push(std::int64_t first, std::int64_t end, const PartialConfig& pc);

    AgentMask all_;
    double dt_;
    std::int64_t origin_;
    std::int64_t end_;
    std::vector<KnowledgeRun> runs_;
    std::size_t first_unsettled_ = 0;
    double settled_ = 0.0;
};

enum class StayReset { kCumulative, kPerEpisode };

struct TriggerDesign {
    std::vector<Mat> y_weights;  // Y_i
    GammaTable gamma_table;
    double f_slope = 0.01;       // f(t) = -f_slope t
    StayReset stay_reset = StayReset::kCumulative;
};

struct AgentRuntime {
    int id = 0;
    Vec x_hat;
    bool connected = false;
    AgentKnowledge knowledge;
    double stay_integral = 0.0;
    std::int64_t stay_origin = 0;  // step where the stay integral and f restart
    Vec y_current;
};

namespace protocol {

/// 2 + max(1, exp(exponent)).
double trigger_bound(double exponent);
bool should_connect(const Vec& y_i, const Mat& y_weight, double bound);
/// stay_integral > f(t) with f(t) = -f_slope t, t measured from the stay origin.
bool stay_connected(double stay_integral, double t, double f_slope);

/// Flooding exchange among the agents in `open`: adjacent open agents share
/// their records until every connected component agrees. Uses the records
/// as they were before the call, so agent order does not matter.
void exchange(std::vector<AgentRuntime>& agents, const CommGraph& underlying, AgentMask open, GammaBar& gamma_bar);

}  // namespace protocol

struct RoundResult {
    AgentMask connected = 0;
    AgentMask triggered = 0;
    std::vector<double> bound;
    std::vector<double> y_quad;
    bool event = false;  // connection set differs from the previous step
};

/// All agents advanced one synchronous round per step.
class ProtocolNetwork {
public:
    ProtocolNetwork(const CommGraph& underlying, const TriggerDesign& design, double dt);

    /// Round for step k given each agent's measurement. With always_connected
    /// every trigger is forced on and the stay rule is bypassed.
    RoundResult step(std::int64_t k, const std::vector<Vec>& y, bool always_connected = false);
    /// Restarts exponents, stay integrals and f at step k (scripted jumps).
    void restart(std::int64_t k);

    [[nodiscard]] const std::vector<AgentRuntime>& agents() const { return agents_; }
    std::vector<AgentRuntime>& agents() { return agents_; }
    [[nodiscard]] AgentMask connected() const { return current_; }
    /// Exponent an observer with the true connection history would use.
    [[nodiscard]] double omniscient_exponent() const { return true_exponent_; }
    GammaBar& gamma_bar() { return gamma_bar_; }

private:
    const CommGraph* graph_;
    const TriggerDesign* design_;
    double dt_;
    GammaBar gamma_bar_;
    std::vector<AgentRuntime> agents_;
    AgentMask current_ = 0;
    double true_exponent_ = 0.0;
};

}  // namespace etcon
