#pragma once

// End-to-end operations behind the command-line tool: design, gamma table,
// verification and scenario assembly from a configuration.

#include "etcon/config.hpp"

#include <string>
#include <vector>

namespace etcon {

struct Model {
    PlantModel plant;
    CommGraph graph;
    GainSet gains;
    SpectralSplit split;
    BarSystem bar;
};

struct Check {
    std::string name;
    bool pass = false;
    double margin = 0.0;  // signed slack; negative when failing
    std::string detail;
};

struct VerifyReport {
    std::vector<Check> checks;

    [[nodiscard]] bool pass() const;
    [[nodiscard]] std::vector<std::string> failures() const;
};

namespace pipeline {

/// Plant, graph and freshly synthesized gains.
Model build_model(const ScenarioConfig& cfg);
/// Same, but with gains taken from a design file.
Model build_model(const ScenarioConfig& cfg, const GainSet& gains);

/// Gains, max-log-det design and gamma table. Throws kInfeasible (message
/// lists every grid cell) when no cell is feasible; `cells` is filled either way.
DesignArtifact run_design(const ScenarioConfig& cfg, std::vector<CellDiagnostic>* cells = nullptr,
                          const SolverOptions& options = {});

/// Replaces the design's gamma table with one built in `mode`.
void recompute_gamma(const ScenarioConfig& cfg, DesignArtifact& design, GammaMode mode);

/// Re-assembles every LMI from the configuration and the design file.
VerifyReport verify(const ScenarioConfig& cfg, const DesignArtifact& design);

/// Simulation scenario for a design. Refuses (kDesign) when the design does
/// not belong to this configuration or its LMIs no longer hold.
Scenario make_scenario(const ScenarioConfig& cfg, const DesignArtifact& design);

}  // namespace pipeline
}  // namespace etcon
