#pragma once

// Scenario configuration and design files (JSON).

#include "etcon/design.hpp"
#include "etcon/lmi.hpp"
#include "etcon/protocol.hpp"
#include "etcon/sim.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace etcon {

inline constexpr const char* kToolVersion = "0.3.0";

struct ScenarioConfig {
    // plant
    Mat a, b, c, q, r;
    std::vector<int> input_sizes, output_sizes;
    // graph
    Mat adjacency;
    // design
    GainSpec gains;  // gains.eta empty means "auto"
    DesignWeights weights;
    std::vector<double> alpha_grid;
    // trigger
    double f_slope = 0.01;
    GammaMode gamma_mode = GammaMode::kWorstCase;
    StayReset stay_reset = StayReset::kCumulative;
    // sim
    SimSettings sim;
    /// Free-form notes carried through to outputs (e.g. which values are not
    /// taken from the reference experiment).
    nlohmann::json notes;
};

/// Everything cmd_design produces.
struct DesignArtifact {
    std::string tool_version = kToolVersion;
    std::string config_hash;
    std::uint64_t seed = 0;
    GainSet gains;
    LyapunovDesign lyapunov;
    GammaTable gamma_table;
    std::vector<double> alpha_grid;
    SolverOptions solver;
    GammaOptions gamma_options;
    std::vector<CellDiagnostic> cells;
};

namespace config {

/// Parses and validates a scenario document. Throws kSchema naming the
/// offending key (as a dotted path) on any problem.
ScenarioConfig parse(const nlohmann::json& doc);
ScenarioConfig load(const std::string& path);

/// Normalized document with every default filled in.
nlohmann::json to_json(const ScenarioConfig& cfg);

/// FNV-1a 64 over the sections a design depends on (plant, graph, design,
/// trigger.gamma_mode), as 16 hex digits.
std::string hash(const ScenarioConfig& cfg);

nlohmann::json design_to_json(const DesignArtifact& d);
DesignArtifact design_from_json(const nlohmann::json& doc);
DesignArtifact load_design(const std::string& path);
void save_json(const nlohmann::json& doc, const std::string& path);

nlohmann::json matrix_to_json(const Mat& m);
Mat matrix_from_json(const nlohmann::json& j, const std::string& key);

const char* gamma_mode_name(GammaMode m);
const char* stay_reset_name(StayReset s);

}  // namespace config
}  // namespace etcon
