#pragma once

// Helpers shared by the test binaries.

#include "etcon/config.hpp"
#include "etcon/pipeline.hpp"

#include <cstdlib>
#include <random>
#include <string>

namespace etcon::testkit {

inline std::string source_dir() { return ETCON_SOURCE_DIR; }
inline std::string water3_path() { return source_dir() + "/scenarios/water3.json"; }

// Design produced once by the design_fixture ctest entry.
inline std::string fixture_design_path() {
    if (const char* p = std::getenv("ETCON_FIXTURE_DESIGN")) return p;
    return ETCON_FIXTURE_DIR "/design.json";
}

inline const ScenarioConfig& water3() {
    static const ScenarioConfig cfg = config::load(water3_path());
    return cfg;
}

inline const DesignArtifact& water3_design() {
    static const DesignArtifact d = config::load_design(fixture_design_path());
    return d;
}

inline const Scenario& water3_scenario() {
    static const Scenario sc = pipeline::make_scenario(water3(), water3_design());
    return sc;
}

/// Random connected 0/1 adjacency: a random spanning tree plus extra edges.
inline Mat random_connected_adjacency(int n, std::mt19937_64& rng, double extra = 0.3) {
    Mat a = Mat::Zero(n, n);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 1; i < n; ++i) {
        std::uniform_int_distribution<int> pick(0, i - 1);
        const int j = pick(rng);
        a(i, j) = a(j, i) = 1.0;
    }
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (a(i, j) == 0.0 && u(rng) < extra) a(i, j) = a(j, i) = 1.0;
    return a;
}

}  // namespace etcon::testkit
