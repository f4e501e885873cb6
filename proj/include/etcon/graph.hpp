#pragma once

// Communication graphs, Laplacians and connection configurations.

#include "etcon/numerics.hpp"

#include <cstdint>
#include <vector>

namespace etcon {

/// Bitmask over agents; bit i set means agent i (0-based) is connected.
using AgentMask = std::uint32_t;

inline constexpr int kMaxAgents = 31;

/// Undirected, connected underlying communication graph.
class CommGraph {
public:
    /// Validates symmetry, zero diagonal, 0/1 entries and connectivity.
    explicit CommGraph(Mat adjacency);

    [[nodiscard]] int n_agents() const { return static_cast<int>(adjacency_.rows()); }
    [[nodiscard]] const Mat& adjacency() const { return adjacency_; }
    [[nodiscard]] bool adjacent(int i, int j) const { return adjacency_(i, j) != 0.0; }
    [[nodiscard]] const std::vector<int>& neighbors(int i) const { return neighbors_[i]; }
    [[nodiscard]] AgentMask all_agents() const { return (AgentMask{1} << n_agents()) - 1; }

private:
    Mat adjacency_;
    std::vector<std::vector<int>> neighbors_;
};

/// A set of connected agents together with the Laplacian it induces on the
/// underlying graph. Two configs are the same configuration iff their
/// Laplacians are equal.
struct ConnectionConfig {
    AgentMask connected = 0;
    Mat laplacian;
};

/// Orthonormal split of the underlying Laplacian: 1'S = 0, S'S = I,
/// S' Lbar S = diag(lambda_plus).
struct SpectralSplit {
    Mat s;
    Vec lambda_plus;
    Mat u;  // rows: [1'/sqrt(N); S']
};

namespace graph {

/// Validate a 0/1 symmetric adjacency with zero diagonal (connectivity is not required).
void validate_adjacency(const Mat& adjacency);

Mat laplacian(const Mat& adjacency);

bool is_connected(const Mat& adjacency);

SpectralSplit spectral_split(const CommGraph& underlying);

ConnectionConfig induced_config(const CommGraph& underlying, AgentMask connected);

inline constexpr int kDefaultEnumerationCap = 12;

/// One config per distinct induced Laplacian, ordered by the smallest subset
/// mask that produces it (so the zero config comes first).
std::vector<ConnectionConfig> enumerate_configs(const CommGraph& underlying,
                                                int cap = kDefaultEnumerationCap);

bool same_laplacian(const Mat& a, const Mat& b);

}  // namespace graph
}  // namespace etcon
