#include "etcon/graph.hpp"

#include "etcon/error.hpp"

#include <cmath>
#include <queue>
#include <string>

namespace etcon {

CommGraph::CommGraph(Mat adjacency) : adjacency_(std::move(adjacency)) {
    graph::validate_adjacency(adjacency_);
    require(adjacency_.rows() >= 1, ErrorKind::kValidation, "communication graph needs at least one agent");
    require(adjacency_.rows() <= kMaxAgents, ErrorKind::kValidation,
            "communication graph supports at most " + std::to_string(kMaxAgents) + " agents");
    require(graph::is_connected(adjacency_), ErrorKind::kValidation, "underlying communication graph is not connected");
    neighbors_.resize(adjacency_.rows());
    for (int i = 0; i < n_agents(); ++i)
        for (int j = 0; j < n_agents(); ++j)
            if (adjacent(i, j)) neighbors_[i].push_back(j);
}

namespace graph {

void validate_adjacency(const Mat& a) {
    require(a.rows() == a.cols(), ErrorKind::kValidation, "adjacency must be square");
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        require(a(i, i) == 0.0, ErrorKind::kValidation,
                "adjacency has a self-connection at agent " + std::to_string(i + 1));
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            require(a(i, j) == 0.0 || a(i, j) == 1.0, ErrorKind::kValidation, "adjacency entries must be 0 or 1");
            require(a(i, j) == a(j, i), ErrorKind::kValidation,
                    "adjacency is not symmetric at (" + std::to_string(i + 1) + "," + std::to_string(j + 1) + ")");
        }
    }
}

Mat laplacian(const Mat& adjacency) {
    validate_adjacency(adjacency);
    Mat l = -adjacency;
    l.diagonal() = adjacency.rowwise().sum();
    return l;
}

bool is_connected(const Mat& adjacency) {
    const Eigen::Index n = adjacency.rows();
    if (n <= 1) return true;
    std::vector<bool> seen(n, false);
    std::queue<Eigen::Index> frontier;
    frontier.push(0);
    seen[0] = true;
    Eigen::Index reached = 1;
    while (!frontier.empty()) {
        const auto i = frontier.front();
        frontier.pop();
        for (Eigen::Index j = 0; j < n; ++j) {
            if (adjacency(i, j) != 0.0 && !seen[j]) {
                seen[j] = true;
                ++reached;
                frontier.push(j);
            }
        }
    }
    return reached == n;
}

SpectralSplit spectral_split(const CommGraph& underlying) {
    const int n = underlying.n_agents();
    const Mat lbar = laplacian(underlying.adjacency());
    const SymEig eig = num::sym_eig(lbar);
    const double tol = 1e-9 * std::max(1.0, lbar.norm());
    require(n == 1 || eig.values(1) > tol, ErrorKind::kValidation, "zero eigenvalue not simple");

    SpectralSplit split;
    split.s = eig.vectors.rightCols(n - 1);
    // Remove any residual component along 1 and re-orthonormalize.
    const Vec ones = Vec::Ones(n) / std::sqrt(static_cast<double>(n));
    for (int k = 0; k < n - 1; ++k) {
        Vec col = split.s.col(k);
        col -= ones * ones.dot(col);
        for (int j = 0; j < k; ++j) col -= split.s.col(j) * split.s.col(j).dot(col);
        split.s.col(k) = col.normalized();
    }
    split.lambda_plus = (split.s.transpose() * lbar * split.s).diagonal();
    split.u.resize(n, n);
    split.u.row(0) = ones.transpose();
    split.u.bottomRows(n - 1) = split.s.transpose();
    return split;
}

ConnectionConfig induced_config(const CommGraph& underlying, AgentMask connected) {
    const int n = underlying.n_agents();
    Mat adj = Mat::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        if (!(connected >> i & 1u)) continue;
        for (int j = 0; j < n; ++j)
            if ((connected >> j & 1u) && underlying.adjacent(i, j)) adj(i, j) = 1.0;
    }
    return {connected & underlying.all_agents(), laplacian(adj)};
}

bool same_laplacian(const Mat& a, const Mat& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() && (a - b).cwiseAbs().maxCoeff() == 0.0;
}

std::vector<ConnectionConfig> enumerate_configs(const CommGraph& underlying, int cap) {
    const int n = underlying.n_agents();
    require(n <= cap, ErrorKind::kValidation,
            std::to_string(n) + " agents exceeds the enumeration cap of " + std::to_string(cap) +
                "; use worst-case mode (all-disconnected gamma)");
    std::vector<ConnectionConfig> out;
    const AgentMask count = AgentMask{1} << n;
    for (AgentMask mask = 0; mask < count; ++mask) {
        ConnectionConfig cfg = induced_config(underlying, mask);
        bool seen = false;
        for (const auto& existing : out) {
            if (same_laplacian(existing.laplacian, cfg.laplacian)) {
                seen = true;
                break;
            }
        }
        if (!seen) out.push_back(std::move(cfg));
    }
    return out;
}

}  // namespace graph
}  // namespace etcon
