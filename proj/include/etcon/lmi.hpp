#pragma once

// Quadratic-boundedness LMIs, a small interior-point engine for them, the
// max-log-det Lyapunov design and per-configuration growth rates.

#include "etcon/design.hpp"
#include "etcon/graph.hpp"
#include "etcon/numerics.hpp"
#include "etcon/plant.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace etcon {

/// F(x) = f0 + sum_j x_j f[j], every f symmetric. Inactive f[j] are zero.
struct AffineSym {
    Mat f0;
    std::vector<Mat> f;
    std::vector<bool> active;

    [[nodiscard]] int size() const { return static_cast<int>(f0.rows()); }
    [[nodiscard]] Mat eval(const Vec& x) const;
};

/// Symmetric matrix blocks packed into one vector (upper triangles, row by row).
class SymLayout {
public:
    int add_block(int size);

    [[nodiscard]] int n_blocks() const { return static_cast<int>(sizes_.size()); }
    [[nodiscard]] int n_vars() const { return n_vars_; }
    [[nodiscard]] int block_size(int b) const { return sizes_[b]; }

    [[nodiscard]] std::vector<Mat> unpack(const Vec& x) const;
    [[nodiscard]] Vec pack(const std::vector<Mat>& blocks) const;

private:
    std::vector<int> sizes_;
    std::vector<int> offsets_;
    int n_vars_ = 0;
};

using BlockFn = std::function<Mat(const std::vector<Mat>&)>;

/// Affine representation of a block-linear map, read off by evaluating it at
/// zero and at each unit vector.
AffineSym linearize(const SymLayout& layout, const BlockFn& fn);

struct LmiConstraint {
    std::string name;
    AffineSym map;
    bool strict = true;  // "> 0" (margin >= eps_pd) vs ">= 0" (margin >= -eps_pd)
};

enum class LmiMethod { kBarrier, kAlternatingProjections };

struct SolverOptions {
    LmiMethod method = LmiMethod::kBarrier;
    double gap_tol = 1e-4;     // duality-gap stop for the log-det objective
    double mu = 20.0;          // barrier parameter growth
    double box = 1e7;          // every block is kept below box * I
    double margin_factor = 2;  // strict constraints solved with this multiple of eps_pd
    int max_newton = 400;      // per centering
    int max_outer = 40;
    int ap_max_iter = 20000;
};

struct SolveResult {
    bool feasible = false;
    std::vector<Mat> blocks;
    std::vector<double> margins;  // min eigenvalue of each constraint, unscaled
    double objective = 0.0;
    int newton_steps = 0;
    std::string diagnostic;
};

namespace lmi {

/// Strict-margin threshold, 1e-8 (1 + ||m||_2).
double eps_pd(const Mat& m);
/// True if m satisfies the constraint: min_eig >= eps_pd (strict) or >= -eps_pd.
bool satisfies(const Mat& m, bool strict);

/// Generic quadratic-boundedness matrix for dz/dt = a z + b1 d1 + b2 d2 with
/// d1'D1 d1 <= 1, d2'D2 d2 <= 1:
/// [[(gamma - 2 alpha) P - a'P - P a, -P b1, -P b2],
///  [-b1'P, alpha D1, 0], [-b2'P, 0, alpha D2]].
Mat generic_qb(const Mat& a, const Mat& b1, const Mat& b2, const Mat& p, const Mat& d1, const Mat& d2, double gamma,
               double alpha);

/// Plant-state LMI: [[-2a1 P - A_bk'P - P A_bk, P E, -P], [E'P, a1 Pbar, 0], [-P, 0, a1 Q]].
Mat state_lmi(const Mat& a_bk, const Mat& e_mat, const Mat& q, const Mat& p, const Mat& p_bar, double alpha1);

/// Error LMI for one configuration:
/// [[(g - 2a2) Pbar - Ae'Pbar - Pbar Ae, -Pbar I, Pbar J], [-I'Pbar, a2 Q, 0], [J'Pbar, 0, a2 R]].
Mat error_lmi(const Mat& a_e, const Mat& i_stack, const Mat& j, const Mat& q, const Mat& r, const Mat& p_bar,
              double gamma, double alpha2);

/// Full-connection error LMI in average/disagreement coordinates, X = Ebar' Pbar Ebar.
Mat bar_error_lmi(const BarSystem& bar, const Mat& q, const Mat& r, const Mat& p_bar, double gamma, double alpha3);

/// Trigger LMI for agent i:
/// [[-A_bk'P - P A_bk - Ci'Yi Ci, P E, -P, -Ci'Yi Gi], [E'P, Pbar, 0, 0],
///  [-P, 0, Q, 0], [-Gi'Yi Ci, 0, 0, R - Gi'Yi Gi]].
Mat trigger_lmi(const Mat& a_bk, const Mat& e_mat, const Mat& c_i, const Mat& gamma_i, const Mat& q, const Mat& r,
                const Mat& p, const Mat& p_bar, const Mat& y_i);

/// Finds blocks satisfying every constraint; the blocks themselves are only
/// bounded by -box I <= block <= box I (add explicit definiteness constraints if needed).
SolveResult feasibility_solve(const SymLayout& layout, const std::vector<LmiConstraint>& constraints,
                              const SolverOptions& options = {});

/// Maximizes sum_b weights[b] log det(block b) subject to the constraints.
/// Blocks with weight 0 do not enter the objective.
SolveResult maxdet_solve(const SymLayout& layout, const std::vector<LmiConstraint>& constraints,
                         const std::vector<double>& weights, const SolverOptions& options = {});

}  // namespace lmi

// ---------------------------------------------------------------------------
// Lyapunov design

struct DesignWeights {
    double wx = 1.0;
    double we = 1.0;
    std::vector<double> wi;  // one per agent
};

struct LyapunovDesign {
    Mat p;
    Mat p_bar;
    std::vector<Mat> y;
    double alpha1 = 0.0;
    double alpha3 = 0.0;
    double gamma_full = 0.0;
    double margin_state = 0.0;
    double margin_bar = 0.0;
    std::vector<double> margin_trigger;
    double log_det_p = 0.0;
    double log_det_p_bar = 0.0;
    std::vector<double> log_det_y;
    double objective = 0.0;
};

struct CellDiagnostic {
    double alpha1 = 0.0;
    double alpha3 = 0.0;
    bool feasible = false;
    double objective = 0.0;
    std::string note;
};

struct GammaOptions {
    double tol = 1e-3;
    double lo = -1e3;
    double hi = 1e3;
    double hard_cap = 1e9;
};

namespace lmi {

/// Default alpha grid: 13 log-spaced points in [1e-3, 1e3].
std::vector<double> default_alpha_grid();

/// Best grid cell of the max-log-det design. Throws kInfeasible (listing every
/// cell) if no cell is feasible.
LyapunovDesign solve_design(const PlantModel& plant, const GainSet& gains, const BarSystem& bar,
                            const DesignWeights& weights, const std::vector<double>& alpha_grid,
                            const SolverOptions& options = {}, std::vector<CellDiagnostic>* diagnostics = nullptr);

/// Smallest-margin checks of a design against the state, full-connection error
/// and trigger LMIs. Returns an empty list when all pass.
std::vector<std::string> check_design(const PlantModel& plant, const GainSet& gains, const BarSystem& bar,
                                      const LyapunovDesign& design);

}  // namespace lmi

// ---------------------------------------------------------------------------
// Growth rates per connection configuration

enum class GammaMode { kEnumerate, kWorstCase };

struct GammaResult {
    double gamma = 0.0;
    double alpha = 0.0;
    double margin = 0.0;  // min eigenvalue of the certifying LMI at (gamma, alpha)
};

struct GammaEntry {
    ConnectionConfig config;
    double gamma = 0.0;
    double alpha = 0.0;
    bool evaluated = false;  // false when mapped to the worst case without a solve
};

struct GammaTable {
    GammaMode mode = GammaMode::kWorstCase;
    std::vector<GammaEntry> entries;
    double worst_case = 0.0;

    /// Certified gamma for a Laplacian (falls back to worst_case if absent).
    [[nodiscard]] double lookup(const Mat& laplacian) const;
};

namespace lmi {

/// The LMI whose feasibility certifies gamma for a configuration (the
/// average/disagreement form for the full configuration).
using GammaLmi = std::function<Mat(double gamma, double alpha)>;

GammaLmi config_lmi(const PlantModel& plant, const GainSet& gains, const CommGraph& underlying, const Mat& laplacian,
                    const Mat& p_bar);

/// Strictness threshold used by the gamma search at a fixed alpha: eps_pd of
/// the gamma-free part lmi(0, alpha). The gamma term is positive
/// semidefinite, so feasibility under this threshold is monotone in gamma
/// (a threshold taken from lmi(gamma, alpha) itself grows with gamma and is not).
double gamma_threshold(const GammaLmi& lmi, double alpha);
/// min_eig(lmi(gamma, alpha)) - gamma_threshold(lmi, alpha).
double gamma_slack(const GammaLmi& lmi, double gamma, double alpha);

/// Bisection on gamma for a fixed alpha; returns nullopt if infeasible even
/// at the hard cap.
std::optional<GammaResult> gamma_at_alpha(const GammaLmi& lmi, double alpha, const GammaOptions& options = {});

/// Minimum over the alpha grid. Throws kInfeasible when no alpha is feasible.
GammaResult gamma_of_config(const GammaLmi& lmi, const std::vector<double>& alpha_grid,
                            const GammaOptions& options = {});

GammaTable gamma_table(const PlantModel& plant, const GainSet& gains, const CommGraph& underlying, const Mat& p_bar,
                       const std::vector<double>& alpha_grid, GammaMode mode, const GammaOptions& options = {});

}  // namespace lmi
}  // namespace etcon
