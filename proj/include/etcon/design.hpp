#pragma once

// Gain synthesis (controller, global and local observers, coupling gain) and
// assembly of the stacked estimation-error matrices.

#include "etcon/graph.hpp"
#include "etcon/numerics.hpp"
#include "etcon/plant.hpp"

#include <optional>
#include <vector>

namespace etcon {

/// Orthogonal observability decomposition of (A, C_i):
/// T' A T = [[a_o, 0], [a_21, a_obar]],  C_i T = [c_o, 0].
struct ObsDecomposition {
    Mat t;
    Mat a_o;
    Mat c_o;
    Mat a_21;
    Mat a_obar;
    int obs_dim = 0;
};

struct GainSet {
    std::vector<Mat> k_blocks;  // K_i, p_i x n
    Mat k;                      // stacked K, p x n
    Mat l_global;               // L, n x m
    std::vector<Mat> l_local;   // Lhat_i, n x m_i
    double eta = 0.0;

    /// Columns of L belonging to agent i (L_i).
    [[nodiscard]] Mat l_block(const PlantModel& plant, int i) const;
    /// Observer gain in use for a given Laplacian diagonal entry:
    /// Lhat_i when l_ii = 0, N L_i otherwise.
    [[nodiscard]] Mat observer_gain(const PlantModel& plant, int i, double l_ii) const;
};

/// Matrices of the stacked error dynamics for one Laplacian:
/// de/dt = a_e e + I_stack w - j v,  a_e = f - eta (L kron I_n).
struct ErrorMatrices {
    Mat laplacian;
    Mat f;
    Mat a_e;
    Mat j;
};

struct ErrorSystem {
    Mat e_mat;    // E = [B_1 K_1 ... B_N K_N]
    Mat i_stack;  // [I_n; ...; I_n]
    std::vector<ConnectionConfig> configs;
    std::vector<ErrorMatrices> per_config;
};

/// Average/disagreement representation of the full-connection error dynamics.
struct BarSystem {
    Mat a_bar;
    Mat w_bar;
    Mat v_bar;
    Mat e_bar_basis;  // [I_stack, S kron I_n]
    Mat h;
    Mat f_bar;
    Mat j_bar;
};

struct GainSpec {
    std::vector<double> controller_poles;
    std::vector<double> observer_poles_global;
    /// One pole list per agent (length = that agent's observable dimension).
    std::vector<std::vector<double>> observer_poles_local;
    /// Fixed coupling gain; when empty the smallest doubling-search value is used.
    std::optional<double> eta;
    double floor_margin = 1.0;
};

namespace design {

/// Gain G with eig(a + b G) equal to `poles`.
Mat place_poles(const Mat& a, const Mat& b, const std::vector<double>& poles);

/// Gain L with eig(a - L c) equal to `poles`.
Mat observer_gain_global(const Mat& a, const Mat& c, const std::vector<double>& poles);

ObsDecomposition obs_decompose(const Mat& a, const Mat& c_i);

/// Lhat_i = T [L_o; 0] with eig(a_o - L_o c_o) equal to `poles`.
Mat local_observer_gain(const ObsDecomposition& decomp, const std::vector<double>& poles);

/// Lower-right block of the bar system's A for a given eta.
Mat disagreement_block(const Mat& f_bar, const SpectralSplit& split, int n, double eta);

/// Smallest eta (0, or a power of two from 1 up) that puts the spectrum of the
/// disagreement block at or left of -floor_margin.
double coupling_gain(const Mat& f_bar, const SpectralSplit& split, int n, double floor_margin);

/// Full-connection F (gains N L_i, no coupling term); eta-independent.
Mat full_connection_f(const PlantModel& plant, const GainSet& gains);

GainSet synthesize_gains(const PlantModel& plant, const CommGraph& graph, const GainSpec& spec);

Mat e_matrix(const PlantModel& plant, const GainSet& gains);
Mat identity_stack(int n_agents, int n);
ErrorMatrices error_matrices(const PlantModel& plant, const GainSet& gains, const Mat& laplacian);

ErrorSystem assemble_error_system(const PlantModel& plant, const GainSet& gains,
                                  const std::vector<ConnectionConfig>& configs);

/// Throws kDesign (naming coupling_gain) if the disagreement block is not Hurwitz.
BarSystem assemble_bar_system(const PlantModel& plant, const GainSet& gains, const SpectralSplit& split);

/// Real coefficients of the monic characteristic polynomial of m (highest first).
Vec char_poly(const Mat& m);
/// Coefficients of prod (s - p_k) (highest first).
Vec poly_from_roots(const std::vector<double>& roots);

}  // namespace design
}  // namespace etcon
