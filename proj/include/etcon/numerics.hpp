#pragma once

// Dense real linear algebra shared by every other module.
//
// Matrices are Eigen column-major dynamic matrices; all routines here are pure
// functions of their arguments.

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace etcon {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

struct SymEig {
    Vec values;   // ascending
    Mat vectors;  // orthonormal columns, vectors.col(k) pairs with values(k)
};

namespace num {

/// Relative symmetry tolerance accepted by the symmetric routines.
inline constexpr double kSymmetryTol = 1e-9;

/// Eigen-decomposition of a symmetric matrix. Throws Structural on
/// non-square input or asymmetry above kSymmetryTol * ||m||_F.
SymEig sym_eig(const Mat& m);

/// Smallest eigenvalue of a symmetric matrix.
double min_eig_margin(const Mat& m);

/// Positive-definiteness margin used for every strict "> 0" check:
/// 1e-8 * (1 + ||m||_2).
double pd_tolerance(const Mat& m);

/// True iff min_eig(m) >= pd_tolerance(m).
bool is_pd(const Mat& m);

/// True iff min_eig(m) >= -pd_tolerance(m).
bool is_psd(const Mat& m);

Mat kron(const Mat& a, const Mat& b);

/// Matrix exponential (scaling and squaring with a Pade approximant).
Mat expm(const Mat& m);

/// Clip the eigenvalues of a symmetric matrix from below at `floor`.
Mat project_psd(const Mat& m, double floor);

/// Largest real part over the spectrum of a general square matrix.
double max_real_eig(const Mat& m);

/// Spectral norm.
double norm2(const Mat& m);

Mat symmetrize(const Mat& m);

/// Block-diagonal concatenation.
Mat block_diag(std::span<const Mat> blocks);

/// Numerical rank with singular-value threshold rel_tol * sigma_max.
int rank(const Mat& m, double rel_tol = 1e-9);

}  // namespace num
}  // namespace etcon
