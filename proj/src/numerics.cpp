#include "etcon/numerics.hpp"

#include "etcon/error.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace etcon::num {

namespace {

void require_square(const Mat& m, const char* what) {
    require(m.rows() == m.cols(), ErrorKind::kStructural,
            std::string(what) + ": matrix is " + std::to_string(m.rows()) + "x" +
                std::to_string(m.cols()) + ", expected square");
}

void require_symmetric(const Mat& m, const char* what) {
    require_square(m, what);
    const double scale = std::max(1.0, m.norm());
    require((m - m.transpose()).norm() <= kSymmetryTol * scale, ErrorKind::kStructural,
            std::string(what) + ": matrix is not symmetric");
}

}  // namespace

SymEig sym_eig(const Mat& m) {
    require_symmetric(m, "sym_eig");
    if (m.rows() == 0) return {Vec(0), Mat(0, 0)};
    Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(m));
    require(es.info() == Eigen::Success, ErrorKind::kStructural, "sym_eig: solver did not converge");
    return {es.eigenvalues(), es.eigenvectors()};
}

double min_eig_margin(const Mat& m) {
    require_symmetric(m, "min_eig_margin");
    if (m.rows() == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(m), Eigen::EigenvaluesOnly);
    return es.eigenvalues()(0);
}

double pd_tolerance(const Mat& m) { return 1e-8 * (1.0 + norm2(m)); }

bool is_pd(const Mat& m) { return min_eig_margin(m) >= pd_tolerance(m); }

bool is_psd(const Mat& m) { return min_eig_margin(m) >= -pd_tolerance(m); }

Mat kron(const Mat& a, const Mat& b) {
    Mat out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

Mat expm(const Mat& m) {
    require_square(m, "expm");
    if (m.rows() == 0) return m;
    return m.exp();
}

Mat project_psd(const Mat& m, double floor) {
    const SymEig eig = sym_eig(m);
    const Vec clipped = eig.values.cwiseMax(floor);
    return symmetrize(eig.vectors * clipped.asDiagonal() * eig.vectors.transpose());
}

double max_real_eig(const Mat& m) {
    require_square(m, "max_real_eig");
    if (m.rows() == 0) return -std::numeric_limits<double>::infinity();
    Eigen::EigenSolver<Mat> es(m, false);
    return es.eigenvalues().real().maxCoeff();
}

double norm2(const Mat& m) {
    if (m.size() == 0) return 0.0;
    if (m.rows() == m.cols() && (m - m.transpose()).norm() <= 1e-12 * std::max(1.0, m.norm())) {
        Eigen::SelfAdjointEigenSolver<Mat> es(m, Eigen::EigenvaluesOnly);
        return es.eigenvalues().cwiseAbs().maxCoeff();
    }
    Eigen::JacobiSVD<Mat> svd(m);
    return svd.singularValues()(0);
}

Mat symmetrize(const Mat& m) { return 0.5 * (m + m.transpose()); }

Mat block_diag(std::span<const Mat> blocks) {
    Eigen::Index rows = 0, cols = 0;
    for (const auto& b : blocks) {
        rows += b.rows();
        cols += b.cols();
    }
    Mat out = Mat::Zero(rows, cols);
    Eigen::Index r = 0, c = 0;
    for (const auto& b : blocks) {
        out.block(r, c, b.rows(), b.cols()) = b;
        r += b.rows();
        c += b.cols();
    }
    return out;
}

int rank(const Mat& m, double rel_tol) {
    if (m.size() == 0) return 0;
    Eigen::JacobiSVD<Mat> svd(m);
    const Vec& s = svd.singularValues();
    if (s.size() == 0 || s(0) == 0.0) return 0;
    int r = 0;
    for (Eigen::Index k = 0; k < s.size(); ++k)
        if (s(k) > rel_tol * s(0)) ++r;
    return r;
}

}  // namespace etcon::num
