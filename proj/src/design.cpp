#include "etcon/design.hpp"

#include "etcon/error.hpp"

#include <cmath>
#include <complex>
#include <random>
#include <sstream>
#include <string>

namespace etcon {

Mat GainSet::l_block(const PlantModel& plant, int i) const {
    return l_global.middleCols(plant.output_offset(i), plant.output_sizes()[i]);
}

Mat GainSet::observer_gain(const PlantModel& plant, int i, double l_ii) const {
    if (l_ii == 0.0) return l_local[i];
    return static_cast<double>(plant.n_agents()) * l_block(plant, i);
}

namespace design {

namespace {

std::string describe(const std::vector<double>& poles) {
    std::ostringstream os;
    os << "[";
    for (std::size_t k = 0; k < poles.size(); ++k) os << (k ? ", " : "") << poles[k];
    os << "]";
    return os.str();
}

bool poly_matches(const Vec& got, const Vec& want) {
    if (got.size() != want.size()) return false;
    for (Eigen::Index k = 0; k < got.size(); ++k)
        if (std::abs(got(k) - want(k)) > 1e-6 * std::max(1.0, std::abs(want(k)))) return false;
    return true;
}

Mat controllability(const Mat& a, const Mat& b) {
    const auto n = a.rows();
    Mat out(n, n * b.cols());
    Mat block = b;
    for (Eigen::Index k = 0; k < n; ++k) {
        out.middleCols(k * b.cols(), b.cols()) = block;
        block = a * block;
    }
    return out;
}

Mat poly_of_matrix(const Vec& coeffs, const Mat& a) {
    // Horner: ((c0 A + c1 I) A + c2 I) ...
    const auto n = a.rows();
    Mat out = Mat::Zero(n, n);
    for (Eigen::Index k = 0; k < coeffs.size(); ++k) out = out * a + coeffs(k) * Mat::Identity(n, n);
    return out;
}

// Single-input Ackermann: row k with char(a + b k) = target.
std::optional<Mat> ackermann(const Mat& a, const Vec& b, const Vec& target) {
    const auto n = a.rows();
    const Mat ctrb = controllability(a, b);
    if (num::rank(ctrb) < n) return std::nullopt;
    Mat en = Mat::Zero(1, n);
    en(0, n - 1) = 1.0;
    const Mat row = -en * ctrb.fullPivLu().solve(poly_of_matrix(target, a));
    return row;
}

}  // namespace

Vec poly_from_roots(const std::vector<double>& roots) {
    Vec c = Vec::Zero(static_cast<Eigen::Index>(roots.size()) + 1);
    c(0) = 1.0;
    for (std::size_t k = 0; k < roots.size(); ++k) {
        for (auto j = static_cast<Eigen::Index>(k) + 1; j >= 1; --j) c(j) -= roots[k] * c(j - 1);
    }
    return c;
}

Vec char_poly(const Mat& m) {
    const auto n = m.rows();
    std::vector<std::complex<double>> c(n + 1, 0.0);
    c[0] = 1.0;
    if (n > 0) {
        Eigen::EigenSolver<Mat> es(m, false);
        for (Eigen::Index k = 0; k < n; ++k) {
            const std::complex<double> root = es.eigenvalues()(k);
            for (auto j = k + 1; j >= 1; --j) c[j] -= root * c[j - 1];
        }
    }
    Vec out(n + 1);
    for (Eigen::Index k = 0; k <= n; ++k) out(k) = c[k].real();
    return out;
}

Mat place_poles(const Mat& a, const Mat& b, const std::vector<double>& poles) {
    const auto n = a.rows();
    require(a.cols() == n && b.rows() == n, ErrorKind::kStructural, "place_poles: dimension mismatch");
    require(static_cast<Eigen::Index>(poles.size()) == n, ErrorKind::kValidation,
            "place_poles: need " + std::to_string(n) + " poles, got " + std::to_string(poles.size()));
    if (n == 0) return Mat(b.cols(), 0);
    const Vec target = poly_from_roots(poles);

    if (b.cols() == n && num::rank(b) == n) {
        Mat desired = Mat::Zero(n, n);
        for (Eigen::Index k = 0; k < n; ++k) desired(k, k) = poles[k];
        Mat g = b.fullPivLu().solve(desired - a);
        if (poly_matches(char_poly(a + b * g), target)) return g;
    }

    require(num::rank(controllability(a, b)) == n, ErrorKind::kSynthesis,
            "place_poles: (A, B) is not controllable for poles " + describe(poles));

    // Reduce to a single input b g. If A is not cyclic, first apply a
    // pseudo-random feedback to make it so.
    std::mt19937_64 rng(0x5eed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double scale = std::max(1.0, num::norm2(a)) / std::max(1e-12, num::norm2(b));
    for (int attempt = 0; attempt < 4; ++attempt) {
        Mat base = Mat::Zero(b.cols(), n);
        if (attempt > 0)
            for (Eigen::Index i = 0; i < base.rows(); ++i)
                for (Eigen::Index j = 0; j < n; ++j) base(i, j) = scale * gauss(rng);
        const Mat a0 = a + b * base;
        std::vector<Vec> directions;
        for (Eigen::Index k = 0; k < b.cols(); ++k) directions.push_back(Vec::Unit(b.cols(), k));
        directions.push_back(Vec::Ones(b.cols()));
        for (int r = 0; r < 4; ++r) {
            Vec g(b.cols());
            for (Eigen::Index k = 0; k < g.size(); ++k) g(k) = gauss(rng);
            directions.push_back(g);
        }
        for (const Vec& g : directions) {
            const auto row = ackermann(a0, b * g, target);
            if (!row) continue;
            Mat gain = base + g * (*row);
            if (poly_matches(char_poly(a + b * gain), target)) return gain;
        }
    }
    fail(ErrorKind::kSynthesis, "place_poles: could not place poles " + describe(poles));
}

Mat observer_gain_global(const Mat& a, const Mat& c, const std::vector<double>& poles) {
    const auto n = a.rows();
    require(c.cols() == n, ErrorKind::kStructural, "observer_gain_global: dimension mismatch");
    require(static_cast<Eigen::Index>(poles.size()) == n, ErrorKind::kValidation,
            "observer_gain_global: need " + std::to_string(n) + " poles, got " + std::to_string(poles.size()));
    if (n == 0) return Mat(0, c.rows());
    if (c.rows() == n && num::rank(c) == n) {
        Mat desired = Mat::Zero(n, n);
        for (Eigen::Index k = 0; k < n; ++k) desired(k, k) = poles[k];
        Mat l = (a - desired) * c.inverse();
        if (poly_matches(char_poly(a - l * c), poly_from_roots(poles))) return l;
    }
    try {
        return -place_poles(a.transpose(), c.transpose(), poles).transpose();
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::kSynthesis)
            fail(ErrorKind::kSynthesis, "observer_gain_global: (A, C) is not observable for poles " + describe(poles));
        throw;
    }
}

ObsDecomposition obs_decompose(const Mat& a, const Mat& c_i) {
    const auto n = a.rows();
    require(a.cols() == n && c_i.cols() == n, ErrorKind::kStructural, "obs_decompose: dimension mismatch");
    ObsDecomposition out;
    out.t = Mat::Identity(n, n);
    if (n > 0 && c_i.rows() > 0) {
        Mat obs(c_i.rows() * n, n);
        Mat block = c_i;
        for (Eigen::Index k = 0; k < n; ++k) {
            obs.middleRows(k * c_i.rows(), c_i.rows()) = block;
            block = block * a;
        }
        Eigen::JacobiSVD<Mat> svd(obs, Eigen::ComputeFullV);
        const Vec& s = svd.singularValues();
        int r = 0;
        if (s.size() > 0 && s(0) > 0.0)
            for (Eigen::Index k = 0; k < s.size(); ++k)
                if (s(k) > 1e-9 * s(0)) ++r;
        out.obs_dim = r;
        out.t = svd.matrixV();
        for (Eigen::Index k = 0; k < n; ++k) {
            Eigen::Index idx = 0;
            out.t.col(k).cwiseAbs().maxCoeff(&idx);
            if (out.t(idx, k) < 0.0) out.t.col(k) *= -1.0;
        }
    }
    const int r = out.obs_dim;
    const Mat at = out.t.transpose() * a * out.t;
    const Mat ct = c_i * out.t;
    out.a_o = at.topLeftCorner(r, r);
    out.a_21 = at.bottomLeftCorner(n - r, r);
    out.a_obar = at.bottomRightCorner(n - r, n - r);
    out.c_o = ct.leftCols(r);
    return out;
}

Mat local_observer_gain(const ObsDecomposition& decomp, const std::vector<double>& poles) {
    const auto n = decomp.t.rows();
    const auto m_i = decomp.c_o.rows();
    const int r = decomp.obs_dim;
    if (r == 0) {
        require(poles.empty(), ErrorKind::kSynthesis,
                "local_observer_gain: nothing is observable, but poles " + describe(poles) + " were requested");
        return Mat::Zero(n, m_i);
    }
    require(static_cast<int>(poles.size()) == r, ErrorKind::kValidation,
            "local_observer_gain: observable dimension is " + std::to_string(r) + ", got " +
                std::to_string(poles.size()) + " poles");
    const Mat l_o = observer_gain_global(decomp.a_o, decomp.c_o, poles);
    return decomp.t.leftCols(r) * l_o;
}

Mat disagreement_block(const Mat& f_bar, const SpectralSplit& split, int n, double eta) {
    const Mat s_i = num::kron(split.s, Mat::Identity(n, n));
    const Mat lam = num::kron(Mat(split.lambda_plus.asDiagonal()), Mat::Identity(n, n));
    return s_i.transpose() * f_bar * s_i - eta * lam;
}

double coupling_gain(const Mat& f_bar, const SpectralSplit& split, int n, double floor_margin) {
    require(split.lambda_plus.size() == 0 || split.lambda_plus.minCoeff() > 0.0, ErrorKind::kValidation,
            "coupling_gain: underlying graph must be connected");
    auto ok = [&](double eta) {
        const Mat blk = disagreement_block(f_bar, split, n, eta);
        return blk.size() == 0 || num::max_real_eig(blk) <= -floor_margin;
    };
    if (ok(0.0)) return 0.0;
    double eta = 1.0;
    while (!ok(eta)) {
        eta *= 2.0;
        require(eta < 1e15, ErrorKind::kDesign, "coupling_gain: no admissible eta below 1e15");
    }
    return eta;
}

Mat e_matrix(const PlantModel& plant, const GainSet& gains) {
    const int n = plant.n_states();
    const int agents = plant.n_agents();
    Mat e(n, agents * n);
    for (int i = 0; i < agents; ++i) e.middleCols(i * n, n) = plant.b_block(i) * gains.k_blocks[i];
    return e;
}

Mat identity_stack(int n_agents, int n) {
    Mat out(n_agents * n, n);
    for (int i = 0; i < n_agents; ++i) out.middleRows(i * n, n).setIdentity();
    return out;
}

namespace {

Mat f_for_diagonal(const PlantModel& plant, const GainSet& gains, const Vec& l_diag) {
    const int n = plant.n_states();
    const int agents = plant.n_agents();
    const Mat a_bk = plant.a() + plant.b() * gains.k;
    Mat f(agents * n, agents * n);
    for (int j = 0; j < agents; ++j) {
        const Mat bk = plant.b_block(j) * gains.k_blocks[j];
        for (int i = 0; i < agents; ++i) f.block(i * n, j * n, n, n) = -bk;
    }
    for (int i = 0; i < agents; ++i)
        f.block(i * n, i * n, n, n) += a_bk - gains.observer_gain(plant, i, l_diag(i)) * plant.c_block(i);
    return f;
}

}  // namespace

Mat full_connection_f(const PlantModel& plant, const GainSet& gains) {
    return f_for_diagonal(plant, gains, Vec::Ones(plant.n_agents()));
}

ErrorMatrices error_matrices(const PlantModel& plant, const GainSet& gains, const Mat& laplacian) {
    const int n = plant.n_states();
    const int agents = plant.n_agents();
    require(laplacian.rows() == agents && laplacian.cols() == agents, ErrorKind::kStructural,
            "error_matrices: Laplacian size does not match the number of agents");
    ErrorMatrices out;
    out.laplacian = laplacian;
    out.f = f_for_diagonal(plant, gains, laplacian.diagonal());
    out.a_e = out.f - gains.eta * num::kron(laplacian, Mat::Identity(n, n));
    std::vector<Mat> blocks;
    for (int i = 0; i < agents; ++i) blocks.push_back(gains.observer_gain(plant, i, laplacian(i, i)));
    out.j = num::block_diag(blocks);
    return out;
}

ErrorSystem assemble_error_system(const PlantModel& plant, const GainSet& gains,
                                  const std::vector<ConnectionConfig>& configs) {
    ErrorSystem out;
    out.e_mat = e_matrix(plant, gains);
    out.i_stack = identity_stack(plant.n_agents(), plant.n_states());
    out.configs = configs;
    for (const auto& cfg : configs) out.per_config.push_back(error_matrices(plant, gains, cfg.laplacian));
    return out;
}

BarSystem assemble_bar_system(const PlantModel& plant, const GainSet& gains, const SpectralSplit& split) {
    const int n = plant.n_states();
    const int agents = plant.n_agents();
    const double nf = static_cast<double>(agents);
    const Mat id = Mat::Identity(n, n);
    const Mat s_i = num::kron(split.s, id);
    const Mat i_stack = identity_stack(agents, n);
    const Mat a_bk = plant.a() + plant.b() * gains.k;

    BarSystem out;
    out.f_bar = full_connection_f(plant, gains);
    out.h.resize(n, agents * n);
    std::vector<Mat> l_blocks;
    for (int i = 0; i < agents; ++i) {
        const Mat l_i = gains.l_block(plant, i);
        out.h.middleCols(i * n, n) = a_bk / nf - plant.b_block(i) * gains.k_blocks[i] - l_i * plant.c_block(i);
        l_blocks.push_back(l_i);
    }
    out.j_bar = nf * num::block_diag(l_blocks);

    const Mat lower_right = disagreement_block(out.f_bar, split, n, gains.eta);
    if (lower_right.size() > 0 && num::max_real_eig(lower_right) >= 0.0) {
        std::ostringstream os;
        os << "eta = " << gains.eta
           << " is too small: the disagreement block is not Hurwitz (max real eigenvalue "
           << num::max_real_eig(lower_right) << "); choose eta with coupling_gain";
        fail(ErrorKind::kDesign, os.str());
    }

    const int d = agents * n;
    out.a_bar.resize(d, d);
    out.a_bar.topLeftCorner(n, n) = plant.a() - gains.l_global * plant.c();
    out.a_bar.topRightCorner(n, d - n) = out.h * s_i;
    out.a_bar.bottomLeftCorner(d - n, n) = s_i.transpose() * out.f_bar * i_stack;
    out.a_bar.bottomRightCorner(d - n, d - n) = lower_right;

    out.w_bar.resize(d, n);
    out.w_bar.topRows(n) = id;
    out.w_bar.bottomRows(d - n) = s_i.transpose() * i_stack;

    out.v_bar.resize(d, plant.n_outputs());
    out.v_bar.topRows(n) = gains.l_global;
    out.v_bar.bottomRows(d - n) = s_i.transpose() * out.j_bar;

    out.e_bar_basis.resize(d, d);
    out.e_bar_basis.leftCols(n) = i_stack;
    out.e_bar_basis.rightCols(d - n) = s_i;
    return out;
}

GainSet synthesize_gains(const PlantModel& plant, const CommGraph& graph, const GainSpec& spec) {
    const int agents = plant.n_agents();
    require(graph.n_agents() == agents, ErrorKind::kStructural,
            "graph has " + std::to_string(graph.n_agents()) + " agents but the plant partitions list " +
                std::to_string(agents));
    require(static_cast<int>(spec.observer_poles_local.size()) == agents, ErrorKind::kValidation,
            "need one local observer pole list per agent");

    GainSet g;
    g.k = place_poles(plant.a(), plant.b(), spec.controller_poles);
    for (int i = 0; i < agents; ++i)
        g.k_blocks.push_back(g.k.middleRows(plant.input_offset(i), plant.input_sizes()[i]));
    g.l_global = observer_gain_global(plant.a(), plant.c(), spec.observer_poles_global);
    for (int i = 0; i < agents; ++i) {
        const ObsDecomposition d = obs_decompose(plant.a(), plant.c_block(i));
        g.l_local.push_back(local_observer_gain(d, spec.observer_poles_local[i]));
        if (d.obs_dim > 0) {
            const Mat l_o = d.t.leftCols(d.obs_dim).transpose() * g.l_local.back();
            require(num::max_real_eig(d.a_o - l_o * d.c_o) < 0.0, ErrorKind::kDesign,
                    "local observer of agent " + std::to_string(i + 1) + " is not Hurwitz");
        }
    }
    require(num::max_real_eig(plant.a() + plant.b() * g.k) < 0.0, ErrorKind::kDesign, "A + BK is not Hurwitz");
    require(num::max_real_eig(plant.a() - g.l_global * plant.c()) < 0.0, ErrorKind::kDesign,
            "A - LC is not Hurwitz");

    if (spec.eta) {
        require(*spec.eta >= 0.0, ErrorKind::kValidation, "eta must be nonnegative");
        g.eta = *spec.eta;
    } else {
        g.eta = coupling_gain(full_connection_f(plant, g), graph::spectral_split(graph), plant.n_states(),
                              spec.floor_margin);
    }
    return g;
}

}  // namespace design
}  // namespace etcon
