#include "etcon/error.hpp"
#include "etcon/lmi.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace etcon;

namespace {

Mat scalar(double v) { return Mat::Constant(1, 1, v); }

}  // namespace

TEST(Lmi, SymLayoutRoundTrip) {
    SymLayout lay;
    EXPECT_EQ(lay.add_block(2), 0);
    EXPECT_EQ(lay.add_block(3), 1);
    EXPECT_EQ(lay.n_vars(), 3 + 6);
    Mat a(2, 2), b(3, 3);
    a << 1, 2, 2, 5;
    b << 1, 0.5, 0.25, 0.5, 2, -1, 0.25, -1, 3;
    const auto back = lay.unpack(lay.pack({a, b}));
    EXPECT_TRUE(back[0] == a);
    EXPECT_TRUE(back[1] == b);
}

TEST(Lmi, LinearizeReproducesMap) {
    SymLayout lay;
    lay.add_block(2);
    Mat m(2, 2);
    m << 0, 1, -2, -3;
    const BlockFn fn = [&](const std::vector<Mat>& x) -> Mat {
        return -(m.transpose() * x[0] + x[0] * m) + Mat::Identity(2, 2);
    };
    const AffineSym aff = linearize(lay, fn);
    Mat p(2, 2);
    p << 2, 0.3, 0.3, 1;
    EXPECT_LT((aff.eval(lay.pack({p})) - fn({p})).norm(), 1e-12);
}

TEST(Lmi, GenericQbScalarMatchesSchurComplement) {
    // dz = a z + b1 d1 + b2 d2: feasible iff gamma >= 2 alpha + 2a + b1^2/(alpha D1) + b2^2/(alpha D2).
    const double a = -0.5, b1 = 0.8, b2 = -0.3, d1 = 2.0, d2 = 0.5, alpha = 0.7;
    const double g_star = 2 * alpha + 2 * a + b1 * b1 / (alpha * d1) + b2 * b2 / (alpha * d2);
    auto lmi = [&](double g) {
        return lmi::generic_qb(scalar(a), scalar(b1), scalar(b2), scalar(1.0), scalar(d1), scalar(d2), g, alpha);
    };
    EXPECT_GT(num::min_eig_margin(lmi(g_star + 1e-3)), 0.0);
    EXPECT_LT(num::min_eig_margin(lmi(g_star - 1e-3)), 0.0);

    GammaOptions opt;
    opt.tol = 1e-4;
    const auto r = lmi::gamma_at_alpha([&](double g, double al) {
        return lmi::generic_qb(scalar(a), scalar(b1), scalar(b2), scalar(1.0), scalar(d1), scalar(d2), g, al);
    }, alpha, opt);
    ASSERT_TRUE(r.has_value());
    EXPECT_NEAR(r->gamma, g_star, 2 * opt.tol);
    EXPECT_GE(r->gamma, g_star);
}

TEST(Lmi, GammaOfConfigTakesBestAlpha) {
    // gamma*(alpha) = 2 alpha + 2a + c/alpha has its minimum at alpha = sqrt(c/2).
    const double a = -1.0, b1 = 1.0, d1 = 1.0;
    auto qb = [&](double g, double al) {
        return lmi::generic_qb(scalar(a), scalar(b1), scalar(0.0), scalar(1.0), scalar(d1), scalar(1.0), g, al);
    };
    const std::vector<double> grid = {0.1, 0.5, std::sqrt(0.5), 1.0, 4.0};
    const GammaResult r = lmi::gamma_of_config(qb, grid);
    EXPECT_NEAR(r.alpha, std::sqrt(0.5), 1e-12);
    EXPECT_NEAR(r.gamma, 4 * std::sqrt(0.5) - 2.0, 2e-3);
}

TEST(Lmi, GammaUnboundedReported) {
    // An LMI that is never positive definite.
    auto bad = [](double, double) { return Mat(-Mat::Identity(2, 2)); };
    EXPECT_FALSE(lmi::gamma_at_alpha(bad, 1.0).has_value());
    EXPECT_THROW(lmi::gamma_of_config(bad, {1.0, 2.0}), Error);
}

TEST(Lmi, FeasibilityLyapunov) {
    // Find P > 0 with A'P + PA < 0.
    Mat a(2, 2);
    a << -1, 3, 0, -2;
    SymLayout lay;
    lay.add_block(2);
    std::vector<LmiConstraint> cons;
    cons.push_back({"P", linearize(lay, [](const std::vector<Mat>& x) { return x[0]; }), true});
    cons.push_back({"lyap", linearize(lay, [&](const std::vector<Mat>& x) -> Mat {
                        return -(a.transpose() * x[0] + x[0] * a);
                    }), true});
    const SolveResult r = lmi::feasibility_solve(lay, cons);
    ASSERT_TRUE(r.feasible) << r.diagnostic;
    EXPECT_TRUE(num::is_pd(r.blocks[0]));
    EXPECT_TRUE(num::is_pd(-(a.transpose() * r.blocks[0] + r.blocks[0] * a)));
}

TEST(Lmi, FeasibilityDetectsInfeasible) {
    // P > 0 and A'P + PA < 0 with unstable A.
    Mat a(2, 2);
    a << 0.5, 0, 0, -1;
    SymLayout lay;
    lay.add_block(2);
    std::vector<LmiConstraint> cons;
    cons.push_back({"P", linearize(lay, [](const std::vector<Mat>& x) { return x[0]; }), true});
    cons.push_back({"lyap", linearize(lay, [&](const std::vector<Mat>& x) -> Mat {
                        return -(a.transpose() * x[0] + x[0] * a);
                    }), true});
    EXPECT_FALSE(lmi::feasibility_solve(lay, cons).feasible);
}

TEST(Lmi, MaxDetUnderUpperBound) {
    // max log det X  s.t.  X <= M  has the optimum X = M.
    Mat m(2, 2);
    m << 3, 1, 1, 2;
    SymLayout lay;
    lay.add_block(2);
    std::vector<LmiConstraint> cons;
    cons.push_back({"X", linearize(lay, [](const std::vector<Mat>& x) { return x[0]; }), true});
    cons.push_back({"M-X", linearize(lay, [&](const std::vector<Mat>& x) -> Mat { return m - x[0]; }), false});
    const SolveResult r = lmi::maxdet_solve(lay, cons, {1.0});
    ASSERT_TRUE(r.feasible) << r.diagnostic;
    EXPECT_NEAR(r.objective, std::log(m.determinant()), 1e-3);
    EXPECT_LT((r.blocks[0] - m).norm(), 1e-2);
}

TEST(Lmi, MaxDetWeightedEllipsoidInBall) {
    // max log det X  s.t.  [[I, X], [X, I]] >= 0  (i.e. ||X|| <= 1) gives X = I.
    SymLayout lay;
    lay.add_block(3);
    std::vector<LmiConstraint> cons;
    cons.push_back({"X", linearize(lay, [](const std::vector<Mat>& x) { return x[0]; }), true});
    cons.push_back({"ball", linearize(lay, [](const std::vector<Mat>& x) -> Mat {
                        Mat out(6, 6);
                        out << Mat::Identity(3, 3), x[0], x[0], Mat::Identity(3, 3);
                        return out;
                    }), false});
    const SolveResult r = lmi::maxdet_solve(lay, cons, {2.0});
    ASSERT_TRUE(r.feasible) << r.diagnostic;
    EXPECT_LT((r.blocks[0] - Mat::Identity(3, 3)).norm(), 1e-2);
}

TEST(Lmi, DefaultAlphaGrid) {
    const auto g = lmi::default_alpha_grid();
    ASSERT_EQ(g.size(), 13u);
    EXPECT_NEAR(g.front(), 1e-3, 1e-15);
    EXPECT_NEAR(g.back(), 1e3, 1e-9);
    for (std::size_t k = 1; k < g.size(); ++k) EXPECT_NEAR(g[k] / g[k - 1], std::pow(10.0, 0.5), 1e-12);
}

// Design produced by the fixture step.
TEST(LmiWaterDesign, CertificatesHold) {
    const auto& cfg = testkit::water3();
    const auto& d = testkit::water3_design();
    const Model m = pipeline::build_model(cfg, d.gains);
    EXPECT_TRUE(lmi::check_design(m.plant, m.gains, m.bar, d.lyapunov).empty());
    EXPECT_LE(d.lyapunov.gamma_full, 0.0);
    EXPECT_TRUE(num::is_pd(d.lyapunov.p));
    EXPECT_TRUE(num::is_pd(d.lyapunov.p_bar));
    for (const auto& y : d.lyapunov.y) EXPECT_TRUE(num::is_pd(y));
    const Mat a_bk = m.plant.a() + m.plant.b() * m.gains.k;
    const Mat st = lmi::state_lmi(a_bk, design::e_matrix(m.plant, m.gains), m.plant.q(), d.lyapunov.p,
                                  d.lyapunov.p_bar, d.lyapunov.alpha1);
    EXPECT_GE(num::min_eig_margin(st), lmi::eps_pd(st));
}

TEST(LmiWaterDesign, GammaTableLookup) {
    const auto& d = testkit::water3_design();
    const CommGraph g(testkit::water3().adjacency);
    const double zero = d.gamma_table.lookup(graph::induced_config(g, 0).laplacian);
    const double full = d.gamma_table.lookup(graph::induced_config(g, 7).laplacian);
    EXPECT_DOUBLE_EQ(zero, d.gamma_table.worst_case);
    EXPECT_LT(full, zero);
    // worst-case mode maps partial configurations onto the zero-configuration gamma
    EXPECT_DOUBLE_EQ(d.gamma_table.lookup(graph::induced_config(g, 3).laplacian), d.gamma_table.worst_case);
}
