#include "etcon/error.hpp"
#include "etcon/sim.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace etcon;

namespace {

SimSettings short_settings(double duration = 3.0) {
    SimSettings s = testkit::water3_scenario().sim;
    s.duration = duration;
    s.jumps.clear();
    return s;
}

}  // namespace

TEST(Sim, ZohMatchesFineRk4) {
    const Scenario& sc = testkit::water3_scenario();
    for (AgentMask mask : {0u, 3u, 7u}) {
        const StackedMatrices m = sim::stacked_matrices(sc.plant, sc.gains, sc.graph, mask);
        const double horizon = 0.1, dt = 0.01;
        const Discretized d = sim::discretize(m, dt);
        std::mt19937_64 rng(mask + 1);
        std::normal_distribution<double> g;
        Vec z(12);
        for (int k = 0; k < 12; ++k) z(k) = 5.0 * g(rng);
        Vec w(3), v(3);
        for (int k = 0; k < 3; ++k) w(k) = 0.01 * g(rng), v(k) = 0.01 * g(rng);
        Vec u(6);
        u << w, v;
        Vec z_exact = z, z_rk = z;
        for (int k = 0; k < std::lround(horizon / dt); ++k) z_exact = d.phi * z_exact + d.gamma * u;
        const double h = 1e-6;
        for (int k = 0; k < std::lround(horizon / h); ++k) z_rk = sim::rk4_step(m, z_rk, w, v, h);
        EXPECT_LT((z_exact - z_rk).norm(), 1e-6 * (1 + z_rk.norm())) << "mask " << mask;
    }
}

TEST(Sim, ErrorStaysZeroWithoutDisturbance) {
    const Scenario& sc = testkit::water3_scenario();
    for (AgentMask mask = 0; mask < 8; ++mask) {
        const Discretized d = sim::discretize(sim::stacked_matrices(sc.plant, sc.gains, sc.graph, mask), 1e-3);
        Vec z(12);
        z.head(3) << 10, -4, 7;
        for (int i = 0; i < 3; ++i) z.segment(3 * (i + 1), 3) = z.head(3);
        for (int k = 0; k < 500; ++k) z = d.phi * z;
        EXPECT_LT(sim::error_stack(z, 3, 3).norm(), 1e-9 * (1 + z.norm())) << "mask " << mask;
    }
}

TEST(Sim, StackedMatrixPlantRow) {
    const Scenario& sc = testkit::water3_scenario();
    const StackedMatrices m = sim::stacked_matrices(sc.plant, sc.gains, sc.graph, 7);
    EXPECT_TRUE(m.a.topLeftCorner(3, 3) == sc.plant.a());
    Mat bk = Mat::Zero(3, 9);
    for (int i = 0; i < 3; ++i) bk.middleCols(3 * i, 3) = sc.plant.b_block(i) * sc.gains.k_blocks[i];
    EXPECT_LT((m.a.topRightCorner(3, 9) - bk).norm(), 1e-14);
    EXPECT_TRUE(m.b_v.topRows(3).isZero());
}

TEST(Sim, DeterministicRunsAndThreadIndependence) {
    const Scenario& sc = testkit::water3_scenario();
    SimSettings s = short_settings(2.0);
    const RunResult a = sim::run(sc, s);
    const RunResult b = sim::run(sc, s);
    EXPECT_TRUE(a.final_state == b.final_state);
    ASSERT_EQ(a.trace.size(), b.trace.size());
    for (std::size_t k = 0; k < a.trace.size(); ++k) {
        ASSERT_EQ(a.trace[k].v_x, b.trace[k].v_x);
        ASSERT_EQ(a.trace[k].connected, b.trace[k].connected);
    }
    s.seed = 99;
    EXPECT_FALSE(sim::run(sc, s).final_state == a.final_state);

    const auto one = sim::run_batch(sc, short_settings(1.0), 4, 1);
    const auto many = sim::run_batch(sc, short_settings(1.0), 4, 3);
    for (int k = 0; k < 4; ++k) EXPECT_TRUE(one[k].final_state == many[k].final_state);
    SimSettings s2 = short_settings(1.0);
    s2.seed += 2;
    EXPECT_TRUE(sim::run(sc, s2).final_state == one[2].final_state);
}

TEST(Sim, BookkeepingMatchesEventLog) {
    const Scenario& sc = testkit::water3_scenario();
    SimSettings s = sc.sim;
    s.duration = 12.0;
    std::erase_if(s.jumps, [&](const Jump& j) { return j.t > s.duration; });
    ASSERT_EQ(s.jumps.size(), 2u);
    const RunResult r = sim::run(sc, s);
    const auto steps = static_cast<std::int64_t>(r.trace.size());
    ASSERT_EQ(steps, 12000);
    ASSERT_FALSE(r.events.empty());
    EXPECT_EQ(r.events.front().t, 0.0);
    EXPECT_EQ(r.summary.n_events, static_cast<int>(r.events.size()) - 1);
    for (int i = 0; i < 3; ++i) {
        double off = 0.0;
        int rising = 0;
        bool prev = false;
        for (std::size_t k = 0; k < r.events.size(); ++k) {
            const double end = k + 1 < r.events.size() ? r.events[k + 1].t : s.duration;
            const bool on = r.events[k].config >> i & 1u;
            if (!on) off += end - r.events[k].t;
            if (on && !prev) ++rising;
            prev = on;
        }
        EXPECT_NEAR(r.summary.disconnect_fraction[i], off / s.duration, s.dt / s.duration + 1e-12);
        EXPECT_EQ(r.summary.connection_counts[i], rising);
        EXPECT_GE(r.summary.disconnect_fraction[i], 0.0);
        EXPECT_LE(r.summary.disconnect_fraction[i], 1.0);
    }
    EXPECT_EQ(r.summary.segment_convergence.size(), 3u);
}

TEST(Sim, ConvergenceTimeZeroFromOrigin) {
    const Scenario& sc = testkit::water3_scenario();
    SimSettings s = short_settings(1.0);
    s.x0 = Vec::Zero(3);
    EXPECT_EQ(sim::run(sc, s).summary.convergence_time, 0.0);
}

TEST(Sim, NeverTriggeringAgentIsAlwaysDisconnected) {
    Scenario sc = testkit::water3_scenario();
    // The bound grows like exp(gamma t) while disconnected, so keep the horizon short.
    sc.trigger.y_weights[1] *= 1e300;
    const RunResult r = sim::run(sc, short_settings(0.5));
    EXPECT_EQ(r.summary.disconnect_fraction[1], 1.0);
    EXPECT_EQ(r.summary.connection_counts[1], 0);
}

TEST(Sim, AlwaysConnectedKeepsFullNetwork) {
    const Scenario& sc = testkit::water3_scenario();
    SimSettings s = short_settings(1.0);
    s.always_connected = true;
    const RunResult r = sim::run(sc, s);
    EXPECT_EQ(r.summary.disconnect_fraction_mean, 0.0);
    EXPECT_EQ(r.summary.n_events, 0);
    EXPECT_EQ(r.events.front().config, 7u);
}

TEST(Sim, RejectsInitialErrorOutsideEllipsoid) {
    const Scenario& sc = testkit::water3_scenario();
    SimSettings s = short_settings(1.0);
    s.xhat0.assign(3, s.x0 + Vec::Constant(3, 5.0));
    EXPECT_THROW(sim::run(sc, s), Error);
    s.xhat0.assign(2, s.x0);
    EXPECT_THROW(sim::run(sc, s), Error);
    SimSettings bad = short_settings(1.0);
    bad.dt = 0.0;
    EXPECT_THROW(sim::run(sc, bad), Error);
}

TEST(Sim, CertifiedPropertiesHoldWithoutJumps) {
    const Scenario& sc = testkit::water3_scenario();
    const auto runs = sim::run_batch(sc, short_settings(6.0), 4);
    const sim::BatchSummary b = sim::aggregate(runs);
    EXPECT_EQ(b.invariance_violations, 0);
    EXPECT_EQ(b.soundness_violations, 0);
    EXPECT_EQ(b.conservativeness_violations, 0);
    EXPECT_EQ(b.converged, 4);
}
