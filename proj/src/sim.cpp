#include "etcon/sim.hpp"

#include "etcon/error.hpp"

#include <algorithm>
#include <atomic>
#include <map>
#include <optional>
#include <random>
#include <thread>

namespace etcon::sim {

StackedMatrices stacked_matrices(const PlantModel& plant, const GainSet& gains, const CommGraph& graph,
                                 AgentMask connected) {
    const int n = plant.n_states();
    const int agents = plant.n_agents();
    require(graph.n_agents() == agents, ErrorKind::kStructural, "graph and plant disagree on the number of agents");
    const Mat lap = graph::induced_config(graph, connected).laplacian;
    const Mat a_bk = plant.a() + plant.b() * gains.k;
    const Mat eye = Mat::Identity(n, n);

    StackedMatrices m;
    const int size = (agents + 1) * n;
    m.a = Mat::Zero(size, size);
    m.b_w = Mat::Zero(size, n);
    m.b_v = Mat::Zero(size, plant.n_outputs());
    m.a.topLeftCorner(n, n) = plant.a();
    m.b_w.topRows(n) = eye;
    for (int i = 0; i < agents; ++i) {
        const int r = (i + 1) * n;
        m.a.block(0, r, n, n) = plant.b_block(i) * gains.k_blocks[i];
        const Mat l_bar = gains.observer_gain(plant, i, lap(i, i));
        const Mat c_i = plant.c_block(i);
        m.a.block(r, 0, n, n) = l_bar * c_i;
        m.a.block(r, r, n, n) = a_bk - l_bar * c_i;
        for (int j = 0; j < agents; ++j) {
            if (j == i || lap(i, j) == 0.0) continue;
            const double w = -gains.eta * lap(i, j);  // eta a_ij
            m.a.block(r, r, n, n) -= w * eye;
            m.a.block(r, (j + 1) * n, n, n) += w * eye;
        }
        m.b_v.block(r, plant.output_offset(i), n, plant.output_sizes()[i]) = l_bar;
    }
    return m;
}

Discretized discretize(const StackedMatrices& m, double dt) {
    const auto s = m.a.rows();
    const auto q = m.b_w.cols() + m.b_v.cols();
    Mat aug = Mat::Zero(s + q, s + q);
    aug.topLeftCorner(s, s) = m.a * dt;
    aug.block(0, s, s, m.b_w.cols()) = m.b_w * dt;
    aug.block(0, s + m.b_w.cols(), s, m.b_v.cols()) = m.b_v * dt;
    const Mat e = num::expm(aug);
    return {e.topLeftCorner(s, s), e.topRightCorner(s, q)};
}

Vec rk4_step(const StackedMatrices& m, const Vec& z, const Vec& w, const Vec& v, double h) {
    const Vec u = m.b_w * w + m.b_v * v;
    auto f = [&](const Vec& s) -> Vec { return m.a * s + u; };
    const Vec k1 = f(z);
    const Vec k2 = f(z + 0.5 * h * k1);
    const Vec k3 = f(z + 0.5 * h * k2);
    const Vec k4 = f(z + h * k3);
    return z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

Vec error_stack(const Vec& z, int n, int n_agents) {
    Vec e(n * n_agents);
    for (int i = 0; i < n_agents; ++i) e.segment(i * n, n) = z.head(n) - z.segment((i + 1) * n, n);
    return e;
}

namespace {

Vec initial_stack(const Scenario& sc, const SimSettings& st) {
    const int n = sc.plant.n_states();
    const int agents = sc.plant.n_agents();
    Vec z((agents + 1) * n);
    z.head(n) = st.x0;
    for (int i = 0; i < agents; ++i) z.segment((i + 1) * n, n) = st.xhat0.empty() ? st.x0 : st.xhat0[i];
    return z;
}

}  // namespace

void validate(const Scenario& sc, const SimSettings& st) {
    const int n = sc.plant.n_states();
    const int agents = sc.plant.n_agents();
    require(st.dt > 0.0, ErrorKind::kValidation, "sim.dt must be positive");
    require(st.duration >= st.dt, ErrorKind::kValidation, "sim.duration must be at least dt");
    require(st.x0.size() == n, ErrorKind::kStructural, "sim.x0 must have " + std::to_string(n) + " entries");
    require(st.xhat0.empty() || static_cast<int>(st.xhat0.size()) == agents, ErrorKind::kStructural,
            "sim.xhat0 needs one estimate per agent");
    for (const auto& xh : st.xhat0)
        require(xh.size() == n, ErrorKind::kStructural, "sim.xhat0 entries must have " + std::to_string(n) + " entries");
    for (const auto& j : st.jumps) {
        require(j.delta.size() == n, ErrorKind::kStructural, "jump delta must have " + std::to_string(n) + " entries");
        require(j.t >= 0.0 && j.t <= st.duration, ErrorKind::kValidation, "jump time outside the horizon");
    }
    require(sc.p.rows() == n && sc.p.cols() == n, ErrorKind::kStructural, "P has the wrong size");
    require(sc.p_bar.rows() == agents * n && sc.p_bar.cols() == agents * n, ErrorKind::kStructural,
            "Pbar has the wrong size");
    require(static_cast<int>(sc.trigger.y_weights.size()) == agents, ErrorKind::kStructural,
            "need one trigger weight per agent");
    for (int i = 0; i < agents; ++i)
        require(sc.trigger.y_weights[i].rows() == sc.plant.output_sizes()[i], ErrorKind::kStructural,
                "trigger weight " + std::to_string(i + 1) + " has the wrong size");
    const Vec e0 = error_stack(initial_stack(sc, st), n, agents);
    const double ve0 = e0.dot(sc.p_bar * e0);
    require(ve0 <= 1.0 + 1e-9, ErrorKind::kValidation,
            "initial estimation error lies outside the error ellipsoid (e'Pbar e = " + std::to_string(ve0) + ")");
}

RunResult run(const Scenario& sc, const SimSettings& st) {
    validate(sc, st);
    const PlantModel& plant = sc.plant;
    const int n = plant.n_states();
    const int agents = plant.n_agents();
    const AgentMask all = sc.graph.all_agents();
    const std::int64_t steps = std::llround(st.duration / st.dt);

    std::vector<std::int64_t> jump_steps;
    std::vector<Jump> jumps = st.jumps;
    std::stable_sort(jumps.begin(), jumps.end(), [](const Jump& a, const Jump& b) { return a.t < b.t; });
    for (const auto& j : jumps) jump_steps.push_back(std::llround(j.t / st.dt));

    std::map<AgentMask, Discretized> cache;
    auto step_matrices = [&](AgentMask mask) -> const Discretized& {
        auto it = cache.find(mask);
        if (it == cache.end())
            it = cache.emplace(mask, discretize(stacked_matrices(plant, sc.gains, sc.graph, mask), st.dt)).first;
        return it->second;
    };

    std::vector<Mat> c_blocks;
    for (int i = 0; i < agents; ++i) c_blocks.push_back(plant.c_block(i));

    DisturbanceSampler w_sampler(plant.q());
    DisturbanceSampler v_sampler(plant.r());
    std::mt19937_64 rng(st.seed);
    ProtocolNetwork net(sc.graph, sc.trigger, st.dt);

    RunResult out;
    RunSummary& sum = out.summary;
    sum.connection_counts.assign(agents, 0);
    std::vector<std::int64_t> off_steps(agents, 0);

    Vec z = initial_stack(sc, st);
    double candidate = std::numeric_limits<double>::quiet_NaN();
    bool armed = false;
    std::int64_t segment_start = 0;
    std::size_t next_jump = 0;
    std::vector<bool> was_connected(agents, false);

    auto track = [&](double t, double vx, double ve) {
        if (vx <= 1.0) {
            if (std::isnan(candidate)) candidate = t;
        } else if (vx > 1.0 + st.eps_hold) {
            candidate = std::numeric_limits<double>::quiet_NaN();
        }
        if (ve > 1.0) {
            armed = false;
        } else {
            if (armed) {
                sum.max_v_after_entry = std::max(sum.max_v_after_entry, vx);
                if (vx > 1.0 + st.invariance_tol) ++sum.invariance_violations;
            }
            if (vx <= 1.0) armed = true;
        }
    };

    std::vector<Vec> y(agents);
    for (std::int64_t k = 0; k < steps; ++k) {
        const double t = static_cast<double>(k) * st.dt;
        while (next_jump < jumps.size() && jump_steps[next_jump] <= k) {
            z.head(n) += jumps[next_jump].delta;
            if (k > segment_start) sum.segment_convergence.push_back(candidate);
            candidate = std::numeric_limits<double>::quiet_NaN();
            armed = false;
            segment_start = k;
            net.restart(k);
            ++next_jump;
        }
        const Vec x = z.head(n);
        const Vec e = error_stack(z, n, agents);
        const double vx = x.dot(sc.p * x);
        const double ve = e.dot(sc.p_bar * e);
        track(t, vx, ve);

        const Vec w = w_sampler.sample(st.disturbance, rng);
        const Vec v = v_sampler.sample(st.disturbance, rng);
        for (int i = 0; i < agents; ++i)
            y[i] = c_blocks[i] * x + v.segment(plant.output_offset(i), plant.output_sizes()[i]);

        const double true_bound = protocol::trigger_bound(net.omniscient_exponent());
        const RoundResult round = net.step(k, y, st.always_connected);

        const double disturbance_part = w.dot(plant.q() * w) + v.dot(plant.r() * v);
        bool all_fail = true;
        for (int i = 0; i < agents; ++i) {
            if (round.bound[i] < true_bound - 1e-12 * (1.0 + std::abs(true_bound))) ++sum.conservativeness_violations;
            if (-round.y_quad[i] + ve + disturbance_part < 0.0) all_fail = false;
            const bool now = round.connected >> i & 1u;
            if (now && !was_connected[i]) ++sum.connection_counts[i];
            if (!now) ++off_steps[i];
            was_connected[i] = now;
        }
        if (!st.always_connected && all_fail && round.triggered != all) ++sum.soundness_violations;

        if (k == 0 || round.event) out.events.push_back({t, round.connected});
        if (st.record_trace) out.trace.push_back({t, vx, ve, round.connected, round.y_quad, round.bound});

        const Discretized& d = step_matrices(round.connected);
        Vec u(w.size() + v.size());
        u << w, v;
        z = d.phi * z + d.gamma * u;

        if (!st.always_connected && round.triggered != all && vx >= 1.0) {
            const Vec xn = z.head(n);
            if (xn.dot(sc.p * xn) >= vx) ++sum.decrease_violations;
        }
    }
    {
        const Vec x = z.head(n);
        const Vec e = error_stack(z, n, agents);
        track(static_cast<double>(steps) * st.dt, x.dot(sc.p * x), e.dot(sc.p_bar * e));
    }
    sum.segment_convergence.push_back(candidate);
    sum.convergence_time = sum.segment_convergence.front();

    sum.disconnect_fraction.resize(agents);
    double total = 0.0;
    for (int i = 0; i < agents; ++i) {
        sum.disconnect_fraction[i] = static_cast<double>(off_steps[i]) / static_cast<double>(steps);
        total += sum.disconnect_fraction[i];
    }
    sum.disconnect_fraction_mean = total / agents;
    sum.n_events = static_cast<int>(out.events.size()) - 1;
    out.final_state = z;
    return out;
}

std::vector<RunResult> run_batch(const Scenario& scenario, const SimSettings& settings, int trials, int threads,
                                 int trace_limit) {
    require(trials >= 1, ErrorKind::kValidation, "trials must be at least 1");
    validate(scenario, settings);
    if (threads <= 0) threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    threads = std::min(threads, trials);

    std::vector<RunResult> out(trials);
    std::vector<std::optional<Error>> errors(trials);
    std::atomic<int> next{0};
    auto worker = [&] {
        for (int k = next++; k < trials; k = next++) {
            SimSettings s = settings;
            s.seed = settings.seed + static_cast<std::uint64_t>(k);
            s.record_trace = k < trace_limit;
            try {
                out[k] = run(scenario, s);
            } catch (const Error& e) {
                errors[k] = e;
            }
        }
    };
    std::vector<std::thread> pool;
    for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) throw *e;
    return out;
}

BatchSummary aggregate(const std::vector<RunResult>& results) {
    std::vector<const RunSummary*> runs;
    for (const auto& r : results) runs.push_back(&r.summary);
    BatchSummary b;
    b.trials = static_cast<int>(runs.size());
    if (runs.empty()) return b;
    const std::size_t agents = runs.front()->disconnect_fraction.size();
    b.disconnect_fraction.assign(agents, 0.0);
    b.connection_counts.assign(agents, 0.0);
    double conv = 0.0;
    for (const RunSummary* rp : runs) {
        const RunSummary& r = *rp;
        if (!std::isnan(r.convergence_time)) {
            conv += r.convergence_time;
            ++b.converged;
        }
        b.disconnect_fraction_mean += r.disconnect_fraction_mean;
        for (std::size_t i = 0; i < agents; ++i) {
            b.disconnect_fraction[i] += r.disconnect_fraction[i];
            b.connection_counts[i] += r.connection_counts[i];
        }
        b.n_events_mean += r.n_events;
        b.invariance_violations += r.invariance_violations;
        b.soundness_violations += r.soundness_violations;
        b.conservativeness_violations += r.conservativeness_violations;
        b.decrease_violations += r.decrease_violations;
    }
    const double m = static_cast<double>(runs.size());
    if (b.converged > 0) b.convergence_time_mean = conv / b.converged;
    b.disconnect_fraction_mean /= m;
    for (std::size_t i = 0; i < agents; ++i) {
        b.disconnect_fraction[i] /= m;
        b.connection_counts[i] /= m;
    }
    b.n_events_mean /= m;
    return b;
}

}  // namespace etcon::sim
