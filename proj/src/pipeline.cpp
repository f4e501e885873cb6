#include "etcon/pipeline.hpp"

#include "etcon/error.hpp"

#include <cmath>
#include <sstream>

namespace etcon {

bool VerifyReport::pass() const {
    for (const auto& c : checks)
        if (!c.pass) return false;
    return true;
}

std::vector<std::string> VerifyReport::failures() const {
    std::vector<std::string> out;
    for (const auto& c : checks)
        if (!c.pass) out.push_back(c.name + " (margin " + std::to_string(c.margin) + ")" +
                                   (c.detail.empty() ? "" : ": " + c.detail));
    return out;
}

namespace pipeline {

namespace {

PlantModel make_plant(const ScenarioConfig& cfg) {
    return PlantModel(cfg.a, cfg.b, cfg.c, cfg.input_sizes, cfg.output_sizes, cfg.q, cfg.r);
}

std::string agents_label(AgentMask mask, int n) {
    std::ostringstream os;
    os << "{";
    bool first = true;
    for (int i = 0; i < n; ++i)
        if (mask >> i & 1u) {
            os << (first ? "" : ",") << i + 1;
            first = false;
        }
    os << "}";
    return os.str();
}

double rel_diff(const Mat& a, const Mat& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) return std::numeric_limits<double>::infinity();
    return (a - b).norm() / std::max(1.0, b.norm());
}

}  // namespace

Model build_model(const ScenarioConfig& cfg, const GainSet& gains) {
    PlantModel plant = make_plant(cfg);
    CommGraph graph(cfg.adjacency);
    SpectralSplit split = graph::spectral_split(graph);
    BarSystem bar = design::assemble_bar_system(plant, gains, split);
    return {std::move(plant), std::move(graph), gains, std::move(split), std::move(bar)};
}

Model build_model(const ScenarioConfig& cfg) {
    const PlantModel plant = make_plant(cfg);
    const CommGraph graph(cfg.adjacency);
    return build_model(cfg, design::synthesize_gains(plant, graph, cfg.gains));
}

DesignArtifact run_design(const ScenarioConfig& cfg, std::vector<CellDiagnostic>* cells, const SolverOptions& options) {
    const Model m = build_model(cfg);
    DesignArtifact d;
    d.config_hash = config::hash(cfg);
    d.seed = cfg.sim.seed;
    d.gains = m.gains;
    d.alpha_grid = cfg.alpha_grid;
    d.solver = options;
    std::vector<CellDiagnostic> diag;
    try {
        d.lyapunov = lmi::solve_design(m.plant, m.gains, m.bar, cfg.weights, cfg.alpha_grid, options, &diag);
    } catch (...) {
        if (cells) *cells = diag;
        throw;
    }
    if (cells) *cells = diag;
    d.cells = diag;
    d.gamma_table =
        lmi::gamma_table(m.plant, m.gains, m.graph, d.lyapunov.p_bar, cfg.alpha_grid, cfg.gamma_mode, d.gamma_options);
    return d;
}

void recompute_gamma(const ScenarioConfig& cfg, DesignArtifact& design, GammaMode mode) {
    const Model m = build_model(cfg, design.gains);
    design.gamma_table = lmi::gamma_table(m.plant, m.gains, m.graph, design.lyapunov.p_bar,
                                          design.alpha_grid.empty() ? cfg.alpha_grid : design.alpha_grid, mode,
                                          design.gamma_options);
}

VerifyReport verify(const ScenarioConfig& cfg, const DesignArtifact& d) {
    VerifyReport rep;
    auto add = [&](std::string name, bool pass, double margin, std::string detail = {}) {
        rep.checks.push_back({std::move(name), pass, margin, std::move(detail)});
    };
    auto add_lmi = [&](const std::string& name, const Mat& mat, bool strict) {
        const double margin = num::min_eig_margin(num::symmetrize(mat));
        const double tol = lmi::eps_pd(mat);
        const double slack = strict ? margin - tol : margin + tol;
        add(name, slack >= 0.0, slack, "min eigenvalue " + std::to_string(margin));
    };

    const std::string hash = config::hash(cfg);
    add("config hash", d.config_hash == hash, d.config_hash == hash ? 0.0 : -1.0,
        "design " + d.config_hash + ", config " + hash);
    add("tool version recorded", !d.tool_version.empty(), 0.0, d.tool_version);

    const PlantModel plant = make_plant(cfg);
    const CommGraph graph(cfg.adjacency);
    const int n = plant.n_states();
    const int agents = plant.n_agents();
    const LyapunovDesign& ly = d.lyapunov;
    if (ly.p.rows() != n || ly.p.cols() != n || ly.p_bar.rows() != agents * n || ly.p_bar.cols() != agents * n ||
        static_cast<int>(ly.y.size()) != agents || static_cast<int>(d.gains.k_blocks.size()) != agents ||
        static_cast<int>(d.gains.l_local.size()) != agents) {
        add("design dimensions", false, -1.0, "matrices do not match the configured plant");
        return rep;
    }
    for (int i = 0; i < agents; ++i)
        if (ly.y[i].rows() != plant.output_sizes()[i]) {
            add("design dimensions", false, -1.0, "Y" + std::to_string(i + 1) + " has the wrong size");
            return rep;
        }

    // Gains against a fresh synthesis from the configuration.
    try {
        const GainSet fresh = design::synthesize_gains(plant, graph, cfg.gains);
        double worst = rel_diff(d.gains.k, fresh.k);
        worst = std::max(worst, rel_diff(d.gains.l_global, fresh.l_global));
        for (int i = 0; i < agents; ++i) worst = std::max(worst, rel_diff(d.gains.l_local[i], fresh.l_local[i]));
        worst = std::max(worst, std::abs(d.gains.eta - fresh.eta) / std::max(1.0, fresh.eta));
        add("gains match configuration", worst <= 1e-8, 1e-8 - worst);
    } catch (const Error& e) {
        add("gains match configuration", false, -1.0, e.what());
    }

    const Model m = build_model(cfg, d.gains);
    const Mat a_bk = plant.a() + plant.b() * d.gains.k;
    const Mat e_mat = design::e_matrix(plant, d.gains);

    add_lmi("P positive definite", ly.p, true);
    add_lmi("Pbar positive definite", ly.p_bar, true);
    for (int i = 0; i < agents; ++i) add_lmi("Y" + std::to_string(i + 1) + " positive definite", ly.y[i], true);
    add_lmi("state LMI", lmi::state_lmi(a_bk, e_mat, plant.q(), ly.p, ly.p_bar, ly.alpha1), true);
    add_lmi("full-connection error LMI",
            lmi::bar_error_lmi(m.bar, plant.q(), plant.r(), ly.p_bar, ly.gamma_full, ly.alpha3), true);
    add("full-connection gamma nonpositive", ly.gamma_full <= 0.0, -ly.gamma_full);
    for (int i = 0; i < agents; ++i)
        add_lmi("trigger LMI (agent " + std::to_string(i + 1) + ")",
                lmi::trigger_lmi(a_bk, e_mat, plant.c_block(i), plant.selector(i), plant.q(), plant.r(), ly.p,
                                 ly.p_bar, ly.y[i]),
                false);

    // Laplacian split identities.
    const Mat& s = m.split.s;
    const Mat lbar = graph::laplacian(graph.adjacency());
    const double ones_err = (Vec::Ones(agents).transpose() * s).norm();
    const double orth_err = (s.transpose() * s - Mat::Identity(s.cols(), s.cols())).norm();
    const double diag_err = (s.transpose() * lbar * s - Mat(m.split.lambda_plus.asDiagonal())).norm();
    add("split: 1'S = 0", ones_err <= 1e-8, 1e-8 - ones_err);
    add("split: S'S = I", orth_err <= 1e-8, 1e-8 - orth_err);
    add("split: S'LS = diag(lambda+)", diag_err <= 1e-8, 1e-8 - diag_err);

    // Average/disagreement coordinates reproduce the full-connection error dynamics.
    {
        const ErrorMatrices full = design::error_matrices(plant, d.gains, lbar);
        const Mat& eb = m.bar.e_bar_basis;
        const Mat i_stack = design::identity_stack(agents, n);
        double err = rel_diff(eb * m.bar.a_bar, full.a_e * eb);
        err = std::max(err, rel_diff(eb * m.bar.w_bar, i_stack));
        err = std::max(err, rel_diff(eb * m.bar.v_bar, full.j));
        add("full-connection coordinate change", err <= 1e-6, 1e-6 - err);
    }

    // Gamma table.
    const GammaTable& table = d.gamma_table;
    const double tol = d.gamma_options.tol;
    if (table.entries.empty()) {
        add("gamma table non-empty", false, -1.0);
        return rep;
    }
    bool structure_ok = true;
    std::string structure_note;
    for (const auto& e : table.entries) {
        const ConnectionConfig induced = graph::induced_config(graph, e.config.connected);
        if (!graph::same_laplacian(induced.laplacian, e.config.laplacian)) {
            structure_ok = false;
            structure_note = "entry " + agents_label(e.config.connected, agents) + " has a Laplacian it does not induce";
        }
    }
    const auto& zero = table.entries.front();
    if (zero.config.connected != 0 || !graph::same_laplacian(zero.config.laplacian, Mat::Zero(agents, agents))) {
        structure_ok = false;
        structure_note = "first entry is not the zero configuration";
    } else if (std::abs(table.worst_case - zero.gamma) > 2.0 * tol) {
        structure_ok = false;
        structure_note = "worst_case differs from the zero configuration's gamma";
    }
    if (table.mode == GammaMode::kEnumerate && agents <= graph::kDefaultEnumerationCap) {
        for (const auto& c : graph::enumerate_configs(graph)) {
            bool found = false;
            for (const auto& e : table.entries) found |= graph::same_laplacian(e.config.laplacian, c.laplacian);
            if (!found) {
                structure_ok = false;
                structure_note = "configuration " + agents_label(c.connected, agents) + " is missing";
            }
        }
    }
    add("gamma table consistency", structure_ok, structure_ok ? 0.0 : -1.0, structure_note);

    for (const auto& e : table.entries) {
        if (!e.evaluated) continue;
        const auto lmi = lmi::config_lmi(plant, d.gains, graph, e.config.laplacian, ly.p_bar);
        const double slack = lmi::gamma_slack(lmi, e.gamma, e.alpha);
        add("gamma certificate " + agents_label(e.config.connected, agents), slack >= 0.0, slack,
            "min eigenvalue " + std::to_string(slack + lmi::gamma_threshold(lmi, e.alpha)));
    }

    double worst_gap = std::numeric_limits<double>::infinity();
    std::string offender;
    for (const auto& e : table.entries) {
        const double gap = table.worst_case + 2.0 * tol - e.gamma;
        if (gap < worst_gap) {
            worst_gap = gap;
            offender = agents_label(e.config.connected, agents) + " gamma " + std::to_string(e.gamma) +
                       " vs worst case " + std::to_string(table.worst_case);
        }
    }
    add("worst-case dominance (zero configuration is the largest gamma)", worst_gap >= 0.0, worst_gap, offender);
    return rep;
}

Scenario make_scenario(const ScenarioConfig& cfg, const DesignArtifact& d) {
    const std::string hash = config::hash(cfg);
    require(d.config_hash == hash, ErrorKind::kDesign,
            "design file was produced for a different configuration (hash " + d.config_hash + ", config " + hash + ")");
    Model m = build_model(cfg, d.gains);
    const auto failures = lmi::check_design(m.plant, m.gains, m.bar, d.lyapunov);
    if (!failures.empty()) {
        std::string msg = "design does not satisfy its LMIs:";
        for (const auto& f : failures) msg += "\n  " + f;
        fail(ErrorKind::kDesign, msg);
    }
    TriggerDesign trig;
    trig.y_weights = d.lyapunov.y;
    trig.gamma_table = d.gamma_table;
    trig.f_slope = cfg.f_slope;
    trig.stay_reset = cfg.stay_reset;
    return Scenario{std::move(m.plant), std::move(m.graph), std::move(m.gains), d.lyapunov.p, d.lyapunov.p_bar,
                    std::move(trig), cfg.sim};
}

}  // namespace pipeline
}  // namespace etcon
