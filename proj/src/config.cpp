#include "etcon/config.hpp"

#include "etcon/error.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace etcon::config {

using nlohmann::json;

namespace {

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

[[noreturn]] void schema(const std::string& path, const std::string& what) { fail(ErrorKind::kSchema, path + ": " + what); }

void only_keys(const json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) schema(path, "expected an object");
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [k, v] : obj.items())
        if (!ok.count(k)) schema(join(path, k), "unknown key");
}

const json& need(const json& obj, const std::string& path, const char* key) {
    if (!obj.contains(key)) schema(join(path, key), "missing required key");
    return obj.at(key);
}

const json* maybe(const json& obj, const char* key) { return obj.contains(key) ? &obj.at(key) : nullptr; }

double number(const json& j, const std::string& path) {
    if (!j.is_number()) schema(path, "expected a number");
    return j.get<double>();
}

int integer(const json& j, const std::string& path) {
    if (!j.is_number_integer()) schema(path, "expected an integer");
    return j.get<int>();
}

std::vector<double> numbers(const json& j, const std::string& path) {
    if (!j.is_array()) schema(path, "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t k = 0; k < j.size(); ++k) out.push_back(number(j[k], path + "[" + std::to_string(k) + "]"));
    return out;
}

Vec vector_of(const json& j, const std::string& path) {
    const auto v = numbers(j, path);
    return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<int> integers(const json& j, const std::string& path) {
    if (!j.is_array()) schema(path, "expected an array of integers");
    std::vector<int> out;
    for (std::size_t k = 0; k < j.size(); ++k) out.push_back(integer(j[k], path + "[" + std::to_string(k) + "]"));
    return out;
}

json vector_to_json(const Vec& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

std::string text(const json& j, const std::string& path) {
    if (!j.is_string()) schema(path, "expected a string");
    return j.get<std::string>();
}

}  // namespace

json matrix_to_json(const Mat& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
        rows.push_back(row);
    }
    return rows;
}

Mat matrix_from_json(const json& j, const std::string& key) {
    if (!j.is_array()) schema(key, "expected a matrix (array of rows)");
    if (j.empty()) return Mat(0, 0);
    const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
    Mat m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t i = 0; i < j.size(); ++i) {
        const std::string rp = key + "[" + std::to_string(i) + "]";
        if (!j[i].is_array()) schema(rp, "expected a row (array of numbers)");
        if (j[i].size() != cols) schema(rp, "rows have different lengths");
        for (std::size_t k = 0; k < cols; ++k)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
                number(j[i][k], rp + "[" + std::to_string(k) + "]");
    }
    return m;
}

const char* gamma_mode_name(GammaMode m) { return m == GammaMode::kEnumerate ? "enumerate" : "worst_case"; }
const char* stay_reset_name(StayReset s) { return s == StayReset::kPerEpisode ? "per_episode" : "cumulative"; }

ScenarioConfig parse(const json& doc) {
    ScenarioConfig cfg;
    only_keys(doc, "", {"plant", "graph", "design", "trigger", "sim", "notes"});

    const json& pl = need(doc, "", "plant");
    only_keys(pl, "plant", {"A", "B", "C", "partitions", "Q", "R"});
    cfg.a = matrix_from_json(need(pl, "plant", "A"), "plant.A");
    cfg.b = matrix_from_json(need(pl, "plant", "B"), "plant.B");
    cfg.c = matrix_from_json(need(pl, "plant", "C"), "plant.C");
    cfg.q = matrix_from_json(need(pl, "plant", "Q"), "plant.Q");
    cfg.r = matrix_from_json(need(pl, "plant", "R"), "plant.R");
    const json& parts = need(pl, "plant", "partitions");
    only_keys(parts, "plant.partitions", {"inputs", "outputs"});
    cfg.input_sizes = integers(need(parts, "plant.partitions", "inputs"), "plant.partitions.inputs");
    cfg.output_sizes = integers(need(parts, "plant.partitions", "outputs"), "plant.partitions.outputs");
    try {
        PlantModel(cfg.a, cfg.b, cfg.c, cfg.input_sizes, cfg.output_sizes, cfg.q, cfg.r);
    } catch (const Error& e) {
        schema("plant", e.what());
    }
    const int n = static_cast<int>(cfg.a.rows());
    const int agents = static_cast<int>(cfg.input_sizes.size());

    const json& gr = need(doc, "", "graph");
    only_keys(gr, "graph", {"adjacency"});
    cfg.adjacency = matrix_from_json(need(gr, "graph", "adjacency"), "graph.adjacency");
    try {
        CommGraph g(cfg.adjacency);
        if (g.n_agents() != agents)
            schema("graph.adjacency", "has " + std::to_string(g.n_agents()) + " agents, plant partitions have " +
                                          std::to_string(agents));
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::kSchema) throw;
        schema("graph.adjacency", e.what());
    }

    const json& de = need(doc, "", "design");
    only_keys(de, "design", {"controller_poles", "observer_poles_global", "observer_poles_local", "eta", "weights",
                             "alpha_grid", "floor_margin"});
    cfg.gains.controller_poles = numbers(need(de, "design", "controller_poles"), "design.controller_poles");
    cfg.gains.observer_poles_global = numbers(need(de, "design", "observer_poles_global"), "design.observer_poles_global");
    const json& loc = need(de, "design", "observer_poles_local");
    if (!loc.is_array() || static_cast<int>(loc.size()) != agents)
        schema("design.observer_poles_local", "expected one pole list per agent (" + std::to_string(agents) + ")");
    for (std::size_t i = 0; i < loc.size(); ++i)
        cfg.gains.observer_poles_local.push_back(numbers(loc[i], "design.observer_poles_local[" + std::to_string(i) + "]"));
    if (const json* eta = maybe(de, "eta")) {
        if (eta->is_string()) {
            if (eta->get<std::string>() != "auto") schema("design.eta", "expected a number or \"auto\"");
        } else {
            cfg.gains.eta = number(*eta, "design.eta");
            if (*cfg.gains.eta < 0.0) schema("design.eta", "must be non-negative");
        }
    }
    if (const json* fm = maybe(de, "floor_margin")) cfg.gains.floor_margin = number(*fm, "design.floor_margin");
    cfg.weights.wi.assign(agents, 1.0);
    if (const json* w = maybe(de, "weights")) {
        only_keys(*w, "design.weights", {"wx", "we", "wi"});
        if (const json* x = maybe(*w, "wx")) cfg.weights.wx = number(*x, "design.weights.wx");
        if (const json* x = maybe(*w, "we")) cfg.weights.we = number(*x, "design.weights.we");
        if (const json* x = maybe(*w, "wi")) {
            cfg.weights.wi = numbers(*x, "design.weights.wi");
            if (static_cast<int>(cfg.weights.wi.size()) != agents)
                schema("design.weights.wi", "expected one weight per agent");
        }
        if (cfg.weights.wx < 0 || cfg.weights.we < 0) schema("design.weights", "weights must be non-negative");
        for (double v : cfg.weights.wi)
            if (v < 0) schema("design.weights.wi", "weights must be non-negative");
    }
    cfg.alpha_grid = lmi::default_alpha_grid();
    if (const json* g = maybe(de, "alpha_grid")) {
        cfg.alpha_grid = numbers(*g, "design.alpha_grid");
        if (cfg.alpha_grid.empty()) schema("design.alpha_grid", "must not be empty");
        for (double a : cfg.alpha_grid)
            if (!(a > 0.0)) schema("design.alpha_grid", "entries must be positive");
    }

    if (const json* tr = maybe(doc, "trigger")) {
        only_keys(*tr, "trigger", {"f_slope", "gamma_mode", "stay_integral_reset"});
        if (const json* x = maybe(*tr, "f_slope")) {
            cfg.f_slope = number(*x, "trigger.f_slope");
            if (!(cfg.f_slope > 0.0)) schema("trigger.f_slope", "must be positive");
        }
        if (const json* x = maybe(*tr, "gamma_mode")) {
            const auto s = text(*x, "trigger.gamma_mode");
            if (s == "enumerate") cfg.gamma_mode = GammaMode::kEnumerate;
            else if (s == "worst_case") cfg.gamma_mode = GammaMode::kWorstCase;
            else schema("trigger.gamma_mode", "expected \"enumerate\" or \"worst_case\"");
        }
        if (const json* x = maybe(*tr, "stay_integral_reset")) {
            const auto s = text(*x, "trigger.stay_integral_reset");
            if (s == "cumulative") cfg.stay_reset = StayReset::kCumulative;
            else if (s == "per_episode") cfg.stay_reset = StayReset::kPerEpisode;
            else schema("trigger.stay_integral_reset", "expected \"cumulative\" or \"per_episode\"");
        }
    }

    cfg.sim.x0 = Vec::Zero(n);
    if (const json* si = maybe(doc, "sim")) {
        only_keys(*si, "sim", {"dt", "duration", "x0", "xhat0", "seed", "disturbance_mode", "jumps"});
        if (const json* x = maybe(*si, "dt")) cfg.sim.dt = number(*x, "sim.dt");
        if (const json* x = maybe(*si, "duration")) cfg.sim.duration = number(*x, "sim.duration");
        if (!(cfg.sim.dt > 0.0)) schema("sim.dt", "must be positive");
        if (!(cfg.sim.duration >= cfg.sim.dt)) schema("sim.duration", "must be at least dt");
        if (const json* x = maybe(*si, "x0")) {
            cfg.sim.x0 = vector_of(*x, "sim.x0");
            if (cfg.sim.x0.size() != n) schema("sim.x0", "expected " + std::to_string(n) + " entries");
        }
        if (const json* x = maybe(*si, "xhat0")) {
            if (!x->is_array()) schema("sim.xhat0", "expected an array of estimates");
            for (std::size_t i = 0; i < x->size(); ++i) {
                const std::string p = "sim.xhat0[" + std::to_string(i) + "]";
                cfg.sim.xhat0.push_back(vector_of((*x)[i], p));
                if (cfg.sim.xhat0.back().size() != n) schema(p, "expected " + std::to_string(n) + " entries");
            }
            if (!cfg.sim.xhat0.empty() && static_cast<int>(cfg.sim.xhat0.size()) != agents)
                schema("sim.xhat0", "expected one estimate per agent");
        }
        if (const json* x = maybe(*si, "seed")) {
            if (!x->is_number_integer() || x->get<std::int64_t>() < 0) schema("sim.seed", "expected a non-negative integer");
            cfg.sim.seed = x->get<std::uint64_t>();
        }
        if (const json* x = maybe(*si, "disturbance_mode")) {
            const auto s = text(*x, "sim.disturbance_mode");
            if (s == "interior") cfg.sim.disturbance = DisturbanceMode::kInterior;
            else if (s == "boundary") cfg.sim.disturbance = DisturbanceMode::kBoundary;
            else schema("sim.disturbance_mode", "expected \"interior\" or \"boundary\"");
        }
        if (const json* x = maybe(*si, "jumps")) {
            if (!x->is_array()) schema("sim.jumps", "expected an array");
            for (std::size_t k = 0; k < x->size(); ++k) {
                const std::string p = "sim.jumps[" + std::to_string(k) + "]";
                only_keys((*x)[k], p, {"t", "delta"});
                Jump j;
                j.t = number(need((*x)[k], p, "t"), p + ".t");
                j.delta = vector_of(need((*x)[k], p, "delta"), p + ".delta");
                if (j.delta.size() != n) schema(p + ".delta", "expected " + std::to_string(n) + " entries");
                if (j.t < 0.0 || j.t > cfg.sim.duration) schema(p + ".t", "outside the simulation horizon");
                cfg.sim.jumps.push_back(j);
            }
        }
    }
    if (const json* x = maybe(doc, "notes")) cfg.notes = *x;
    return cfg;
}

ScenarioConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::kIo, "cannot open " + path);
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        fail(ErrorKind::kSchema, path + ": malformed JSON: " + e.what());
    }
    return parse(doc);
}

namespace {

json design_section(const ScenarioConfig& cfg) {
    json loc = json::array();
    for (const auto& p : cfg.gains.observer_poles_local) loc.push_back(p);
    json d = {{"controller_poles", cfg.gains.controller_poles},
              {"observer_poles_global", cfg.gains.observer_poles_global},
              {"observer_poles_local", loc},
              {"floor_margin", cfg.gains.floor_margin},
              {"weights", {{"wx", cfg.weights.wx}, {"we", cfg.weights.we}, {"wi", cfg.weights.wi}}},
              {"alpha_grid", cfg.alpha_grid}};
    if (cfg.gains.eta) d["eta"] = *cfg.gains.eta;
    else d["eta"] = "auto";
    return d;
}

}  // namespace

json to_json(const ScenarioConfig& cfg) {
    json doc;
    doc["plant"] = {{"A", matrix_to_json(cfg.a)},
                    {"B", matrix_to_json(cfg.b)},
                    {"C", matrix_to_json(cfg.c)},
                    {"partitions", {{"inputs", cfg.input_sizes}, {"outputs", cfg.output_sizes}}},
                    {"Q", matrix_to_json(cfg.q)},
                    {"R", matrix_to_json(cfg.r)}};
    doc["graph"] = {{"adjacency", matrix_to_json(cfg.adjacency)}};
    doc["design"] = design_section(cfg);
    doc["trigger"] = {{"f_slope", cfg.f_slope},
                      {"gamma_mode", gamma_mode_name(cfg.gamma_mode)},
                      {"stay_integral_reset", stay_reset_name(cfg.stay_reset)}};
    json xhat = json::array();
    for (const auto& v : cfg.sim.xhat0) xhat.push_back(vector_to_json(v));
    json jumps = json::array();
    for (const auto& j : cfg.sim.jumps) jumps.push_back({{"t", j.t}, {"delta", vector_to_json(j.delta)}});
    doc["sim"] = {{"dt", cfg.sim.dt},
                  {"duration", cfg.sim.duration},
                  {"x0", vector_to_json(cfg.sim.x0)},
                  {"xhat0", xhat},
                  {"seed", cfg.sim.seed},
                  {"disturbance_mode", cfg.sim.disturbance == DisturbanceMode::kBoundary ? "boundary" : "interior"},
                  {"jumps", jumps}};
    if (!cfg.notes.is_null()) doc["notes"] = cfg.notes;
    return doc;
}

std::string hash(const ScenarioConfig& cfg) {
    const json full = to_json(cfg);
    const json part = {{"plant", full["plant"]},
                       {"graph", full["graph"]},
                       {"design", full["design"]},
                       {"gamma_mode", full["trigger"]["gamma_mode"]}};
    const std::string s = part.dump();
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// ---------------------------------------------------------------------------

json design_to_json(const DesignArtifact& d) {
    const LyapunovDesign& ly = d.lyapunov;
    json doc;
    doc["tool_version"] = d.tool_version;
    doc["config_hash"] = d.config_hash;
    doc["seed"] = d.seed;

    json k_blocks = json::array(), l_local = json::array();
    for (const auto& m : d.gains.k_blocks) k_blocks.push_back(matrix_to_json(m));
    for (const auto& m : d.gains.l_local) l_local.push_back(matrix_to_json(m));
    doc["gains"] = {{"K", k_blocks}, {"L", matrix_to_json(d.gains.l_global)}, {"L_local", l_local}, {"eta", d.gains.eta}};

    json ys = json::array();
    for (const auto& y : ly.y) ys.push_back(matrix_to_json(y));
    doc["lyapunov"] = {{"P", matrix_to_json(ly.p)},
                       {"Pbar", matrix_to_json(ly.p_bar)},
                       {"Y", ys},
                       {"alpha1", ly.alpha1},
                       {"alpha3", ly.alpha3},
                       {"gamma_full", ly.gamma_full},
                       {"log_det_P", ly.log_det_p},
                       {"log_det_Pbar", ly.log_det_p_bar},
                       {"log_det_Y", ly.log_det_y},
                       {"objective", ly.objective}};
    doc["margins"] = {{"state", ly.margin_state}, {"full_error", ly.margin_bar}, {"trigger", ly.margin_trigger}};
    doc["alpha_grid"] = d.alpha_grid;
    doc["tolerances"] = {{"eps_pd", "1e-8 * (1 + ||M||_2)"},
                         {"gap_tol", d.solver.gap_tol},
                         {"mu", d.solver.mu},
                         {"box", d.solver.box},
                         {"margin_factor", d.solver.margin_factor},
                         {"gamma_tol", d.gamma_options.tol},
                         {"gamma_lo", d.gamma_options.lo},
                         {"gamma_hi", d.gamma_options.hi},
                         {"gamma_cap", d.gamma_options.hard_cap}};

    json entries = json::array();
    for (const auto& e : d.gamma_table.entries) {
        json agents = json::array();
        for (int i = 0; i < 32; ++i)
            if (e.config.connected >> i & 1u) agents.push_back(i + 1);
        entries.push_back({{"mask", e.config.connected},
                           {"agents", agents},
                           {"laplacian", matrix_to_json(e.config.laplacian)},
                           {"gamma", e.gamma},
                           {"alpha", e.alpha},
                           {"evaluated", e.evaluated}});
    }
    doc["gamma_table"] = {
        {"mode", gamma_mode_name(d.gamma_table.mode)}, {"worst_case", d.gamma_table.worst_case}, {"entries", entries}};

    json cells = json::array();
    for (const auto& c : d.cells)
        cells.push_back({{"alpha1", c.alpha1},
                         {"alpha3", c.alpha3},
                         {"feasible", c.feasible},
                         {"objective", c.objective},
                         {"note", c.note}});
    doc["cells"] = cells;
    return doc;
}

DesignArtifact design_from_json(const json& doc) {
    DesignArtifact d;
    if (!doc.is_object()) schema("design", "expected an object");
    d.tool_version = text(need(doc, "", "tool_version"), "tool_version");
    d.config_hash = text(need(doc, "", "config_hash"), "config_hash");
    if (const json* s = maybe(doc, "seed")) d.seed = s->get<std::uint64_t>();

    const json& g = need(doc, "", "gains");
    const json& kb = need(g, "gains", "K");
    if (!kb.is_array()) schema("gains.K", "expected a list of matrices");
    for (std::size_t i = 0; i < kb.size(); ++i)
        d.gains.k_blocks.push_back(matrix_from_json(kb[i], "gains.K[" + std::to_string(i) + "]"));
    if (!d.gains.k_blocks.empty()) {
        Eigen::Index rows = 0;
        for (const auto& m : d.gains.k_blocks) rows += m.rows();
        d.gains.k = Mat(rows, d.gains.k_blocks.front().cols());
        Eigen::Index r = 0;
        for (const auto& m : d.gains.k_blocks) {
            if (m.cols() != d.gains.k.cols()) schema("gains.K", "blocks have different widths");
            d.gains.k.middleRows(r, m.rows()) = m;
            r += m.rows();
        }
    }
    d.gains.l_global = matrix_from_json(need(g, "gains", "L"), "gains.L");
    const json& ll = need(g, "gains", "L_local");
    if (!ll.is_array()) schema("gains.L_local", "expected a list of matrices");
    for (std::size_t i = 0; i < ll.size(); ++i)
        d.gains.l_local.push_back(matrix_from_json(ll[i], "gains.L_local[" + std::to_string(i) + "]"));
    d.gains.eta = number(need(g, "gains", "eta"), "gains.eta");

    const json& ly = need(doc, "", "lyapunov");
    d.lyapunov.p = matrix_from_json(need(ly, "lyapunov", "P"), "lyapunov.P");
    d.lyapunov.p_bar = matrix_from_json(need(ly, "lyapunov", "Pbar"), "lyapunov.Pbar");
    const json& ys = need(ly, "lyapunov", "Y");
    if (!ys.is_array()) schema("lyapunov.Y", "expected a list of matrices");
    for (std::size_t i = 0; i < ys.size(); ++i)
        d.lyapunov.y.push_back(matrix_from_json(ys[i], "lyapunov.Y[" + std::to_string(i) + "]"));
    d.lyapunov.alpha1 = number(need(ly, "lyapunov", "alpha1"), "lyapunov.alpha1");
    d.lyapunov.alpha3 = number(need(ly, "lyapunov", "alpha3"), "lyapunov.alpha3");
    d.lyapunov.gamma_full = number(need(ly, "lyapunov", "gamma_full"), "lyapunov.gamma_full");
    if (const json* x = maybe(ly, "log_det_P")) d.lyapunov.log_det_p = number(*x, "lyapunov.log_det_P");
    if (const json* x = maybe(ly, "log_det_Pbar")) d.lyapunov.log_det_p_bar = number(*x, "lyapunov.log_det_Pbar");
    if (const json* x = maybe(ly, "log_det_Y")) d.lyapunov.log_det_y = numbers(*x, "lyapunov.log_det_Y");
    if (const json* x = maybe(ly, "objective")) d.lyapunov.objective = number(*x, "lyapunov.objective");
    if (const json* m = maybe(doc, "margins")) {
        if (const json* x = maybe(*m, "state")) d.lyapunov.margin_state = number(*x, "margins.state");
        if (const json* x = maybe(*m, "full_error")) d.lyapunov.margin_bar = number(*x, "margins.full_error");
        if (const json* x = maybe(*m, "trigger")) d.lyapunov.margin_trigger = numbers(*x, "margins.trigger");
    }
    if (const json* x = maybe(doc, "alpha_grid")) d.alpha_grid = numbers(*x, "alpha_grid");
    if (const json* t = maybe(doc, "tolerances")) {
        if (const json* x = maybe(*t, "gap_tol")) d.solver.gap_tol = number(*x, "tolerances.gap_tol");
        if (const json* x = maybe(*t, "mu")) d.solver.mu = number(*x, "tolerances.mu");
        if (const json* x = maybe(*t, "box")) d.solver.box = number(*x, "tolerances.box");
        if (const json* x = maybe(*t, "margin_factor")) d.solver.margin_factor = number(*x, "tolerances.margin_factor");
        if (const json* x = maybe(*t, "gamma_tol")) d.gamma_options.tol = number(*x, "tolerances.gamma_tol");
        if (const json* x = maybe(*t, "gamma_lo")) d.gamma_options.lo = number(*x, "tolerances.gamma_lo");
        if (const json* x = maybe(*t, "gamma_hi")) d.gamma_options.hi = number(*x, "tolerances.gamma_hi");
        if (const json* x = maybe(*t, "gamma_cap")) d.gamma_options.hard_cap = number(*x, "tolerances.gamma_cap");
    }

    const json& gt = need(doc, "", "gamma_table");
    const auto mode = text(need(gt, "gamma_table", "mode"), "gamma_table.mode");
    if (mode == "enumerate") d.gamma_table.mode = GammaMode::kEnumerate;
    else if (mode == "worst_case") d.gamma_table.mode = GammaMode::kWorstCase;
    else schema("gamma_table.mode", "expected \"enumerate\" or \"worst_case\"");
    d.gamma_table.worst_case = number(need(gt, "gamma_table", "worst_case"), "gamma_table.worst_case");
    const json& es = need(gt, "gamma_table", "entries");
    if (!es.is_array()) schema("gamma_table.entries", "expected an array");
    for (std::size_t k = 0; k < es.size(); ++k) {
        const std::string p = "gamma_table.entries[" + std::to_string(k) + "]";
        GammaEntry e;
        const json& mask = need(es[k], p, "mask");
        if (!mask.is_number_integer() || mask.get<std::int64_t>() < 0) schema(p + ".mask", "expected a non-negative integer");
        e.config.connected = mask.get<AgentMask>();
        e.config.laplacian = matrix_from_json(need(es[k], p, "laplacian"), p + ".laplacian");
        e.gamma = number(need(es[k], p, "gamma"), p + ".gamma");
        e.alpha = number(need(es[k], p, "alpha"), p + ".alpha");
        const json& ev = need(es[k], p, "evaluated");
        if (!ev.is_boolean()) schema(p + ".evaluated", "expected a boolean");
        e.evaluated = ev.get<bool>();
        d.gamma_table.entries.push_back(e);
    }
    if (const json* cs = maybe(doc, "cells"); cs && cs->is_array()) {
        for (const auto& c : *cs)
            d.cells.push_back({c.value("alpha1", 0.0), c.value("alpha3", 0.0), c.value("feasible", false),
                               c.value("objective", 0.0), c.value("note", std::string())});
    }
    return d;
}

DesignArtifact load_design(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::kIo, "cannot open " + path);
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        fail(ErrorKind::kSchema, path + ": malformed JSON: " + e.what());
    }
    return design_from_json(doc);
}

void save_json(const json& doc, const std::string& path) {
    std::ofstream out(path);
    if (!out) fail(ErrorKind::kIo, "cannot write " + path);
    out << doc.dump(2) << "\n";
    if (!out) fail(ErrorKind::kIo, "write failed for " + path);
}

}  // namespace etcon::config
