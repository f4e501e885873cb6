#include "etcon/lmi.hpp"

#include "etcon/error.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace etcon {

Mat AffineSym::eval(const Vec& x) const {
    Mat out = f0;
    for (std::size_t j = 0; j < f.size(); ++j)
        if (active[j] && x(static_cast<Eigen::Index>(j)) != 0.0) out += x(static_cast<Eigen::Index>(j)) * f[j];
    return out;
}

int SymLayout::add_block(int size) {
    require(size >= 1, ErrorKind::kStructural, "SymLayout: block size must be positive");
    sizes_.push_back(size);
    offsets_.push_back(n_vars_);
    n_vars_ += size * (size + 1) / 2;
    return n_blocks() - 1;
}

std::vector<Mat> SymLayout::unpack(const Vec& x) const {
    require(x.size() >= n_vars_, ErrorKind::kStructural, "SymLayout: vector too short");
    std::vector<Mat> out;
    for (int b = 0; b < n_blocks(); ++b) {
        const int s = sizes_[b];
        Mat m(s, s);
        int k = offsets_[b];
        for (int r = 0; r < s; ++r)
            for (int c = r; c < s; ++c) m(r, c) = m(c, r) = x(k++);
        out.push_back(std::move(m));
    }
    return out;
}

Vec SymLayout::pack(const std::vector<Mat>& blocks) const {
    require(static_cast<int>(blocks.size()) == n_blocks(), ErrorKind::kStructural, "SymLayout: wrong block count");
    Vec x(n_vars_);
    for (int b = 0; b < n_blocks(); ++b) {
        const int s = sizes_[b];
        require(blocks[b].rows() == s && blocks[b].cols() == s, ErrorKind::kStructural,
                "SymLayout: block has the wrong size");
        int k = offsets_[b];
        for (int r = 0; r < s; ++r)
            for (int c = r; c < s; ++c) x(k++) = 0.5 * (blocks[b](r, c) + blocks[b](c, r));
    }
    return x;
}

AffineSym linearize(const SymLayout& layout, const BlockFn& fn) {
    AffineSym out;
    Vec x = Vec::Zero(layout.n_vars());
    out.f0 = num::symmetrize(fn(layout.unpack(x)));
    out.f.resize(layout.n_vars());
    out.active.assign(layout.n_vars(), false);
    for (int j = 0; j < layout.n_vars(); ++j) {
        x(j) = 1.0;
        Mat fj = num::symmetrize(fn(layout.unpack(x))) - out.f0;
        x(j) = 0.0;
        require(fj.rows() == out.f0.rows(), ErrorKind::kStructural, "linearize: output size changes with input");
        out.active[j] = fj.cwiseAbs().maxCoeff() > 0.0;
        out.f[j] = std::move(fj);
    }
    return out;
}

namespace lmi {

double eps_pd(const Mat& m) { return num::pd_tolerance(m); }

bool satisfies(const Mat& m, bool strict) {
    const double margin = num::min_eig_margin(m);
    return strict ? margin >= eps_pd(m) : margin >= -eps_pd(m);
}

namespace {

// One log-det term of a barrier objective over the extended variable y.
struct Term {
    AffineSym map;
    double weight = 1.0;
};

bool cholesky(const Mat& m, Eigen::LLT<Mat>& llt) {
    if (!m.allFinite()) return false;
    llt.compute(m);
    return llt.info() == Eigen::Success;
}

double log_det_chol(const Eigen::LLT<Mat>& llt) {
    return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

// phi(y) = t c'y - sum_k w_k log det G_k(y); +inf outside the domain.
double barrier_value(const std::vector<Term>& terms, const Vec& c, double t, const Vec& y) {
    double v = t * c.dot(y);
    Eigen::LLT<Mat> llt;
    for (const Term& term : terms) {
        if (!cholesky(term.map.eval(y), llt)) return std::numeric_limits<double>::infinity();
        v -= term.weight * log_det_chol(llt);
    }
    return v;
}

// Damped Newton centering. Returns the number of steps taken.
int center(const std::vector<Term>& terms, const Vec& c, double t, Vec& y, int max_steps,
           const std::function<bool(const Vec&)>& stop_early) {
    const auto nv = y.size();
    Eigen::LLT<Mat> llt;
    int steps = 0;
    double value = barrier_value(terms, c, t, y);
    for (; steps < max_steps; ++steps) {
        Vec g = t * c;
        Mat h = Mat::Zero(nv, nv);
        for (const Term& term : terms) {
            const bool ok = cholesky(term.map.eval(y), llt);
            require(ok, ErrorKind::kInfeasible, "barrier iterate left the domain");
            const Mat l = llt.matrixL();
            const int s = term.map.size();
            std::vector<Eigen::Index> idx;
            for (Eigen::Index j = 0; j < nv; ++j)
                if (term.map.active[j]) idx.push_back(j);
            Mat flat(static_cast<Eigen::Index>(s) * s, static_cast<Eigen::Index>(idx.size()));
            for (std::size_t a = 0; a < idx.size(); ++a) {
                const Mat tmp = l.triangularView<Eigen::Lower>().solve(term.map.f[idx[a]]);
                const Mat gj = l.triangularView<Eigen::Lower>().solve(tmp.transpose());
                g(idx[a]) -= term.weight * gj.trace();
                flat.col(static_cast<Eigen::Index>(a)) = Eigen::Map<const Vec>(gj.data(), gj.size());
            }
            const Mat hh = term.weight * (flat.transpose() * flat);
            for (std::size_t a = 0; a < idx.size(); ++a)
                for (std::size_t b = 0; b < idx.size(); ++b)
                    h(idx[a], idx[b]) += hh(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
        }
        // Jacobi-scale the Newton system; variable scales differ by many orders.
        Vec d = h.diagonal().cwiseAbs().cwiseMax(1e-300).cwiseSqrt().cwiseInverse();
        const Mat hs = d.asDiagonal() * h * d.asDiagonal();
        Eigen::LDLT<Mat> ldlt(hs);
        Vec step = -(d.asDiagonal() * ldlt.solve(d.asDiagonal() * g));
        if (!step.allFinite() || g.dot(step) > 0.0) {
            ldlt.compute(hs + 1e-12 * Mat::Identity(nv, nv));
            step = -(d.asDiagonal() * ldlt.solve(d.asDiagonal() * g));
        }
        const double decrement = -g.dot(step);
        if (!(decrement > 2e-10)) break;
        // Round-off in phi limits how small a decrease can be detected.
        const double noise = 1e-13 * std::abs(value);
        if (decrement < 10.0 * noise) break;
        double alpha = 1.0;
        double trial = barrier_value(terms, c, t, y + step);
        while (!(trial <= value - 0.25 * alpha * decrement + noise)) {
            alpha *= 0.5;
            if (alpha < 1e-10) return steps;
            trial = barrier_value(terms, c, t, y + alpha * step);
        }
        y += alpha * step;
        value = trial;
        if (stop_early && stop_early(y)) return steps + 1;
    }
    return steps;
}

// Appends `extra` zero variables to the map; the last one gets coefficient s_coeff * I.
AffineSym extend(const AffineSym& map, int extra, double s_coeff) {
    AffineSym out = map;
    const int s = map.size();
    for (int k = 0; k < extra; ++k) {
        out.f.push_back(Mat::Zero(s, s));
        out.active.push_back(false);
    }
    if (extra > 0 && s_coeff != 0.0) {
        out.f.back() = s_coeff * Mat::Identity(s, s);
        out.active.back() = true;
    }
    return out;
}

AffineSym scaled_shifted(const AffineSym& map, double scale, double shift) {
    AffineSym out = map;
    out.f0 = scale * (map.f0 - shift * Mat::Identity(map.size(), map.size()));
    for (auto& fj : out.f) fj *= scale;
    return out;
}

// F - eps (1 + tr F) I. For F >= 0, tr F >= ||F||_2, so this is an affine
// sufficient condition for min_eig(F) >= eps (1 + ||F||_2).
AffineSym trace_margin(const AffineSym& map, double eps) {
    AffineSym out = map;
    const Mat id = Mat::Identity(map.size(), map.size());
    out.f0 = map.f0 - eps * (1.0 + map.f0.trace()) * id;
    for (std::size_t j = 0; j < map.f.size(); ++j)
        if (map.active[j]) out.f[j] = map.f[j] - eps * map.f[j].trace() * id;
    return out;
}

double map_scale(const AffineSym& map) {
    double m = map.f0.norm();
    for (std::size_t j = 0; j < map.f.size(); ++j)
        if (map.active[j]) m = std::max(m, map.f[j].norm());
    return m > 0.0 ? 1.0 / m : 1.0;
}

AffineSym block_map(const SymLayout& layout, int b, double constant, double sign) {
    return linearize(layout, [&](const std::vector<Mat>& blocks) {
        const auto s = blocks[b].rows();
        return Mat(constant * Mat::Identity(s, s) + sign * blocks[b]);
    });
}

struct Prepared {
    std::vector<AffineSym> maps;  // scaled and shifted so the requirement is map >= 0
    std::vector<AffineSym> boxes;
    int barrier_dim = 0;
};

Prepared prepare(const SymLayout& layout, const std::vector<LmiConstraint>& constraints, double margin_factor,
                 double box) {
    Prepared p;
    for (const auto& con : constraints) {
        require(static_cast<int>(con.map.f.size()) == layout.n_vars(), ErrorKind::kStructural,
                "constraint " + con.name + " has the wrong number of variables");
        const AffineSym target = con.strict ? trace_margin(con.map, margin_factor * 1e-8) : con.map;
        p.maps.push_back(scaled_shifted(target, map_scale(con.map), 0.0));
        p.barrier_dim += con.map.size();
    }
    for (int b = 0; b < layout.n_blocks(); ++b) {
        p.boxes.push_back(scaled_shifted(block_map(layout, b, box, -1.0), 1.0 / box, 0.0));
        p.boxes.push_back(scaled_shifted(block_map(layout, b, box, 1.0), 1.0 / box, 0.0));
        p.barrier_dim += 2 * layout.block_size(b);
    }
    return p;
}

Vec identity_point(const SymLayout& layout) {
    std::vector<Mat> blocks;
    for (int b = 0; b < layout.n_blocks(); ++b) blocks.push_back(Mat::Identity(layout.block_size(b), layout.block_size(b)));
    return layout.pack(blocks);
}

double min_margin(const std::vector<AffineSym>& maps, const Vec& x) {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& map : maps) m = std::min(m, num::min_eig_margin(map.eval(x)));
    return m;
}

// Phase I: maximize s subject to maps(x) >= s I. Returns true with x strictly
// inside every map, false when the optimal s is certified negative.
bool phase_one(const Prepared& prep, Vec& x, const SolverOptions& opt, int& steps, std::string& why) {
    const int nv = static_cast<int>(x.size());
    const double s0 = min_margin(prep.maps, x);
    if (s0 > 0.0) return true;

    std::vector<Term> terms;
    for (const auto& map : prep.maps) terms.push_back({extend(map, 1, -1.0), 1.0});
    for (const auto& box : prep.boxes) terms.push_back({extend(box, 1, 0.0), 1.0});
    AffineSym cap;
    cap.f0 = Mat::Constant(1, 1, 1.0);
    cap.f.assign(nv + 1, Mat::Zero(1, 1));
    cap.active.assign(nv + 1, false);
    cap.f.back()(0, 0) = -1.0;
    cap.active.back() = true;
    terms.push_back({cap, 1.0});
    const double m = prep.barrier_dim + 1.0;

    Vec y(nv + 1);
    y.head(nv) = x;
    y(nv) = s0 - 1.0;
    Vec c = Vec::Zero(nv + 1);
    c(nv) = -1.0;
    auto positive = [nv](const Vec& v) { return v(nv) > 0.0; };

    double t = 1.0;
    for (int outer = 0; outer < opt.max_outer; ++outer) {
        steps += center(terms, c, t, y, opt.max_newton, positive);
        if (y(nv) > 0.0) {
            x = y.head(nv);
            return true;
        }
        if (y(nv) + m / t < 0.0) {
            std::ostringstream os;
            os << "infeasible: best margin is below " << y(nv) + m / t;
            why = os.str();
            return false;
        }
        t *= opt.mu;
    }
    why = "no feasible point found within the iteration limit";
    return false;
}

SolveResult finish(const SymLayout& layout, const std::vector<LmiConstraint>& constraints, const Vec& x,
                   int steps) {
    SolveResult r;
    r.blocks = layout.unpack(x);
    r.feasible = true;
    r.newton_steps = steps;
    for (const auto& con : constraints) {
        const Mat m = con.map.eval(x);
        r.margins.push_back(num::min_eig_margin(m));
        if (!satisfies(m, con.strict)) {
            r.feasible = false;
            std::ostringstream os;
            os << con.name << " margin " << r.margins.back() << " misses tolerance " << eps_pd(m) << "; ";
            r.diagnostic += os.str();
        }
    }
    return r;
}

SolveResult barrier_solve(const SymLayout& layout, const std::vector<LmiConstraint>& constraints,
                          const std::vector<double>* weights, const SolverOptions& opt) {
    Vec x = identity_point(layout);
    double factor = opt.margin_factor;
    int steps = 0;
    for (int round = 0; round < 3; ++round) {
        const Prepared prep = prepare(layout, constraints, factor, opt.box);
        std::string why;
        if (!phase_one(prep, x, opt, steps, why)) {
            SolveResult r;
            r.newton_steps = steps;
            r.diagnostic = why;
            return r;
        }

        std::vector<Term> terms;
        for (const auto& map : prep.maps) terms.push_back({map, 1.0});
        for (const auto& box : prep.boxes) terms.push_back({box, 1.0});
        std::vector<AffineSym> objective;
        std::vector<double> omega;
        if (weights) {
            for (int b = 0; b < layout.n_blocks(); ++b) {
                if ((*weights)[b] == 0.0) continue;
                objective.push_back(block_map(layout, b, 0.0, 1.0));
                omega.push_back((*weights)[b]);
            }
        }
        const std::size_t first_objective = terms.size();
        for (const auto& map : objective) terms.push_back({map, 0.0});
        const Vec c = Vec::Zero(x.size());

        double t = 1.0;
        for (int outer = 0; outer < opt.max_outer; ++outer) {
            for (std::size_t k = 0; k < omega.size(); ++k) terms[first_objective + k].weight = t * omega[k];
            steps += center(terms, c, 1.0, x, opt.max_newton, nullptr);
            if (objective.empty() || prep.barrier_dim / t < opt.gap_tol) break;
            t *= opt.mu;
        }

        SolveResult r = finish(layout, constraints, x, steps);
        if (weights) {
            for (int b = 0; b < layout.n_blocks(); ++b) {
                if ((*weights)[b] == 0.0) continue;
                Eigen::LLT<Mat> llt(r.blocks[b]);
                r.objective += (*weights)[b] * log_det_chol(llt);
            }
        }
        if (r.feasible) return r;
        factor *= 100.0;
        x = identity_point(layout);
    }
    SolveResult r = finish(layout, constraints, x, steps);
    r.feasible = false;
    return r;
}

SolveResult projection_solve(const SymLayout& layout, const std::vector<LmiConstraint>& constraints,
                             const SolverOptions& opt) {
    Vec x = identity_point(layout);
    const Prepared prep = prepare(layout, constraints, opt.margin_factor, opt.box);
    const int nv = layout.n_vars();
    // Least-squares projection onto {(F_k(x))_k : x} uses the Gram matrix of the maps.
    Mat gram = Mat::Zero(nv, nv);
    for (const auto& map : prep.maps)
        for (int i = 0; i < nv; ++i) {
            if (!map.active[i]) continue;
            for (int j = 0; j < nv; ++j)
                if (map.active[j]) gram(i, j) += map.f[i].cwiseProduct(map.f[j]).sum();
        }
    gram += 1e-12 * std::max(1.0, gram.diagonal().maxCoeff()) * Mat::Identity(nv, nv);
    const Eigen::LDLT<Mat> ldlt(gram);
    const double floor = 1e-6;
    for (int it = 0; it < opt.ap_max_iter; ++it) {
        if (min_margin(prep.maps, x) > 0.0) return finish(layout, constraints, x, it);
        Vec rhs = Vec::Zero(nv);
        for (const auto& map : prep.maps) {
            const Mat z = num::project_psd(map.eval(x), floor) - map.f0;
            for (int j = 0; j < nv; ++j)
                if (map.active[j]) rhs(j) += map.f[j].cwiseProduct(z).sum();
        }
        x = ldlt.solve(rhs);
    }
    SolveResult r = finish(layout, constraints, x, opt.ap_max_iter);
    r.feasible = false;
    r.diagnostic = "alternating projections hit the iteration cap; " + r.diagnostic;
    return r;
}

}  // namespace

SolveResult feasibility_solve(const SymLayout& layout, const std::vector<LmiConstraint>& constraints,
                              const SolverOptions& options) {
    if (options.method == LmiMethod::kAlternatingProjections) return projection_solve(layout, constraints, options);
    return barrier_solve(layout, constraints, nullptr, options);
}

SolveResult maxdet_solve(const SymLayout& layout, const std::vector<LmiConstraint>& constraints,
                         const std::vector<double>& weights, const SolverOptions& options) {
    require(static_cast<int>(weights.size()) == layout.n_blocks(), ErrorKind::kStructural,
            "maxdet_solve: one weight per block required");
    for (double w : weights) require(w >= 0.0, ErrorKind::kValidation, "maxdet_solve: weights must be nonnegative");
    return barrier_solve(layout, constraints, &weights, options);
}

// ---------------------------------------------------------------------------
// LMI assembly

Mat generic_qb(const Mat& a, const Mat& b1, const Mat& b2, const Mat& p, const Mat& d1, const Mat& d2, double gamma,
               double alpha) {
    const auto n = a.rows();
    require(a.cols() == n && p.rows() == n && p.cols() == n && b1.rows() == n && b2.rows() == n, ErrorKind::kStructural,
            "generic_qb: state dimension mismatch");
    require(d1.rows() == b1.cols() && d1.cols() == b1.cols() && d2.rows() == b2.cols() && d2.cols() == b2.cols(),
            ErrorKind::kStructural, "generic_qb: disturbance dimension mismatch");
    const auto k1 = b1.cols();
    const auto k2 = b2.cols();
    Mat m = Mat::Zero(n + k1 + k2, n + k1 + k2);
    m.topLeftCorner(n, n) = (gamma - 2.0 * alpha) * p - a.transpose() * p - p * a;
    m.block(0, n, n, k1) = -p * b1;
    m.block(0, n + k1, n, k2) = -p * b2;
    m.block(n, 0, k1, n) = -b1.transpose() * p;
    m.block(n + k1, 0, k2, n) = -b2.transpose() * p;
    m.block(n, n, k1, k1) = alpha * d1;
    m.block(n + k1, n + k1, k2, k2) = alpha * d2;
    return m;
}

Mat state_lmi(const Mat& a_bk, const Mat& e_mat, const Mat& q, const Mat& p, const Mat& p_bar, double alpha1) {
    const auto n = a_bk.rows();
    const auto ne = e_mat.cols();
    require(p.rows() == n && p_bar.rows() == ne && e_mat.rows() == n && q.rows() == n, ErrorKind::kStructural,
            "state_lmi: dimension mismatch");
    Mat m = Mat::Zero(n + ne + n, n + ne + n);
    m.topLeftCorner(n, n) = -2.0 * alpha1 * p - a_bk.transpose() * p - p * a_bk;
    m.block(0, n, n, ne) = p * e_mat;
    m.block(n, 0, ne, n) = e_mat.transpose() * p;
    m.block(0, n + ne, n, n) = -p;
    m.block(n + ne, 0, n, n) = -p;
    m.block(n, n, ne, ne) = alpha1 * p_bar;
    m.block(n + ne, n + ne, n, n) = alpha1 * q;
    return m;
}

Mat error_lmi(const Mat& a_e, const Mat& i_stack, const Mat& j, const Mat& q, const Mat& r, const Mat& p_bar,
              double gamma, double alpha2) {
    require(j.rows() == a_e.rows(), ErrorKind::kStructural, "error_lmi: J has the wrong row count");
    return generic_qb(a_e, i_stack, -j, p_bar, q, r, gamma, alpha2);
}

Mat bar_error_lmi(const BarSystem& bar, const Mat& q, const Mat& r, const Mat& p_bar, double gamma, double alpha3) {
    require(p_bar.rows() == bar.e_bar_basis.rows(), ErrorKind::kStructural, "bar_error_lmi: Pbar has the wrong size");
    const Mat x = bar.e_bar_basis.transpose() * p_bar * bar.e_bar_basis;
    return generic_qb(bar.a_bar, bar.w_bar, -bar.v_bar, x, q, r, gamma, alpha3);
}

Mat trigger_lmi(const Mat& a_bk, const Mat& e_mat, const Mat& c_i, const Mat& gamma_i, const Mat& q, const Mat& r,
                const Mat& p, const Mat& p_bar, const Mat& y_i) {
    const auto n = a_bk.rows();
    const auto ne = e_mat.cols();
    const auto m = r.rows();
    const auto mi = c_i.rows();
    require(p.rows() == n && p_bar.rows() == ne && c_i.cols() == n && gamma_i.rows() == mi && gamma_i.cols() == m &&
                y_i.rows() == mi && y_i.cols() == mi && q.rows() == n,
            ErrorKind::kStructural, "trigger_lmi: dimension mismatch");
    const auto d = n + ne + n + m;
    Mat out = Mat::Zero(d, d);
    out.topLeftCorner(n, n) = -a_bk.transpose() * p - p * a_bk - c_i.transpose() * y_i * c_i;
    out.block(0, n, n, ne) = p * e_mat;
    out.block(n, 0, ne, n) = e_mat.transpose() * p;
    out.block(0, n + ne, n, n) = -p;
    out.block(n + ne, 0, n, n) = -p;
    out.block(0, n + ne + n, n, m) = -c_i.transpose() * y_i * gamma_i;
    out.block(n + ne + n, 0, m, n) = -gamma_i.transpose() * y_i * c_i;
    out.block(n, n, ne, ne) = p_bar;
    out.block(n + ne, n + ne, n, n) = q;
    out.block(n + ne + n, n + ne + n, m, m) = r - gamma_i.transpose() * y_i * gamma_i;
    return out;
}

// ---------------------------------------------------------------------------
// Design

std::vector<double> default_alpha_grid() {
    std::vector<double> g;
    for (int k = 0; k <= 12; ++k) g.push_back(std::pow(10.0, -3.0 + 0.5 * k));
    return g;
}

namespace {

struct DesignLayout {
    SymLayout layout;
    int p = 0;
    int p_bar = 0;
    int y0 = 0;
};

DesignLayout design_layout(const PlantModel& plant) {
    DesignLayout d;
    d.p = d.layout.add_block(plant.n_states());
    d.p_bar = d.layout.add_block(plant.n_agents() * plant.n_states());
    d.y0 = d.layout.n_blocks();
    for (int i = 0; i < plant.n_agents(); ++i) d.layout.add_block(plant.output_sizes()[i]);
    return d;
}

LmiConstraint positive_block(const SymLayout& layout, int b, const std::string& name) {
    return {name, block_map(layout, b, 0.0, 1.0), true};
}

}  // namespace

LyapunovDesign solve_design(const PlantModel& plant, const GainSet& gains, const BarSystem& bar,
                            const DesignWeights& weights, const std::vector<double>& alpha_grid,
                            const SolverOptions& options, std::vector<CellDiagnostic>* diagnostics) {
    const int agents = plant.n_agents();
    require(!alpha_grid.empty(), ErrorKind::kValidation, "alpha grid is empty");
    for (double a : alpha_grid)
        require(std::isfinite(a) && a >= 0.0, ErrorKind::kValidation, "alpha grid entries must be finite and >= 0");
    require(static_cast<int>(weights.wi.size()) == agents, ErrorKind::kValidation, "need one trigger weight per agent");
    for (int i = 0; i < plant.n_agents(); ++i)
        require(plant.output_sizes()[i] > 0, ErrorKind::kValidation,
                "agent " + std::to_string(i + 1) + " has no outputs; the trigger needs a local measurement");

    const DesignLayout dl = design_layout(plant);
    const SymLayout& layout = dl.layout;
    const Mat a_bk = plant.a() + plant.b() * gains.k;
    const Mat e_mat = design::e_matrix(plant, gains);
    const Mat& q = plant.q();
    const Mat& r = plant.r();

    std::vector<LmiConstraint> fixed;
    fixed.push_back(positive_block(layout, dl.p, "P"));
    fixed.push_back(positive_block(layout, dl.p_bar, "Pbar"));
    for (int i = 0; i < agents; ++i) fixed.push_back(positive_block(layout, dl.y0 + i, "Y" + std::to_string(i + 1)));
    for (int i = 0; i < agents; ++i) {
        const Mat c_i = plant.c_block(i);
        const Mat g_i = plant.selector(i);
        const int yb = dl.y0 + i;
        fixed.push_back({"trigger LMI (agent " + std::to_string(i + 1) + ")",
                         linearize(layout,
                                   [&](const std::vector<Mat>& v) {
                                       return trigger_lmi(a_bk, e_mat, c_i, g_i, q, r, v[dl.p], v[dl.p_bar], v[yb]);
                                   }),
                         false});
    }

    auto state_constraint = [&](double a1) {
        return LmiConstraint{"state LMI", linearize(layout, [&](const std::vector<Mat>& v) {
                                 return state_lmi(a_bk, e_mat, q, v[dl.p], v[dl.p_bar], a1);
                             }), true};
    };
    auto bar_constraint = [&](double a3) {
        return LmiConstraint{"full-connection error LMI", linearize(layout, [&](const std::vector<Mat>& v) {
                                 return bar_error_lmi(bar, q, r, v[dl.p_bar], 0.0, a3);
                             }), true};
    };

    // Each of the two alpha-dependent LMIs is necessary on its own, so cells
    // whose alpha fails either screen are skipped.
    std::vector<bool> ok1(alpha_grid.size()), ok3(alpha_grid.size());
    for (std::size_t k = 0; k < alpha_grid.size(); ++k) {
        ok1[k] = feasibility_solve(layout, {fixed[0], fixed[1], state_constraint(alpha_grid[k])}, options).feasible;
        ok3[k] = feasibility_solve(layout, {fixed[1], bar_constraint(alpha_grid[k])}, options).feasible;
    }

    std::vector<double> w{weights.wx, weights.we};
    for (double wi : weights.wi) w.push_back(wi);

    std::optional<LyapunovDesign> best;
    std::vector<CellDiagnostic> cells;
    for (std::size_t k1 = 0; k1 < alpha_grid.size(); ++k1) {
        for (std::size_t k3 = 0; k3 < alpha_grid.size(); ++k3) {
            CellDiagnostic cell{alpha_grid[k1], alpha_grid[k3], false, 0.0, ""};
            if (!ok1[k1] || !ok3[k3]) {
                cell.note = !ok1[k1] ? "state LMI infeasible at alpha1" : "full-connection error LMI infeasible at alpha3";
                cells.push_back(cell);
                continue;
            }
            std::vector<LmiConstraint> cons = fixed;
            cons.push_back(state_constraint(cell.alpha1));
            cons.push_back(bar_constraint(cell.alpha3));
            const SolveResult res = maxdet_solve(layout, cons, w, options);
            cell.feasible = res.feasible;
            cell.objective = res.objective;
            cell.note = res.feasible ? "feasible" : res.diagnostic;
            cells.push_back(cell);
            if (!res.feasible || (best && best->objective >= res.objective)) continue;
            LyapunovDesign d;
            d.p = res.blocks[dl.p];
            d.p_bar = res.blocks[dl.p_bar];
            for (int i = 0; i < agents; ++i) d.y.push_back(res.blocks[dl.y0 + i]);
            d.alpha1 = cell.alpha1;
            d.alpha3 = cell.alpha3;
            d.objective = res.objective;
            best = std::move(d);
        }
    }
    if (diagnostics) *diagnostics = cells;
    if (!best) {
        std::ostringstream os;
        os << "design infeasible on every alpha cell:";
        for (const auto& c : cells) os << "\n  alpha1=" << c.alpha1 << " alpha3=" << c.alpha3 << ": " << c.note;
        fail(ErrorKind::kInfeasible, os.str());
    }

    LyapunovDesign& d = *best;
    d.margin_state = num::min_eig_margin(state_lmi(a_bk, e_mat, q, d.p, d.p_bar, d.alpha1));
    d.margin_bar = num::min_eig_margin(bar_error_lmi(bar, q, r, d.p_bar, 0.0, d.alpha3));
    for (int i = 0; i < agents; ++i)
        d.margin_trigger.push_back(num::min_eig_margin(
            trigger_lmi(a_bk, e_mat, plant.c_block(i), plant.selector(i), q, r, d.p, d.p_bar, d.y[i])));
    d.log_det_p = std::log(d.p.determinant());
    d.log_det_p_bar = Eigen::LLT<Mat>(d.p_bar).matrixLLT().diagonal().array().log().sum() * 2.0;
    for (const auto& y : d.y) d.log_det_y.push_back(std::log(y.determinant()));

    const GammaLmi full = [&bar, &q, &r, p_bar = d.p_bar](double g, double a) {
        return bar_error_lmi(bar, q, r, p_bar, g, a);
    };
    d.gamma_full = gamma_of_config(full, alpha_grid).gamma;
    return d;
}

std::vector<std::string> check_design(const PlantModel& plant, const GainSet& gains, const BarSystem& bar,
                                      const LyapunovDesign& design) {
    std::vector<std::string> failures;
    auto check = [&](const std::string& name, const Mat& m, bool strict) {
        require(m.rows() == m.cols(), ErrorKind::kStructural, name + " is not square");
        const double margin = num::min_eig_margin(num::symmetrize(m));
        const double tol = eps_pd(m);
        if (strict ? margin < tol : margin < -tol) {
            std::ostringstream os;
            os << name << ": min eigenvalue " << margin << (strict ? " below " : " below -") << tol;
            failures.push_back(os.str());
        }
    };
    const int agents = plant.n_agents();
    const Mat a_bk = plant.a() + plant.b() * gains.k;
    const Mat e_mat = design::e_matrix(plant, gains);
    if (design.p.rows() != plant.n_states() || design.p_bar.rows() != agents * plant.n_states() ||
        static_cast<int>(design.y.size()) != agents) {
        failures.push_back("design matrices have the wrong dimensions for this plant");
        return failures;
    }
    check("P", design.p, true);
    check("Pbar", design.p_bar, true);
    for (int i = 0; i < agents; ++i) check("Y" + std::to_string(i + 1), design.y[i], true);
    check("state LMI", state_lmi(a_bk, e_mat, plant.q(), design.p, design.p_bar, design.alpha1), true);
    check("full-connection error LMI", bar_error_lmi(bar, plant.q(), plant.r(), design.p_bar, 0.0, design.alpha3),
          true);
    for (int i = 0; i < agents; ++i)
        check("trigger LMI (agent " + std::to_string(i + 1) + ")",
              trigger_lmi(a_bk, e_mat, plant.c_block(i), plant.selector(i), plant.q(), plant.r(), design.p,
                          design.p_bar, design.y[i]),
              false);
    if (design.gamma_full > 0.0) failures.push_back("full-connection gamma is positive");
    return failures;
}

// ---------------------------------------------------------------------------
// Gamma per configuration

GammaLmi config_lmi(const PlantModel& plant, const GainSet& gains, const CommGraph& underlying, const Mat& laplacian,
                    const Mat& p_bar) {
    const Mat full = graph::laplacian(underlying.adjacency());
    const Mat q = plant.q();
    const Mat r = plant.r();
    if (underlying.n_agents() > 1 && graph::same_laplacian(laplacian, full)) {
        BarSystem bar = design::assemble_bar_system(plant, gains, graph::spectral_split(underlying));
        return [bar = std::move(bar), q, r, p_bar](double g, double a) { return bar_error_lmi(bar, q, r, p_bar, g, a); };
    }
    ErrorMatrices em = design::error_matrices(plant, gains, laplacian);
    const Mat i_stack = design::identity_stack(plant.n_agents(), plant.n_states());
    return [em = std::move(em), i_stack, q, r, p_bar](double g, double a) {
        return error_lmi(em.a_e, i_stack, em.j, q, r, p_bar, g, a);
    };
}

double gamma_threshold(const GammaLmi& lmi, double alpha) { return eps_pd(lmi(0.0, alpha)); }

double gamma_slack(const GammaLmi& lmi, double gamma, double alpha) {
    return num::min_eig_margin(num::symmetrize(lmi(gamma, alpha))) - gamma_threshold(lmi, alpha);
}

std::optional<GammaResult> gamma_at_alpha(const GammaLmi& lmi, double alpha, const GammaOptions& opt) {
    const double threshold = gamma_threshold(lmi, alpha);
    auto feasible = [&](double g) { return num::min_eig_margin(num::symmetrize(lmi(g, alpha))) >= threshold; };
    double hi = opt.hi;
    while (!feasible(hi)) {
        if (hi >= opt.hard_cap) return std::nullopt;
        hi = std::min(opt.hard_cap, 2.0 * std::max(hi, 1.0));
    }
    double lo = opt.lo;
    if (feasible(lo)) return GammaResult{lo, alpha, num::min_eig_margin(lmi(lo, alpha))};
    if (lo < 0.0 && hi > 0.0 && feasible(0.0)) hi = 0.0;
    while (hi - lo > opt.tol) {
        const double mid = 0.5 * (lo + hi);
        (feasible(mid) ? hi : lo) = mid;
    }
    return GammaResult{hi, alpha, num::min_eig_margin(lmi(hi, alpha))};
}

GammaResult gamma_of_config(const GammaLmi& lmi, const std::vector<double>& alpha_grid, const GammaOptions& opt) {
    std::optional<GammaResult> best;
    for (double a : alpha_grid) {
        const auto r = gamma_at_alpha(lmi, a, opt);
        if (r && (!best || r->gamma < best->gamma)) best = r;
    }
    if (!best) {
        std::ostringstream os;
        os << "gamma is unbounded: no alpha on the grid is feasible at gamma = " << opt.hard_cap;
        fail(ErrorKind::kInfeasible, os.str());
    }
    return *best;
}

GammaTable gamma_table(const PlantModel& plant, const GainSet& gains, const CommGraph& underlying, const Mat& p_bar,
                       const std::vector<double>& alpha_grid, GammaMode mode, const GammaOptions& opt) {
    GammaTable table;
    table.mode = mode;
    std::vector<ConnectionConfig> configs;
    if (mode == GammaMode::kEnumerate) {
        configs = graph::enumerate_configs(underlying);
    } else {
        configs.push_back(graph::induced_config(underlying, 0));
        if (underlying.n_agents() > 1) configs.push_back(graph::induced_config(underlying, underlying.all_agents()));
    }
    for (auto& cfg : configs) {
        const GammaResult r = gamma_of_config(config_lmi(plant, gains, underlying, cfg.laplacian, p_bar), alpha_grid, opt);
        table.entries.push_back({std::move(cfg), r.gamma, r.alpha, true});
    }
    table.worst_case = table.entries.front().gamma;
    return table;
}

}  // namespace lmi

double GammaTable::lookup(const Mat& laplacian) const {
    for (const auto& e : entries)
        if (graph::same_laplacian(e.config.laplacian, laplacian)) return e.gamma;
    return worst_case;
}

}  // namespace etcon
