#include "etcon/protocol.hpp"

#include "etcon/error.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>

namespace etcon {

PartialConfig merge(const PartialConfig& a, const PartialConfig& b) {
    const AgentMask both = a.known & b.known;
    require((a.on & both) == (b.on & both), ErrorKind::kStructural,
            "knowledge records disagree about an agent's connection status");
    return {a.known | b.known, (a.on & a.known) | (b.on & b.known)};
}

// ---------------------------------------------------------------------------

namespace {

constexpr int kDenseLimit = 16;

}  // namespace

GammaBar::GammaBar(const CommGraph& underlying, const GammaTable& table)
    : graph_(&underlying), table_(&table), all_(underlying.all_agents()) {
    if (underlying.n_agents() <= kDenseLimit) {
        const AgentMask count = AgentMask{1} << underlying.n_agents();
        by_mask_.resize(count);
        for (AgentMask m = 0; m < count; ++m)
            by_mask_[m] = table.lookup(graph::induced_config(underlying, m).laplacian);
    }
}

double GammaBar::exact(AgentMask connected) {
    connected &= all_;
    if (!by_mask_.empty()) return by_mask_[connected];
    return table_->lookup(graph::induced_config(*graph_, connected).laplacian);
}

double GammaBar::operator()(const PartialConfig& pc) {
    const AgentMask unknown = all_ & ~pc.known;
    const AgentMask on = pc.on & pc.known & all_;
    if (unknown == 0) return exact(on);
    const std::uint64_t key = (static_cast<std::uint64_t>(pc.known & all_) << 32) | on;
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    double g = -std::numeric_limits<double>::infinity();
    if (std::popcount(unknown) > 20) {
        // Too many completions to list: every table value is reachable in principle.
        g = table_->worst_case;
        for (const auto& e : table_->entries) g = std::max(g, e.gamma);
    } else {
        // Enumerate the submasks of `unknown`, including the empty one.
        AgentMask sub = unknown;
        while (true) {
            g = std::max(g, exact(on | sub));
            if (sub == 0) break;
            sub = (sub - 1) & unknown;
        }
    }
    cache_.emplace(key, g);
    return g;
}

// ---------------------------------------------------------------------------

AgentKnowledge::AgentKnowledge(int n_agents, double dt, std::int64_t origin)
    : all_(n_agents >= 32 ? ~AgentMask{0} : (AgentMask{1} << n_agents) - 1),
      dt_(dt),
      origin_(origin),
      end_(origin) {
    require(dt > 0.0, ErrorKind::kValidation, "dt must be positive");
}

void AgentKnowledge::push(std::int64_t first, std::int64_t end, const PartialConfig& pc) {
    if (!runs_.empty() && runs_.size() > first_unsettled_ && runs_.back().end == first && runs_.back().config == pc) {
        runs_.back().end = end;
        return;
    }
    runs_.push_back({first, end, pc});
}

void AgentKnowledge::settle(GammaBar& gamma_bar) {
    while (first_unsettled_ < runs_.size() && (runs_[first_unsettled_].config.known & all_) == all_) {
        const auto& r = runs_[first_unsettled_];
        settled_ += gamma_bar(r.config) * static_cast<double>(r.end - r.first) * dt_;
        ++first_unsettled_;
    }
}

void AgentKnowledge::append(const PartialConfig& pc, GammaBar& gamma_bar) {
    // A fully known step right after a settled run of the same set extends it in place.
    if ((pc.known & all_) == all_ && first_unsettled_ == runs_.size() && !runs_.empty() &&
        runs_.back().end == end_ && runs_.back().config == pc) {
        runs_.back().end = end_ + 1;
        settled_ += gamma_bar(pc) * dt_;
        ++end_;
        return;
    }
    push(end_, end_ + 1, pc);
    ++end_;
    settle(gamma_bar);
}

bool AgentKnowledge::merge_from(const AgentKnowledge& other, GammaBar& gamma_bar) {
    require(other.origin_ == origin_ && other.end_ == end_, ErrorKind::kStructural,
            "knowledge records cover different steps");
    const std::int64_t from = tau_step();
    if (from >= end_) return false;

    // Other's run containing `from`.
    auto it = std::upper_bound(other.runs_.begin(), other.runs_.end(), from,
                               [](std::int64_t s, const KnowledgeRun& r) { return s < r.first; });
    require(it != other.runs_.begin(), ErrorKind::kStructural, "knowledge record has a gap");
    std::size_t oj = static_cast<std::size_t>(std::distance(other.runs_.begin(), it)) - 1;
    std::size_t mj = first_unsettled_;

    std::vector<KnowledgeRun> tail;
    std::int64_t p = from;
    while (p < end_) {
        const KnowledgeRun& mine = runs_[mj];
        const KnowledgeRun& theirs = other.runs_[oj];
        const std::int64_t stop = std::min(mine.end, theirs.end);
        const PartialConfig pc = merge(mine.config, theirs.config);
        if (!tail.empty() && tail.back().end == p && tail.back().config == pc)
            tail.back().end = stop;
        else
            tail.push_back({p, stop, pc});
        p = stop;
        if (mine.end == p) ++mj;
        if (theirs.end == p) ++oj;
    }

    const bool changed = !std::equal(tail.begin(), tail.end(), runs_.begin() + static_cast<std::ptrdiff_t>(first_unsettled_),
                                     runs_.end(), [](const KnowledgeRun& a, const KnowledgeRun& b) {
                                         return a.first == b.first && a.end == b.end && a.config == b.config;
                                     });
    if (!changed) return false;
    runs_.resize(first_unsettled_);
    runs_.insert(runs_.end(), tail.begin(), tail.end());
    settle(gamma_bar);
    return true;
}

void AgentKnowledge::restart(std::int64_t step) {
    origin_ = step;
    end_ = step;
    runs_.clear();
    first_unsettled_ = 0;
    settled_ = 0.0;
}

std::int64_t AgentKnowledge::tau_step() const {
    return first_unsettled_ < runs_.size() ? runs_[first_unsettled_].first : end_;
}

double AgentKnowledge::exponent(GammaBar& gamma_bar) const {
    double e = settled_;
    for (std::size_t j = first_unsettled_; j < runs_.size(); ++j)
        e += gamma_bar(runs_[j].config) * static_cast<double>(runs_[j].end - runs_[j].first) * dt_;
    return e;
}

double AgentKnowledge::rebuild_exponent(GammaBar& gamma_bar) const {
    double e = 0.0;
    for (const auto& r : runs_) e += gamma_bar(r.config) * static_cast<double>(r.end - r.first) * dt_;
    return e;
}

// ---------------------------------------------------------------------------

namespace protocol {

double trigger_bound(double exponent) { return 2.0 + std::max(1.0, std::exp(exponent)); }

bool should_connect(const Vec& y_i, const Mat& y_weight, double bound) {
    require(y_weight.rows() == y_i.size() && y_weight.cols() == y_i.size(), ErrorKind::kStructural,
            "trigger weight does not match the measurement size");
    return y_i.dot(y_weight * y_i) <= bound;
}

bool stay_connected(double stay_integral, double t, double f_slope) { return stay_integral > -f_slope * t; }

void exchange(std::vector<AgentRuntime>& agents, const CommGraph& underlying, AgentMask open, GammaBar& gamma_bar) {
    if (std::popcount(open) < 2) return;
    const int n = underlying.n_agents();
    bool changed = true;
    while (changed) {
        changed = false;
        std::vector<AgentKnowledge> snapshot;
        snapshot.reserve(agents.size());
        for (const auto& a : agents) snapshot.push_back(a.knowledge);
        for (int i = 0; i < n; ++i) {
            if (!(open >> i & 1u)) continue;
            for (int j : underlying.neighbors(i))
                if (open >> j & 1u) changed |= agents[i].knowledge.merge_from(snapshot[j], gamma_bar);
        }
    }
}

}  // namespace protocol

// ---------------------------------------------------------------------------

ProtocolNetwork::ProtocolNetwork(const CommGraph& underlying, const TriggerDesign& design, double dt)
    : graph_(&underlying), design_(&design), dt_(dt), gamma_bar_(underlying, design.gamma_table) {
    const int n = underlying.n_agents();
    require(static_cast<int>(design.y_weights.size()) == n, ErrorKind::kStructural, "need one trigger weight per agent");
    require(design.f_slope > 0.0, ErrorKind::kValidation, "f_slope must be positive");
    for (int i = 0; i < n; ++i) agents_.push_back({i, Vec(), false, AgentKnowledge(n, dt), 0.0, 0, Vec()});
}

void ProtocolNetwork::restart(std::int64_t k) {
    for (auto& a : agents_) {
        a.knowledge.restart(k);
        a.stay_integral = 0.0;
        a.stay_origin = k;
    }
    true_exponent_ = 0.0;
}

RoundResult ProtocolNetwork::step(std::int64_t k, const std::vector<Vec>& y, bool always_connected) {
    const int n = graph_->n_agents();
    require(static_cast<int>(y.size()) == n, ErrorKind::kStructural, "need one measurement per agent");
    RoundResult out;
    out.bound.resize(n);
    out.y_quad.resize(n);

    for (int i = 0; i < n; ++i) {
        AgentRuntime& a = agents_[i];
        require(a.knowledge.end() == k, ErrorKind::kStructural, "protocol steps must be consecutive");
        a.y_current = y[i];
        out.bound[i] = protocol::trigger_bound(a.knowledge.exponent(gamma_bar_));
        out.y_quad[i] = y[i].dot(design_->y_weights[i] * y[i]);
        if (always_connected || out.y_quad[i] <= out.bound[i]) out.triggered |= AgentMask{1} << i;
    }
    const AgentMask open = out.triggered;
    protocol::exchange(agents_, *graph_, open, gamma_bar_);

    auto neighbor_mask = [&](int i) {
        AgentMask m = 0;
        for (int j : graph_->neighbors(i)) m |= AgentMask{1} << j;
        return m;
    };
    for (int i = 0; i < n; ++i) {
        if (!(open >> i & 1u)) continue;
        const AgentRuntime& a = agents_[i];
        bool stay = true;
        if (a.connected && !always_connected) {
            const bool neighbors_open = (neighbor_mask(i) & ~open) == 0;
            const double t_rel = static_cast<double>(k - a.stay_origin) * dt_;
            stay = neighbors_open && protocol::stay_connected(a.stay_integral, t_rel, design_->f_slope);
        }
        if (stay) out.connected |= AgentMask{1} << i;
    }

    for (int i = 0; i < n; ++i) {
        AgentRuntime& a = agents_[i];
        const bool now = out.connected >> i & 1u;
        if (now && !a.connected && design_->stay_reset == StayReset::kPerEpisode) {
            a.stay_integral = 0.0;
            a.stay_origin = k;
        }
        a.connected = now;
        PartialConfig pc;
        pc.known = AgentMask{1} << i;
        if (now) pc.known |= neighbor_mask(i);
        pc.on = out.connected & pc.known;
        a.knowledge.append(pc, gamma_bar_);
        a.stay_integral += (out.bound[i] - out.y_quad[i]) * dt_;
    }
    true_exponent_ += gamma_bar_.exact(out.connected) * dt_;
    out.event = out.connected != current_;
    current_ = out.connected;
    return out;
}

}  // namespace etcon
