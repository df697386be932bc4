#include "dkm/sparsifier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace dkm {

namespace {

double round_up_pow2(double p) {
    if (p >= 1) return 1;
    int e;
    double m = std::frexp(p, &e);  // p = m * 2^e, m in [0.5, 1)
    return m == 0.5 ? p : std::ldexp(1.0, e);
}

}  // namespace

SparsifiedRunner::SparsifiedRunner(const SparsifierConfig& cfg) : cfg_(cfg) {
    if (cfg_.rebuild_every <= 0) cfg_.rebuild_every = cfg_.ctrl.k;
    int l = cfg_.verifiers;
    if (l <= 0) {
        double n = std::max(2, cfg_.n_hint);
        l = std::min(8, std::max(2, static_cast<int>(std::ceil(std::log2(n)))));
    }
    uint64_t root = cfg_.ctrl.params.seed;
    primary_ = fresh(derive_seed(root, "primary"));
    for (int i = 0; i < l; ++i) verifiers_.push_back(fresh(derive_seed(root, "verifier", i)));
}

std::unique_ptr<DynamicKMeans> SparsifiedRunner::fresh(uint64_t seed) const {
    ControllerConfig c = cfg_.ctrl;
    c.params.seed = seed;
    auto p = std::make_unique<DynamicKMeans>(c);
    for (const auto& [id, e] : u_.entries()) p->update(UpdateOp::ins(id, e.p, e.w));
    return p;
}

double SparsifiedRunner::keep_probability(uint64_t id) const {
    auto it = prob_.find(id);
    return it == prob_.end() ? 1.0 : it->second;
}

double SparsifiedRunner::cost_u() const {
    if (u_.empty() || primary_->solution().empty()) return 0.0;
    const auto& s = primary_->solution();
    return cost(u_, std::vector<Point>(s.begin(), s.end()));
}

double SparsifiedRunner::estimate() const {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& v : verifiers_) {
        double c = 0;
        if (!u_.empty() && !v->solution().empty()) {
            const auto& s = v->solution();
            c = cost(u_, std::vector<Point>(s.begin(), s.end()));
        }
        best = std::min(best, c);
    }
    return std::isfinite(best) ? best : 0.0;
}

double SparsifiedRunner::ratio() const {
    double c = cost_u(), e = estimate();
    if (e <= 0) return c <= 0 ? 1.0 : std::numeric_limits<double>::infinity();
    return c / e;
}

void SparsifiedRunner::rebuild() {
    ++rebuilds_;
    since_rebuild_ = 0;
    std::map<uint64_t, double> old = std::move(prob_);
    prob_.clear();
    size_t n = x_.size();
    int k = cfg_.ctrl.k;
    if (n <= static_cast<size_t>(k)) return;
    std::vector<uint64_t> ids;
    std::vector<const WeightedEntry*> es;
    for (const auto& [id, e] : x_.entries()) {
        ids.push_back(id);
        es.push_back(&e);
    }
    // Reference centers: the best verifier solution, which moves slowly between rebuilds;
    // k-means++ seeding when no verifier has one yet.
    std::vector<Point> ref;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& v : verifiers_) {
        if (v->solution().empty() || u_.empty()) continue;
        std::vector<Point> s(v->solution().begin(), v->solution().end());
        double c = cost(u_, s);
        if (c < best) {
            best = c;
            ref = std::move(s);
        }
    }
    std::vector<double> d1(n, std::numeric_limits<double>::infinity());
    std::vector<int> near(n, 0);
    auto absorb_center = [&](const Point& c, int idx) {
        for (size_t i = 0; i < n; ++i) {
            double d = dist2(es[i]->p, c);
            if (d < d1[i]) {
                d1[i] = d;
                near[i] = idx;
            }
        }
    };
    if (!ref.empty()) {
        for (size_t c = 0; c < ref.size(); ++c) absorb_center(ref[c], static_cast<int>(c));
    } else {
        CounterRng rng(cfg_.ctrl.params.seed, "sensitivity", rebuilds_);
        for (int c = 0; c < k; ++c) {
            double total = 0;
            for (size_t i = 0; i < n; ++i) total += es[i]->w * (c == 0 ? 1.0 : d1[i]);
            if (!(total > 0)) break;
            double u = rng.uniform() * total;
            size_t pick = n - 1;
            for (size_t i = 0; i < n; ++i) {
                double m = es[i]->w * (c == 0 ? 1.0 : d1[i]);
                if (u < m) {
                    pick = i;
                    break;
                }
                u -= m;
            }
            absorb_center(es[pick]->p, c);
        }
    }
    size_t groups = std::max<size_t>(ref.size(), static_cast<size_t>(k));
    double total_cost = 0;
    std::vector<double> cluster_w(groups, 0.0);
    for (size_t i = 0; i < n; ++i) {
        total_cost += es[i]->w * d1[i];
        cluster_w[near[i]] += es[i]->w;
    }
    std::vector<double> s(n);
    double s_sum = 0;
    for (size_t i = 0; i < n; ++i) {
        double a = total_cost > 0 ? es[i]->w * d1[i] / total_cost : 0.0;
        double b = cluster_w[near[i]] > 0 ? es[i]->w / cluster_w[near[i]] : 0.0;
        s[i] = a + b;
        s_sum += s[i];
    }
    double m = cfg_.c_u * k * std::log2(static_cast<double>(n));
    for (size_t i = 0; i < n; ++i) {
        double p = s_sum > 0 ? std::min(1.0, m * s[i] / s_sum) : 1.0;
        p = round_up_pow2(std::max(p, 1e-300));
        // Hysteresis: keep the previous probability while the new one is within a factor 2.
        auto it = old.find(ids[i]);
        if (it != old.end() && p <= 2 * it->second && p >= it->second / 2) p = it->second;
        if (p < 1) prob_[ids[i]] = p;
    }
}

std::vector<UpdateOp> SparsifiedRunner::sync_sample() {
    std::vector<UpdateOp> ops;
    uint64_t root = cfg_.ctrl.params.seed;
    std::vector<uint64_t> drop;
    for (const auto& [id, e] : u_.entries())
        if (!x_.contains(id)) drop.push_back(id);
    for (auto id : drop) {
        u_.erase(id);
        ops.push_back(UpdateOp::del(id));
    }
    for (const auto& [id, e] : x_.entries()) {
        double p = keep_probability(id);
        bool keep = CounterRng(root, "keep", id).uniform() < p;
        bool present = u_.contains(id);
        double w = e.w / p;
        if (present && (!keep || u_.at(id).w != w || u_.at(id).p != e.p)) {
            u_.erase(id);
            ops.push_back(UpdateOp::del(id));
            present = false;
        }
        if (keep && !present) {
            u_.insert(id, e.p, w);
            ops.push_back(UpdateOp::ins(id, e.p, w));
        }
    }
    return ops;
}

void SparsifiedRunner::feed(const std::vector<UpdateOp>& ops) {
    for (const auto& op : ops) {
        primary_->update(op);
        for (auto& v : verifiers_) v->update(op);
    }
}

void SparsifiedRunner::enforce(SparsifierReport& rep) {
    double e = estimate();
    int burst = 0;
    while (cost_u() > cfg_.alpha * e * (1 + 1e-9) + 1e-9) {
        if (burst >= cfg_.max_resets)
            throw std::runtime_error("sparsifier reset cap exceeded: cost " + std::to_string(cost_u()) +
                                     " vs estimate " + std::to_string(e));
        ++burst;
        ++resets_;
        primary_ = fresh(derive_seed(cfg_.ctrl.params.seed, "reset", next_seed_++));
    }
    rep.resets = burst;
    max_burst_ = std::max(max_burst_, burst);
}

SparsifierReport SparsifiedRunner::update(const UpdateOp& op) {
    SparsifierReport rep;
    std::set<Point> before = primary_->solution();
    std::vector<UpdateOp> ops;
    if (op.kind == UpdateOp::insert) {
        x_.insert(op.id, op.p, op.w);
        prob_.erase(op.id);
        u_.insert(op.id, op.p, op.w);
        ops.push_back(op);
    } else {
        x_.at(op.id);
        x_.erase(op.id);
        prob_.erase(op.id);
        if (u_.contains(op.id)) {
            u_.erase(op.id);
            ops.push_back(op);
        }
    }
    if (++since_rebuild_ >= static_cast<uint64_t>(cfg_.rebuild_every)) {
        rebuild();
        auto more = sync_sample();
        ops.insert(ops.end(), more.begin(), more.end());
    }
    rep.u_changes = static_cast<int>(ops.size());
    feed(ops);
    enforce(rep);
    const auto& after = primary_->solution();
    for (const auto& c : before)
        if (!after.count(c)) ++rep.recourse;
    for (const auto& c : after)
        if (!before.count(c)) ++rep.recourse;
    return rep;
}

void SparsifiedRunner::corrupt_primary() {
    if (u_.empty()) return;
    primary_->corrupt_solution({u_.entries().begin()->second.p});
}

int SparsifiedRunner::audit() {
    SparsifierReport rep;
    enforce(rep);
    return rep.resets;
}

std::vector<double> calibration_ratios(const SparsifierConfig& cfg, const std::vector<UpdateOp>& ops) {
    SparsifierConfig c = cfg;
    c.alpha = std::numeric_limits<double>::infinity();
    SparsifiedRunner r(c);
    std::vector<double> out;
    for (const auto& op : ops) {
        r.update(op);
        double v = r.ratio();
        if (std::isfinite(v)) out.push_back(v);
    }
    return out;
}

}  // namespace dkm
