#include "dkm/dynamic_kmeans.hpp"

#include <algorithm>
#include <limits>

namespace dkm {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Timer {
    double& acc;
    Clock::time_point t0 = Clock::now();
    ~Timer() { acc += seconds_since(t0); }
};

bool close_le(double a, double b) { return a <= b * (1 + 1e-9) + 1e-9; }

}  // namespace

ExponentSchedule ExponentSchedule::make(const Params& params) {
    ExponentSchedule s;
    s.lambda = params.lambda;
    s.theta = params.theta;
    if (params.preset == Preset::paper_faithful) {
        s.ell_stop = std::pow(s.theta, 8) * s.pow(44);
        s.ell_div = 36 * s.pow(51);
        s.aug_mult = s.pow(52);
        s.cert_outer = 0;
    } else {
        s.ell_stop = 2;
        s.ell_div = 2;
        s.aug_mult = 1;
        s.cert_outer = 3 * params.gamma;
    }
    double aspect = params.aspect();
    s.t_max = 0;
    while (s.ball_radius(s.t_max) < aspect) ++s.t_max;
    return s;
}

bool ExponentSchedule::set(const std::string& key, double value) {
    if (key == "ell_stop") ell_stop = value;
    else if (key == "ell_div") ell_div = value;
    else if (key == "aug_mult") aug_mult = value;
    else if (key == "mr_div_exp") mr_div_exp = value;
    else if (key == "yellow_div_exp") yellow_div_exp = value;
    else if (key == "contam_add") contam_add = value;
    else if (key == "thresh_add") thresh_add = value;
    else if (key == "cert_outer") cert_outer = value;
    else return false;
    return true;
}

int ExponentSchedule::t_for(double dist, double div_exp, bool* clamped) const {
    double target = dist / pow(div_exp);
    int t = 0;
    while (t < t_max && ball_radius(t) < target) ++t;
    if (clamped) *clamped = ball_radius(t) < target;
    return t;
}

ControllerConfig ControllerConfig::make(const Params& params, int k) {
    ControllerConfig c;
    c.k = k;
    c.params = params;
    c.sched = ExponentSchedule::make(params);
    c.t_cap = params.preset == Preset::practical ? 2 : 0;
    return c;
}

std::vector<std::string> check_certificate(const MakeRobustRecord& rec, const WeightedSet& x,
                                           const ExponentSchedule& sched) {
    std::vector<std::string> bad;
    auto fail = [&](int j, const std::string& what) {
        bad.push_back("j=" + std::to_string(j) + ": " + what);
    };
    if (static_cast<int>(rec.steps.size()) != rec.t) fail(rec.t, "step count differs from t");
    Point cur = rec.u;
    for (const auto& st : rec.steps) {
        int j = st.j;
        if (st.x != cur) fail(j, "sequence is not contiguous");
        cur = st.next;
        if (!st.ans.witness) {
            fail(j, "missing witness");
            continue;
        }
        std::set<uint64_t> in_b(st.ans.witness->begin(), st.ans.witness->end());
        double inner = sched.ball_radius(j), outer = sched.outer_radius(j);
        double wb = 0, cost_x = 0, cost_next = 0;
        std::vector<long double> sum(st.x.size(), 0);
        for (const auto& [id, e] : x.entries()) {
            double dd = dist2(e.p, st.x);
            bool member = in_b.count(id) != 0;
            if (!member && dd <= inner * inner) fail(j, "inner ball point missing from B");
            if (!member) continue;
            if (dd > outer * outer * (1 + 1e-12)) fail(j, "B point outside outer radius");
            wb += e.w;
            cost_x += e.w * dd;
            cost_next += e.w * dist2(e.p, st.next);
            for (size_t i = 0; i < sum.size(); ++i) sum[i] += e.w * static_cast<long double>(e.p[i]);
        }
        if (in_b.size() > x.size()) fail(j, "witness holds unknown ids");
        if (std::abs(wb - st.ans.b) > 1e-9 * std::max(1.0, wb)) fail(j, "estimated weight differs");
        if (wb <= 0) continue;
        double opt1 = 0;
        for (const auto& [id, e] : x.entries()) {
            if (!in_b.count(id)) continue;
            long double q = 0;
            for (size_t i = 0; i < sum.size(); ++i) {
                long double t = e.p[i] - sum[i] / wb;
                q += t * t;
            }
            opt1 += e.w * static_cast<double>(q);
        }
        double avg = cost_x / wb;
        double th3 = sched.theta * sched.theta * sched.theta;
        bool c1 = avg >= sched.pow(6.0 * j - 4) * (1 - 1e-9) && st.next == st.x;
        bool c2 = close_le(avg, sched.pow(6.0 * j - 2)) && close_le(cost_next, std::min(th3 * opt1, cost_x));
        if (!c1 && !c2) fail(j, "neither robustness condition holds");
    }
    if (cur != rec.v) fail(0, "chain does not end at v");
    if (rec.t > 0 && !close_le(dist(rec.u, rec.v), 4 * sched.pow(3.0 * rec.t - 1)))
        fail(rec.t, "drift bound exceeded");
    return bad;
}

DynamicKMeans::DynamicKMeans(const ControllerConfig& cfg)
    : cfg_(cfg), st_(cfg.params, derive_seed(cfg.params.seed, "state")), rng_(cfg.params.seed, "controller") {
    cfg_.params.validate();
    if (cfg_.k < 1) throw UsageError("k must be >= 1");
    for (int i = 0; i <= cfg_.sched.t_max; ++i) robust_.push_back(std::make_unique<CenterIndex>(st_.levels()));
}

double DynamicKMeans::cost() const {
    if (st_.points().empty()) return 0.0;
    const auto& s = st_.centers();
    return dkm::cost(st_.points(), std::vector<Point>(s.begin(), s.end()));
}

int DynamicKMeans::t_of(const Point& c) const {
    auto it = meta_.find(c);
    return it == meta_.end() ? -1 : it->second.t;
}

void DynamicKMeans::track(const Point& c) {
    if (!touched_.count(c)) touched_.emplace(c, st_.has_center(c));
}

void DynamicKMeans::add_center(const Point& c) {
    track(c);
    absorb(st_.insert_center(c));
}

void DynamicKMeans::remove_center(const Point& c) {
    track(c);
    absorb(st_.erase_center(c));
}

int DynamicKMeans::settle_recourse() {
    int r = 0;
    for (const auto& [c, was] : touched_)
        if (st_.has_center(c) != was) ++r;
    touched_.clear();
    return r;
}

void DynamicKMeans::absorb(const std::vector<BitFlip>& flips) {
    if (!collecting_) return;
    for (const auto& f : flips)
        if (st_.has_center(f.center) && yellow_set_.insert(f.center).second) yellow_.push_back(f.center);
}

void DynamicKMeans::drop_meta(const Point& c) {
    auto it = meta_.find(c);
    if (it == meta_.end()) return;
    robust_[it->second.t]->erase(c);
    meta_.erase(it);
}

void DynamicKMeans::set_meta(const Point& c, int t, int chain) {
    drop_meta(c);
    meta_[c] = Meta{t, chain};
    robust_[t]->insert(c, c, 1.0);
}

std::vector<Point> DynamicKMeans::restricted(int r) { return restricted_kmeans(st_, r, rng_); }

double DynamicKMeans::removal_proxy(const std::vector<Point>& removed) const {
    const Assignment& asg = st_.assignment();
    std::set<Point> gone(removed.begin(), removed.end());
    double total = 0;
    for (const auto& s : st_.centers()) {
        const Moments& m = asg.assigned_moments(s);
        if (!gone.count(s)) {
            total += m.cost_at(s);
            continue;
        }
        const Point* best = nullptr;
        double bd = std::numeric_limits<double>::infinity();
        for (const auto& c : st_.centers()) {
            if (gone.count(c)) continue;
            double t = dist2(s, c);
            if (t < bd) {
                bd = t;
                best = &c;
            }
        }
        total += best ? m.cost_at(*best) : 0.0;
    }
    return total;
}

UpdateReport DynamicKMeans::update(const UpdateOp& op) {
    UpdateReport rep;
    calls_this_update_ = 0;
    if (active_ && !in_epoch_) begin_epoch();
    {
        Timer tm{times_.apply};
        if (op.kind == UpdateOp::insert) {
            st_.insert_point(op.id, op.p, op.w);
            if (in_epoch_) {
                log_.push_back({true, op.id, op.p, op.w});
                if (!st_.has_center(op.p)) add_center(op.p);
            }
        } else {
            WeightedEntry e = st_.points().at(op.id);
            st_.erase_point(op.id);
            if (in_epoch_) log_.push_back({false, op.id, e.p, e.w});
        }
    }
    if (in_epoch_ && ++done_ == ell_ + 1) {
        end_epoch();
        rep.epoch_boundary = true;
    }
    sync_degenerate();
    ++stats_.updates;
    rep.recourse = settle_recourse();
    rep.makerobust_calls = calls_this_update_;
    stats_.recourse += rep.recourse;
    int cap = cfg_.k + (in_epoch_ ? done_ : 0);
    if (active_ && static_cast<int>(st_.centers().size()) > cap) ++stats_.size_violations;
    return rep;
}

void DynamicKMeans::sync_degenerate() {
    if (static_cast<int>(st_.distinct_locations()) > cfg_.k) {
        if (!active_) activate();
        return;
    }
    if (active_) {
        for (auto& idx : robust_) idx = std::make_unique<CenterIndex>(st_.levels());
        meta_.clear();
        in_epoch_ = false;
        active_ = false;
    }
    auto locs = st_.locations();
    std::set<Point> want(locs.begin(), locs.end());
    std::vector<Point> extra;
    for (const auto& c : st_.centers())
        if (!want.count(c)) extra.push_back(c);
    for (const auto& c : extra) remove_center(c);
    for (const auto& p : want)
        if (!st_.has_center(p)) add_center(p);
}

void DynamicKMeans::activate() {
    for (const auto& p : st_.locations())
        if (!st_.has_center(p)) add_center(p);
    int r = static_cast<int>(st_.centers().size()) - cfg_.k;
    if (r >= 1)
        for (const auto& c : restricted(r)) remove_center(c);
    snapshot_.clear();
    active_ = true;
    in_epoch_ = false;
    robustify(st_.centers(), {}, {});
}

void DynamicKMeans::begin_epoch() {
    s_init_ = st_.centers();
    snapshot_.clear();
    for (const auto& c : s_init_) snapshot_[c] = st_.bits().bits(c);
    log_.clear();
    removed_.clear();
    done_ = 0;
    int n = static_cast<int>(s_init_.size());
    int ell_hat = 0;
    stats_.ell_hat_trace.clear();
    {
        Timer tm{times_.ell_search};
        double base = removal_proxy({});
        for (int s = 1; s <= cfg_.k && s <= n - 1; s *= 2) {
            double c = removal_proxy(restricted(s));
            stats_.ell_hat_trace.push_back(s);
            if (c > cfg_.sched.ell_stop * base) break;
            ell_hat = s;
        }
    }
    ell_ = static_cast<int>(std::floor(ell_hat / cfg_.sched.ell_div));
    stats_.last_ell_hat = ell_hat;
    stats_.last_ell = ell_;
    if (ell_ >= 1) {
        Timer tm{times_.restrict_begin};
        removed_ = restricted(ell_);
        for (const auto& c : removed_) remove_center(c);
    }
    in_epoch_ = true;
}

void DynamicKMeans::end_epoch() {
    std::vector<Point> lazy;
    for (const auto& c : st_.centers())
        if (!s_init_.count(c)) lazy.push_back(c);
    for (const auto& c : lazy) remove_center(c);
    for (const auto& c : removed_)
        if (!st_.has_center(c)) add_center(c);

    for (auto it = log_.rbegin(); it != log_.rend(); ++it) {
        if (it->insert) st_.erase_point(it->id);
        else st_.insert_point(it->id, it->p, it->w);
    }
    std::vector<Point> aug;
    {
        Timer tm{times_.augment};
        double a_real = cfg_.sched.aug_mult * (ell_ + 1);
        double n_live = static_cast<double>(st_.points().size());
        int a = static_cast<int>(std::max(1.0, std::min(a_real, n_live)));
        int t = augment_sample_count(cfg_.params, cfg_.c_t, cfg_.t_cap);
        aug = augmented_kmeans(st_, a, t, rng_);
    }
    for (const auto& e : log_) {
        if (e.insert) st_.insert_point(e.id, e.p, e.w);
        else st_.erase_point(e.id);
    }

    for (const auto& p : aug)
        if (!st_.has_center(p)) add_center(p);
    for (const auto& e : log_) {
        if (!e.insert || !st_.points().contains(e.id)) continue;
        if (st_.points().at(e.id).p == e.p && !st_.has_center(e.p)) add_center(e.p);
    }
    {
        Timer tm{times_.restrict_end};
        int r = static_cast<int>(st_.centers().size()) - cfg_.k;
        if (r >= 1)
            for (const auto& c : restricted(r)) remove_center(c);
    }

    // X^(0) xor X^(l+1), keyed by id: first log entry gives the initial state.
    std::map<uint64_t, std::optional<WeightedEntry>> initial;
    for (const auto& e : log_)
        if (!initial.count(e.id))
            initial[e.id] = e.insert ? std::nullopt : std::optional<WeightedEntry>(WeightedEntry{e.p, e.w});
    std::set<Point> touched;
    for (const auto& [id, before] : initial) {
        std::optional<WeightedEntry> after;
        if (st_.points().contains(id)) after = st_.points().at(id);
        bool same = before && after && before->p == after->p && before->w == after->w;
        if (same || (!before && !after)) continue;
        if (before) touched.insert(before->p);
        if (after) touched.insert(after->p);
    }
    std::set<Point> w_prime = st_.centers();
    robustify(w_prime, s_init_, std::vector<Point>(touched.begin(), touched.end()));
    in_epoch_ = false;
    ++stats_.epochs;
}

void DynamicKMeans::robustify(const std::set<Point>& w_prime, const std::set<Point>& s_init,
                              const std::vector<Point>& touched) {
    Timer tm{times_.robustify};
    const ExponentSchedule& sc = cfg_.sched;
    std::set<Point> w1, w2;
    for (const auto& c : w_prime)
        if (!s_init.count(c)) w1.insert(c);
    for (const auto& x : touched) {
        for (int i = 0; i <= sc.t_max; ++i) {
            auto u = ann_query(*robust_[i], x, false);
            if (u && dist(*u, x) <= sc.contam_radius(i)) w2.insert(*u);
            if (cfg_.witness) {
                int near = 0;
                double r2 = sc.pow(3.0 * i + 2);
                for (const auto& [c, m] : meta_)
                    if (m.t == i && dist(c, x) <= r2) ++near;
                if (near > 1) ++stats_.contamination_multi;
            }
        }
    }
    std::vector<Point> gone;
    for (const auto& [c, m] : meta_)
        if (!w_prime.count(c)) gone.push_back(c);
    for (const auto& c : gone) drop_meta(c);

    yellow_.clear();
    yellow_set_.clear();
    for (const auto& c : w_prime) {
        if (!s_init.count(c)) continue;
        auto it = snapshot_.find(c);
        if (it != snapshot_.end() && st_.bits().bits(c) != it->second && yellow_set_.insert(c).second)
            yellow_.push_back(c);
    }
    outputs_.clear();
    collecting_ = true;
    std::set<Point> calls = w1;
    for (const auto& c : w2)
        if (w_prime.count(c)) calls.insert(c);
    for (const auto& u : calls)
        if (st_.has_center(u)) make_robust(u, w1.count(u) ? 1 : 2);
    while (!yellow_.empty()) {
        Point u = yellow_.front();
        yellow_.pop_front();
        yellow_set_.erase(u);
        if (!st_.has_center(u)) continue;
        int t = sc.t_for(st_.dist_hat(u), sc.yellow_div_exp);
        if (t_of(u) >= t) continue;
        make_robust(u, 3);
    }
    collecting_ = false;
    outputs_.clear();
}

void DynamicKMeans::make_robust(const Point& u, int type) {
    const ExponentSchedule& sc = cfg_.sched;
    ++stats_.makerobust_calls;
    ++calls_this_update_;
    if (outputs_.count(u)) ++stats_.calls_once_violations;
    bool clamped = false;
    int t = sc.t_for(st_.dist_hat(u), sc.mr_div_exp, &clamped);
    if (clamped) ++stats_.t_clamps;

    MakeRobustRecord rec{u, u, t, type, {}};
    Point x = u;
    for (int j = t; j >= 1; --j) {
        double r = sc.ball_radius(j);
        BallOneMeansAnswer ans = ball_1means(st_.point_index(), x, r, cfg_.witness);
        Point next = x;
        if (ans.b > 0) {
            bool keep = ans.cost_at_x / ans.b >= sc.mr_threshold(j) || ans.cost_at_x / sc.theta <= ans.cost_at_cstar;
            if (!keep) next = ans.c_star;
        }
        if (cfg_.witness || observer_) rec.steps.push_back({j, x, r, std::move(ans), next});
        x = std::move(next);
    }
    Point v = x;
    rec.v = v;

    int old_t = -1, old_chain = 0;
    if (auto it = meta_.find(u); it != meta_.end()) {
        old_t = it->second.t;
        old_chain = it->second.chain;
    }
    int chain = 0;
    if (type == 3) {
        chain = old_chain + 1;
        if (t <= old_t) ++stats_.t_increase_violations;
        if (chain > std::log2(cfg_.params.aspect())) ++stats_.chain_violations;
        stats_.max_chain = std::max(stats_.max_chain, chain);
    }
    if (t > 0 && !close_le(dist(u, v), 4 * sc.pow(3.0 * t - 1))) ++stats_.drift_violations;

    drop_meta(u);
    if (v != u) {
        remove_center(u);
        if (st_.has_center(v)) {
            int keep_t = std::max(t, t_of(v));
            set_meta(v, keep_t, chain);
        } else {
            add_center(v);
            set_meta(v, t, chain);
        }
    } else {
        set_meta(v, t, chain);
    }
    outputs_.insert(v);
    if (observer_) observer_(rec);
}

void DynamicKMeans::corrupt_solution(const std::vector<Point>& s) {
    std::vector<Point> cur(st_.centers().begin(), st_.centers().end());
    for (const auto& c : cur) {
        drop_meta(c);
        remove_center(c);
    }
    for (const auto& c : s)
        if (!st_.has_center(c)) {
            add_center(c);
            set_meta(c, 0, 0);
        }
    touched_.clear();
}

}  // namespace dkm
