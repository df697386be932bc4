#include "dkm/checks.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace dkm {

const char* status_name(Status s) {
    switch (s) {
        case Status::pass: return "PASS";
        case Status::soft: return "SOFT";
        default: return "FAIL";
    }
}

std::string format_result(const CheckResult& r) {
    std::ostringstream os;
    os << status_name(r.status) << " " << r.id << " " << r.name << " (" << std::fixed;
    os.precision(2);
    os << r.seconds << "s) " << r.detail;
    return os.str();
}

void ControllerTotals::add(const ControllerStats& s) {
    calls += s.makerobust_calls;
    calls_once += s.calls_once_violations;
    chain += s.chain_violations;
    t_increase += s.t_increase_violations;
    max_chain = std::max(max_chain, s.max_chain);
    ++streams;
}

namespace {

using Clock = std::chrono::steady_clock;

struct Scope {
    CheckResult& r;
    Clock::time_point t0 = Clock::now();
    explicit Scope(CheckResult& res) : r(res) {}
    ~Scope() { r.seconds = std::chrono::duration<double>(Clock::now() - t0).count(); }
};

CheckResult start(int id, const char* name) {
    CheckResult r;
    r.id = id;
    r.name = name;
    return r;
}

int scaled(double base, double scale, int floor_) {
    return std::max(floor_, static_cast<int>(std::lround(base * scale)));
}

std::string num(double v) {
    std::ostringstream os;
    os.precision(4);
    os << v;
    return os.str();
}

Params params_with(const RunConfig& cfg, int d, int64_t delta, double gamma = 0) {
    RunConfig c = cfg;
    if (gamma > 0 && !c.overrides.count("gamma")) c.overrides["gamma"] = num(gamma);
    return c.params(d, delta);
}

Point random_point(CounterRng& rng, int d, int64_t delta) {
    Point p(d);
    for (auto& c : p) c = 1 + static_cast<int64_t>(rng.below(static_cast<uint64_t>(delta)));
    return p;
}

std::vector<Point> grid(int d, int64_t delta) {
    std::vector<Point> out;
    Point p(d, 1);
    while (true) {
        out.push_back(p);
        int i = 0;
        while (i < d && p[i] == delta) p[i++] = 1;
        if (i == d) return out;
        ++p[i];
    }
}

// Calls fn(y) for every grid point y of [1, delta]^d with dist(x, y) <= r.
template <class F>
void for_ball(const Point& x, double r, int64_t delta, F&& fn) {
    Point y = x;
    double r2 = r * r;
    auto rec = [&](auto&& self, size_t i, double left) -> void {
        if (i == x.size()) {
            fn(y);
            return;
        }
        int64_t span = static_cast<int64_t>(std::floor(std::sqrt(std::max(0.0, left)) + 1e-9));
        for (int64_t c = std::max<int64_t>(1, x[i] - span); c <= std::min(delta, x[i] + span); ++c) {
            double t = static_cast<double>(c - x[i]) * (c - x[i]);
            if (t > left + 1e-9) continue;
            y[i] = c;
            self(self, i + 1, left - t);
        }
        y[i] = x[i];
    };
    rec(rec, 0, r2);
}

bool close_le(double a, double b) { return a <= b * (1 + 1e-9) + 1e-9; }

void finish(CheckResult& r, uint64_t violations, const std::string& detail) {
    r.status = violations == 0 ? Status::pass : Status::fail;
    r.detail = "violations=" + std::to_string(violations) + " " + detail;
}

double opt1(const WeightedSet& x, const std::vector<uint64_t>& ids) {
    if (ids.empty()) return 0;
    size_t d = x.at(ids[0]).p.size();
    std::vector<long double> sum(d, 0);
    long double w = 0;
    for (auto id : ids) {
        const auto& e = x.at(id);
        w += e.w;
        for (size_t i = 0; i < d; ++i) sum[i] += e.w * static_cast<long double>(e.p[i]);
    }
    long double c = 0;
    for (auto id : ids) {
        const auto& e = x.at(id);
        long double q = 0;
        for (size_t i = 0; i < d; ++i) {
            long double t = e.p[i] - sum[i] / w;
            q += t * t;
        }
        c += e.w * q;
    }
    return static_cast<double>(c);
}

// Clustered random dataset for the index-level checks.
WeightedSet clustered_points(CounterRng& rng, int n, int d, int64_t delta, int clusters) {
    std::vector<Point> centers;
    for (int i = 0; i < clusters; ++i) centers.push_back(random_point(rng, d, delta));
    WeightedSet x;
    double spread = std::max(1.0, delta / 32.0);
    for (int i = 0; i < n; ++i) {
        const Point& c = centers[rng.below(centers.size())];
        Point p(d);
        for (int j = 0; j < d; ++j) {
            double u1 = std::max(1e-12, rng.uniform()), u2 = rng.uniform();
            double g = std::sqrt(-2 * std::log(u1)) * std::cos(2 * M_PI * u2);
            p[j] = std::clamp<int64_t>(std::llround(c[j] + spread * g), 1, delta);
        }
        x.insert(static_cast<uint64_t>(i), p, 1.0 + static_cast<double>(rng.below(3)));
    }
    return x;
}

}  // namespace

CheckResult check_hash_diameter(const CheckOptions& o) {
    CheckResult r = start(1, "hashing.diameter");
    Scope sc(r);
    uint64_t viol = 0, pairs = 0, nocolor = 0;
    const int64_t delta = 16;
    for (int d = 1; d <= 3; ++d) {
        auto g = grid(d, delta);
        Params p = params_with(o.cfg, d, delta);
        for (double rho : {2.0, 4.0, 8.0}) {
            ConsistentHash h(p, rho, derive_seed(o.cfg.seed, "diameter", d * 100 + static_cast<int>(rho)));
            std::unordered_map<HashKey, std::vector<const Point*>, VecHash> buckets;
            for (const auto& pt : g) {
                auto key = h.try_eval(pt);
                if (!key) {
                    ++nocolor;
                    continue;
                }
                buckets[*key].push_back(&pt);
            }
            for (const auto& [key, pts] : buckets)
                for (size_t i = 0; i < pts.size(); ++i)
                    for (size_t j = i + 1; j < pts.size(); ++j) {
                        ++pairs;
                        if (dist2(*pts[i], *pts[j]) > rho * rho * (1 + 1e-12)) ++viol;
                    }
        }
    }
    finish(r, viol, "same_bucket_pairs=" + std::to_string(pairs) + " nocolor=" + std::to_string(nocolor));
    return r;
}

CheckResult check_hash_consistency(const CheckOptions& o) {
    CheckResult r = start(2, "hashing.consistency");
    Scope sc(r);
    struct Cfg {
        int d;
        double gamma;  // 0 keeps the configured value
        double rho_mult;
    };
    const Cfg cfgs[] = {{2, 0, 8}, {3, 6, 4}, {8, 16, 1}};
    const int64_t delta = 1024;
    // The query budget is spread over the seeds.
    const int seeds = scaled(20, o.scale, 2), queries = std::max(10, scaled(1000, o.scale, 20) / seeds);
    uint64_t over = 0, nocolor = 0, phi_over = 0;
    size_t max_realized = 0;
    std::ostringstream det;
    for (const auto& c : cfgs) {
        Params p = params_with(o.cfg, c.d, delta, c.gamma);
        double rho = c.rho_mult * p.gamma;
        size_t worst = 0;
        for (int s = 0; s < seeds; ++s) {
            ConsistentHash h(p, rho, derive_seed(o.cfg.seed, "consistency", c.d * 1000 + s));
            CounterRng rng(o.cfg.seed, "consistency-queries", c.d * 1000 + s);
            for (int q = 0; q < queries; ++q) {
                Point x = random_point(rng, c.d, delta);
                std::unordered_set<HashKey, VecHash> realized;
                for_ball(x, rho / p.gamma, delta, [&](const Point& y) {
                    auto key = h.try_eval(y);
                    if (key) realized.insert(*key);
                    else ++nocolor;
                });
                worst = std::max(worst, realized.size());
                if (realized.size() > static_cast<size_t>(p.lambda_cap)) ++over;
                if (h.ball_buckets(x).size() > static_cast<size_t>(p.lambda_cap)) ++phi_over;
            }
        }
        max_realized = std::max(max_realized, worst);
        det << " d" << c.d << ":max_realized=" << worst << "/cap=" << p.lambda_cap;
    }
    uint64_t viol = over + nocolor + phi_over;
    finish(r, viol,
           "over_cap=" + std::to_string(over) + " nocolor=" + std::to_string(nocolor) +
               " phi_over_cap=" + std::to_string(phi_over) + " seeds=" + std::to_string(seeds) +
               " queries_per_seed=" + std::to_string(queries) + det.str());
    return r;
}

CheckResult check_phi_sandwich(const CheckOptions& o) {
    CheckResult r = start(3, "hashing.phi_sandwich");
    Scope sc(r);
    uint64_t left = 0, right = 0, nocolor = 0, checked = 0;
    const int64_t delta = 16;
    for (int d = 1; d <= 3; ++d) {
        auto g = grid(d, delta);
        Params p = params_with(o.cfg, d, delta);
        for (double mult : {1.0, 2.0, 4.0}) {
            double rho = mult * p.gamma;
            ConsistentHash h(p, rho, derive_seed(o.cfg.seed, "sandwich", d * 100 + static_cast<int>(mult)));
            std::map<Point, HashKey> key;
            std::unordered_map<HashKey, std::vector<const Point*>, VecHash> members;
            for (const auto& pt : g) {
                auto k = h.try_eval(pt);
                if (!k) {
                    ++nocolor;
                    continue;
                }
                key[pt] = *k;
                members[*k].push_back(&pt);
            }
            for (const auto& x : g) {
                auto phi = h.ball_buckets(x);
                std::unordered_set<HashKey, VecHash> set(phi.begin(), phi.end());
                for_ball(x, rho / p.gamma, delta, [&](const Point& y) {
                    auto it = key.find(y);
                    if (it != key.end() && !set.count(it->second)) ++left;
                });
                for (const auto& z : phi) {
                    auto it = members.find(z);
                    if (it == members.end()) continue;
                    double best = std::numeric_limits<double>::infinity();
                    for (const Point* y : it->second) best = std::min(best, dist2(x, *y));
                    if (best > 4 * rho * rho * (1 + 1e-12)) ++right;
                }
                ++checked;
            }
        }
    }
    finish(r, left + right + nocolor,
           "ball_not_in_phi=" + std::to_string(left) + " phi_bucket_too_far=" + std::to_string(right) +
               " nocolor=" + std::to_string(nocolor) + " queries=" + std::to_string(checked));
    return r;
}

namespace {

struct AnnRun {
    std::vector<Point> answers;
    uint64_t viol = 0, queries = 0;
    double worst = 0;
};

AnnRun ann_sequence(const Params& p, uint64_t seed, int ops) {
    auto hl = std::make_shared<const HashLevels>(p, derive_seed(seed, "ann-levels"));
    CenterIndex idx(hl);
    CounterRng rng(seed, "ann-ops");
    std::vector<Point> s;
    std::set<Point> in;
    AnnRun out;
    const double bound = 6 * p.gamma;
    for (int i = 0; i < ops; ++i) {
        bool ins = s.size() < 2 || (s.size() < 150 && rng.uniform() < 0.55);
        if (ins) {
            Point c = random_point(rng, p.d, p.delta);
            if (in.insert(c).second) {
                idx.insert(c, c, 1.0);
                s.push_back(c);
            }
        } else {
            size_t j = rng.below(s.size());
            idx.erase(s[j]);
            in.erase(s[j]);
            s[j] = s.back();
            s.pop_back();
        }
        if (s.size() < 2) continue;
        Point qs[2] = {random_point(rng, p.d, p.delta), s[rng.below(s.size())]};
        for (const auto& x : qs) {
            auto ans = ann_query(idx, x, true);
            ++out.queries;
            double best = brute_nn(x, s, true).second;
            if (!ans || *ans == x || !in.count(*ans)) {
                ++out.viol;
                out.answers.push_back({});
                continue;
            }
            double got = dist(x, *ans);
            out.worst = std::max(out.worst, got / best);
            if (got > bound * best * (1 + 1e-12)) ++out.viol;
            out.answers.push_back(*ans);
        }
    }
    return out;
}

}  // namespace

CheckResult check_ann_ratio(const CheckOptions& o) {
    CheckResult r = start(4, "range.ann_ratio");
    Scope sc(r);
    const int ops = scaled(10000, o.scale, 200);
    uint64_t viol = 0, queries = 0, nondet = 0;
    double worst = 0;
    std::ostringstream det;
    for (int d : {2, 4}) {
        Params p = params_with(o.cfg, d, 256);
        uint64_t seed = derive_seed(o.cfg.seed, "ann", d);
        AnnRun a = ann_sequence(p, seed, ops);
        AnnRun b = ann_sequence(p, seed, ops);
        if (a.answers != b.answers) ++nondet;
        viol += a.viol;
        queries += a.queries;
        worst = std::max(worst, a.worst);
    }
    finish(r, viol + nondet,
           "queries=" + std::to_string(queries) + " worst_ratio=" + num(worst) +
               " nondeterministic_runs=" + std::to_string(nondet));
    return r;
}

CheckResult check_indicators(const CheckOptions& o) {
    CheckResult r = start(5, "range.indicators");
    Scope sc(r);
    const int ops = scaled(1000, o.scale, 100);
    Params p = params_with(o.cfg, 2, 1024);
    auto hl = std::make_shared<const HashLevels>(p, derive_seed(o.cfg.seed, "indicator-levels"));
    NeighborBits nb(hl);
    CounterRng rng(o.cfg.seed, "indicator-ops");
    const int top = hl->top();
    struct Cached {
        std::vector<HashKey> own;
        std::vector<std::unordered_set<HashKey, VecHash>> ball;
    };
    std::map<Point, Cached> cache;
    std::map<Point, std::vector<bool>> shadow;
    std::vector<Point> s;
    uint64_t flip_err = 0, recompute_err = 0, two_sided = 0, dhat_err = 0, probes = 0;
    const double factor = 2 * (1 + p.gamma);
    auto apply = [&](const std::vector<BitFlip>& flips) {
        for (const auto& f : flips) {
            auto it = shadow.find(f.center);
            if (it == shadow.end() || f.level < 1 || f.level > top || it->second[f.level] == f.bit) {
                ++flip_err;
                continue;
            }
            it->second[f.level] = f.bit;
        }
    };
    for (int step = 0; step < ops; ++step) {
        bool ins = s.size() < 2 || (s.size() < 60 && rng.uniform() < 0.55);
        if (ins) {
            // Half the insertions land near an existing center so low levels flip too.
            Point c = s.empty() || rng.uniform() < 0.5 ? random_point(rng, p.d, p.delta) : s[rng.below(s.size())];
            if (nb.contains(c))
                for (auto& v : c) v = std::clamp<int64_t>(v + static_cast<int64_t>(rng.below(9)) - 4, 1, p.delta);
            if (nb.contains(c)) continue;
            Cached cc;
            for (int j = 0; j <= top; ++j) {
                cc.own.push_back(hl->key(j, c));
                auto b = hl->ball(j, c);
                cc.ball.emplace_back(b.begin(), b.end());
            }
            cache[c] = std::move(cc);
            shadow[c] = std::vector<bool>(top + 1, false);
            apply(nb.insert(c));
            s.push_back(c);
        } else {
            size_t j = rng.below(s.size());
            Point c = s[j];
            shadow.erase(c);
            cache.erase(c);
            apply(nb.erase(c));
            s[j] = s.back();
            s.pop_back();
        }
        for (const auto& c : s) {
            const Cached& me = cache.at(c);
            std::vector<bool> truth(top + 1, false);
            for (int j = 1; j <= top; ++j)
                for (const auto& t : s)
                    if (t != c && me.ball[j].count(cache.at(t).own[j])) {
                        truth[j] = true;
                        break;
                    }
            auto bits = nb.bits(c);
            if (bits.size() != truth.size()) {
                ++recompute_err;
                continue;
            }
            for (int j = 1; j <= top; ++j) {
                if (bits[j] != truth[j]) ++recompute_err;
                if (shadow.at(c)[j] != bits[j]) ++flip_err;
            }
            if (s.size() < 2) continue;
            double dd = brute_nn(c, s, true).second;
            std::vector<double> gammas = {0.5};
            for (int j = 0; j <= top + 1; ++j) gammas.push_back(std::ldexp(1.0, j));
            gammas.push_back(1 + rng.uniform() * p.aspect());
            for (double g : gammas) {
                ++probes;
                bool ind = nb.indicator(c, g);
                if (dd <= g && !ind) ++two_sided;
                if (dd > factor * g && ind) ++two_sided;
            }
            double dh = nb.dist_hat(c);
            if (dh < dd * (1 - 1e-12) || dh > factor * dd * (1 + 1e-12)) ++dhat_err;
        }
    }
    finish(r, flip_err + recompute_err + two_sided + dhat_err,
           "flip_mismatch=" + std::to_string(flip_err) + " recompute_mismatch=" + std::to_string(recompute_err) +
               " two_sided=" + std::to_string(two_sided) + " dist_hat=" + std::to_string(dhat_err) +
               " probes=" + std::to_string(probes));
    return r;
}

CheckResult check_ball_1means(const CheckOptions& o) {
    CheckResult r = start(6, "range.ball_1means");
    Scope sc(r);
    const int queries = scaled(500, o.scale, 50);
    Params p = params_with(o.cfg, 2, 1024);
    auto hl = std::make_shared<const HashLevels>(p, derive_seed(o.cfg.seed, "ball-levels"));
    CounterRng rng(o.cfg.seed, "ball-data");
    WeightedSet x = clustered_points(rng, 3000, p.d, p.delta, 8);
    PointIndex idx(hl);
    for (const auto& [id, e] : x.entries()) idx.insert(id, e.p, e.w);
    const double outer = hl->outer_factor(), c_opt = 4;
    uint64_t inner_miss = 0, outer_out = 0, weight_err = 0, est_err = 0, opt_err = 0, nonempty = 0;
    double worst_opt = 0;
    for (int q = 0; q < queries; ++q) {
        Point c = rng.uniform() < 0.5 ? x.at(rng.below(x.size())).p : random_point(rng, p.d, p.delta);
        double rad = std::exp2(-1 + rng.uniform() * (std::log2(p.aspect()) + 1));
        auto ans = ball_1means(idx, c, rad, true);
        std::set<uint64_t> in_b(ans.witness->begin(), ans.witness->end());
        double wb = 0;
        for (const auto& [id, e] : x.entries()) {
            double dd = dist2(e.p, c);
            bool member = in_b.count(id) != 0;
            if (!member && dd <= rad * rad) ++inner_miss;
            if (member && dd > outer * outer * rad * rad * (1 + 1e-12)) ++outer_out;
            if (member) wb += e.w;
        }
        if (std::abs(wb - ans.b) > 1e-9 * std::max(1.0, wb)) ++weight_err;
        if (wb <= 0) continue;
        ++nonempty;
        double cs = 0, cx = 0;
        for (auto id : in_b) {
            const auto& e = x.at(id);
            cs += e.w * dist2(e.p, ans.c_star);
            cx += e.w * dist2(e.p, c);
        }
        auto rel = [](double a, double b) { return std::abs(a - b) > 1e-9 * std::max(1.0, b); };
        if (rel(ans.cost_at_cstar, cs) || rel(ans.cost_at_x, cx)) ++est_err;
        double o1 = opt1(x, std::vector<uint64_t>(in_b.begin(), in_b.end()));
        if (o1 > 0) worst_opt = std::max(worst_opt, cs / o1);
        if (!close_le(cs, c_opt * o1)) ++opt_err;
    }
    finish(r, inner_miss + outer_out + weight_err + est_err + opt_err,
           "inner_missing=" + std::to_string(inner_miss) + " outside_outer=" + std::to_string(outer_out) +
               " weight=" + std::to_string(weight_err) + " estimate=" + std::to_string(est_err) +
               " opt=" + std::to_string(opt_err) + " worst_cost_over_opt1=" + num(worst_opt) +
               " nonempty_queries=" + std::to_string(nonempty));
    return r;
}

std::vector<CheckResult> check_assignment(const CheckOptions& o) {
    CheckResult part = start(7, "assignment.partition_equidistance");
    CheckResult weight = start(8, "assignment.weight_conservation");
    Scope sc(part);
    const int ops = scaled(2000, o.scale, 100);
    Params p = params_with(o.cfg, 2, 256);
    Assignment asg(p, derive_seed(o.cfg.seed, "assignment-audit"));
    CounterRng rng(o.cfg.seed, "assignment-ops");
    WeightedSet x;
    std::vector<Point> s;
    uint64_t next_id = 0;
    uint64_t dup = 0, missing = 0, extra = 0, eq_low = 0, eq_high = 0, sigma_bad = 0, orphan = 0;
    uint64_t w_viol = 0, audits = 0;
    double worst_rel = 0;
    const double b = 3 * p.gamma;
    std::vector<Point> anchors;
    for (int i = 0; i < 6; ++i) anchors.push_back(random_point(rng, p.d, p.delta));
    for (int step = 0; step < ops; ++step) {
        double u = rng.uniform();
        if (u < 0.45 || x.empty()) {
            const Point& a = anchors[rng.below(anchors.size())];
            Point q(p.d);
            for (int j = 0; j < p.d; ++j)
                q[j] = std::clamp<int64_t>(a[j] + static_cast<int64_t>(rng.below(41)) - 20, 1, p.delta);
            if (rng.uniform() < 0.1) q = random_point(rng, p.d, p.delta);
            double w = 0.5 + rng.uniform() * 2;
            x.insert(next_id, q, w);
            asg.insert_point(next_id, q, w);
            ++next_id;
        } else if (u < 0.7) {
            auto it = x.entries().begin();
            std::advance(it, rng.below(x.size()));
            uint64_t id = it->first;
            x.erase(id);
            asg.erase_point(id);
        } else if (u < 0.88 || s.empty()) {
            Point c = rng.uniform() < 0.6 && !x.empty() ? std::next(x.entries().begin(), rng.below(x.size()))->second.p
                                                       : random_point(rng, p.d, p.delta);
            if (std::find(s.begin(), s.end(), c) != s.end()) continue;
            asg.insert_center(c);
            s.push_back(c);
        } else {
            size_t j = rng.below(s.size());
            asg.erase_center(s[j]);
            s[j] = s.back();
            s.pop_back();
        }
        orphan += asg.orphan_f_entries();
        if (s.empty()) continue;
        ++audits;
        std::set<Point> sset(s.begin(), s.end());
        std::map<uint64_t, int> seen;
        for (const auto& pt : asg.partition()) {
            if (!sset.count(pt.sigma)) ++sigma_bad;
            double lo = std::pow(b, pt.level - 1) / (2 * p.gamma), hi = 1.5 * std::pow(b, pt.level);
            for (auto id : pt.ids) {
                if (++seen[id] > 1) ++dup;
                if (!x.contains(id)) {
                    ++extra;
                    continue;
                }
                const Point& q = x.at(id).p;
                double ds = brute_nn(q, s, false).second;
                double dsig = dist(q, pt.sigma);
                if (ds < lo * (1 - 1e-12)) ++eq_low;
                if (dsig < ds * (1 - 1e-12) || dsig > hi * (1 + 1e-12)) ++eq_high;
            }
        }
        for (const auto& [id, e] : x.entries()) {
            bool center = sset.count(e.p) != 0;
            if (center && seen.count(id)) ++extra;
            if (!center && !seen.count(id)) ++missing;
        }
        double ws = 0;
        for (const auto& c : s) ws += asg.weight(c);
        double rel = std::abs(ws - x.total_weight()) / std::max(1e-300, x.total_weight());
        if (x.empty()) rel = std::abs(ws);
        worst_rel = std::max(worst_rel, rel);
        if (rel > 1e-9) ++w_viol;
    }
    finish(part, dup + missing + extra + eq_low + eq_high + sigma_bad + orphan,
           "duplicate=" + std::to_string(dup) + " missing=" + std::to_string(missing) +
               " extra=" + std::to_string(extra) + " equidistance_low=" + std::to_string(eq_low) +
               " equidistance_high=" + std::to_string(eq_high) + " sigma_not_center=" + std::to_string(sigma_bad) +
               " orphan_f=" + std::to_string(orphan) + " audits=" + std::to_string(audits));
    finish(weight, w_viol, "worst_relative_error=" + num(worst_rel) + " audits=" + std::to_string(audits));
    part.seconds = std::chrono::duration<double>(Clock::now() - sc.t0).count();
    return {part, weight};
}

CheckResult check_d2_sampling(const CheckOptions& o) {
    CheckResult r = start(9, "assignment.d2_dominance");
    Scope sc(r);
    const int draws = scaled(100000, o.scale, 5000);
    uint64_t below_bound = 0, exact_below = 0, inconsistent = 0, points = 0;
    double min_ratio = std::numeric_limits<double>::infinity();
    for (int inst = 0; inst < 5; ++inst) {
        int d = 1 + inst % 3;
        Params p = params_with(o.cfg, d, 64);
        const double gs = std::pow(3 * p.gamma, -4.0) / 4;
        CounterRng rng(o.cfg.seed, "d2-instance", inst);
        Assignment asg(p, derive_seed(o.cfg.seed, "d2-assignment", inst));
        WeightedSet x = clustered_points(rng, 10 + 4 * inst, d, 64, 3);
        for (const auto& [id, e] : x.entries()) asg.insert_point(id, e.p, e.w);
        std::vector<Point> s;
        int ns = 1 + inst % 3;
        for (int i = 0; i < ns; ++i) {
            Point c = i == 0 ? x.at(0).p : random_point(rng, d, 64);
            if (std::find(s.begin(), s.end(), c) != s.end()) continue;
            s.push_back(c);
            asg.insert_center(c);
        }
        double total = cost(x, s);
        std::map<uint64_t, uint64_t> freq;
        CounterRng draw(o.cfg.seed, "d2-draws", inst);
        for (int i = 0; i < draws; ++i)
            if (auto id = asg.d2_sample(draw)) ++freq[*id];
        for (const auto& [id, e] : x.entries()) {
            double dd = brute_nn(e.p, s, false).second;
            if (dd == 0) continue;
            ++points;
            double ideal = e.w * dd * dd / total;
            double q = gs * ideal;
            double f = static_cast<double>(freq[id]) / draws;
            if (f < q - 3 * std::sqrt(q * (1 - q) / draws)) ++below_bound;
            double pe = asg.sample_probability(id);
            min_ratio = std::min(min_ratio, pe / ideal);
            if (pe < q * (1 - 1e-9)) ++exact_below;
            double sd = std::sqrt(pe * (1 - pe) / draws);
            if (std::abs(f - pe) > 5 * sd + 1.0 / draws) ++inconsistent;
        }
    }
    finish(r, below_bound + exact_below + inconsistent,
           "empirical_below_bound=" + std::to_string(below_bound) + " exact_below_bound=" +
               std::to_string(exact_below) + " empirical_vs_exact=" + std::to_string(inconsistent) +
               " points=" + std::to_string(points) + " min_exact_over_ideal=" + num(min_ratio));
    return r;
}

namespace {

struct Instance {
    WeightedSet x;
    std::vector<Point> s;
};

Instance small_instance(CounterRng& rng, int d, int64_t delta, int nx, int ns) {
    Instance in;
    in.x = clustered_points(rng, nx, d, delta, 1 + static_cast<int>(rng.below(4)));
    std::set<Point> s;
    while (static_cast<int>(s.size()) < ns) {
        if (rng.uniform() < 0.5) s.insert(in.x.at(rng.below(in.x.size())).p);
        else s.insert(random_point(rng, d, delta));
    }
    in.s.assign(s.begin(), s.end());
    return in;
}

}  // namespace

CheckResult check_restricted(const CheckOptions& o) {
    CheckResult r = start(10, "subroutines.restricted");
    Scope sc(r);
    const int n = scaled(100, o.scale, 10);
    const double bound = 50;
    uint64_t viol = 0;
    std::vector<double> ratios;
    for (int i = 0; i < n; ++i) {
        CounterRng rng(o.cfg.seed, "restricted-instance", i);
        int ns = 2 + static_cast<int>(rng.below(9));
        int rr = 1 + static_cast<int>(rng.below(std::min(3, ns - 1)));
        Params p = params_with(o.cfg, 2, 64);
        Instance in = small_instance(rng, 2, 64, 20 + static_cast<int>(rng.below(41)), ns);
        ClusterState st(p, derive_seed(o.cfg.seed, "restricted-state", i));
        for (const auto& [id, e] : in.x.entries()) st.insert_point(id, e.p, e.w);
        for (const auto& c : in.s) st.insert_center(c);
        CounterRng alg(o.cfg.seed, "restricted-alg", i);
        auto removed = restricted_kmeans(st, rr, alg);
        std::set<Point> keep(in.s.begin(), in.s.end());
        for (const auto& c : removed) keep.erase(c);
        if (static_cast<int>(removed.size()) != rr || static_cast<int>(keep.size()) != ns - rr) {
            ++viol;
            continue;
        }
        double got = cost(in.x, std::vector<Point>(keep.begin(), keep.end()));
        double opt = brute_opt_restricted(in.x, in.s, rr).cost;
        double ratio = opt > 0 ? got / opt : (got > 0 ? std::numeric_limits<double>::infinity() : 1.0);
        ratios.push_back(ratio);
        if (ratio > bound) ++viol;
    }
    finish(r, viol,
           "instances=" + std::to_string(n) + " median_ratio=" + num(quantile(ratios, 0.5)) +
               " max_ratio=" + num(ratios.empty() ? 0 : *std::max_element(ratios.begin(), ratios.end())));
    return r;
}

CheckResult check_augmented(const CheckOptions& o) {
    CheckResult r = start(11, "subroutines.augmented");
    Scope sc(r);
    const int n = scaled(50, o.scale, 10);
    const double bound = 32;
    RunConfig pf = o.cfg;
    pf.preset = Preset::paper_faithful;
    int fails = 0;
    int t_used = 0;
    size_t max_added = 0;
    std::vector<double> ratios;
    for (int i = 0; i < n; ++i) {
        CounterRng rng(o.cfg.seed, "augmented-instance", i);
        int d = 1 + i % 3;
        Params p = params_with(pf, d, 16);
        int a = 1 + static_cast<int>(rng.below(2));
        Instance in = small_instance(rng, d, 16, 10 + static_cast<int>(rng.below(31)), 1 + static_cast<int>(rng.below(3)));
        ClusterState st(p, derive_seed(o.cfg.seed, "augmented-state", i));
        for (const auto& [id, e] : in.x.entries()) st.insert_point(id, e.p, e.w);
        for (const auto& c : in.s) st.insert_center(c);
        int t = augment_sample_count(p, 1.0, 0);
        t_used = std::max(t_used, t);
        CounterRng alg(o.cfg.seed, "augmented-alg", i);
        auto added = augmented_kmeans(st, a, t, alg);
        max_added = std::max(max_added, added.size());
        std::vector<Point> all = in.s;
        all.insert(all.end(), added.begin(), added.end());
        std::vector<Point> cand;
        for (const auto& [id, e] : in.x.entries()) cand.push_back(e.p);
        double got = cost(in.x, all);
        double opt = brute_opt_augmented(in.x, in.s, a, cand).cost;
        double ratio = opt > 0 ? got / opt : (got > 0 ? std::numeric_limits<double>::infinity() : 1.0);
        ratios.push_back(ratio);
        if (ratio > bound) ++fails;
    }
    double pass_rate = 1.0 - static_cast<double>(fails) / n;
    r.status = pass_rate >= 0.95 ? Status::pass : Status::fail;
    r.detail = "pass_rate=" + num(pass_rate) + " instances=" + std::to_string(n) + " t=" + std::to_string(t_used) +
               " max_added=" + std::to_string(max_added) +
               " median_ratio=" + num(quantile(ratios, 0.5)) +
               " max_ratio=" + num(*std::max_element(ratios.begin(), ratios.end()));
    return r;
}

std::vector<CheckResult> check_make_robust(const CheckOptions& o, ControllerTotals& totals) {
    CheckResult r = start(12, "controller.makerobust_certificates");
    Scope sc(r);
    const uint64_t target = static_cast<uint64_t>(scaled(200, o.scale, 30));
    const char* modes[] = {"clustered", "sliding-window", "adversarial-churn", "uniform"};
    uint64_t calls = 0, bad = 0, streams = 0;
    std::string first;
    std::ostringstream det;
    for (int round = 0; round < 8 && calls < target; ++round) {
        WorkloadSpec ws;
        ws.mode = modes[round % 4];
        ws.n = static_cast<uint64_t>(scaled(1500, std::max(o.scale, 0.2), 200));
        ws.d = 2;
        ws.delta = 1024;
        ws.k = round % 2 ? 8 : 4;
        ws.seed = derive_seed(o.cfg.seed, "certificate-stream", round);
        UpdateStream stream = gen_workload(ws);
        ControllerConfig cc = o.cfg.controller(ws.d, ws.delta, ws.k);
        cc.witness = true;
        DynamicKMeans ctl(cc);
        uint64_t local = 0;
        ctl.set_observer([&](const MakeRobustRecord& rec) {
            ++local;
            auto errs = check_certificate(rec, ctl.points(), cc.sched);
            if (!errs.empty()) {
                bad += errs.size();
                if (first.empty()) first = errs.front();
            }
        });
        for (const auto& op : stream.ops) ctl.update(op);
        totals.add(ctl.stats());
        calls += local;
        ++streams;
        det << " " << ws.mode << ":" << local;
    }
    finish(r, bad,
           "calls=" + std::to_string(calls) + " streams=" + std::to_string(streams) + det.str() +
               (first.empty() ? "" : " first_violation=\"" + first + "\""));
    if (calls < target) {
        r.status = Status::fail;
        r.detail += " too_few_calls";
    }
    r.seconds = std::chrono::duration<double>(Clock::now() - sc.t0).count();
    return {r};
}

CheckResult check_calls_once(const ControllerTotals& t, double chain_bound) {
    CheckResult r = start(13, "controller.calls_once_chain");
    finish(r, t.calls_once + t.chain,
           "calls_once=" + std::to_string(t.calls_once) + " chain=" + std::to_string(t.chain) +
               " max_chain=" + std::to_string(t.max_chain) + " chain_bound=" + num(chain_bound) +
               " t_increase=" + std::to_string(t.t_increase) + " makerobust_calls=" + std::to_string(t.calls) +
               " runs=" + std::to_string(t.streams));
    return r;
}

namespace {

double sm_double(const KeyValues& kv, const char* key) {
    auto it = kv.find(key);
    return it == kv.end() ? 0.0 : std::stod(it->second);
}

void add_summary(ControllerTotals& t, const KeyValues& kv) {
    t.calls += static_cast<uint64_t>(sm_double(kv, "makerobust_total"));
    t.calls_once += static_cast<uint64_t>(sm_double(kv, "calls_once_violations"));
    t.chain += static_cast<uint64_t>(sm_double(kv, "chain_violations"));
    t.t_increase += static_cast<uint64_t>(sm_double(kv, "t_increase_violations"));
    t.max_chain = std::max(t.max_chain, static_cast<int>(sm_double(kv, "max_chain")));
    ++t.streams;
}

}  // namespace

std::vector<CheckResult> check_end_to_end(const CheckOptions& o, ControllerTotals& totals) {
    CheckResult q = start(14, "controller.end_to_end");
    CheckResult s = start(15, "controller.sublinearity");
    Scope sc(q);
    RunConfig cfg = o.cfg;
    cfg.preset = Preset::practical;
    cfg.record_time = true;
    const uint64_t n_big = static_cast<uint64_t>(scaled(10000, o.scale, 500));
    const uint64_t n_small = std::max<uint64_t>(100, n_big / 10);
    WorkloadSpec ws;
    ws.mode = "clustered";
    ws.d = 2;
    ws.delta = 1024;
    ws.seed = derive_seed(o.cfg.seed, "end-to-end");
    uint64_t viol = 0;
    std::ostringstream det;
    double time_big = 0, base_big = 0;
    for (int k : {5, 20}) {
        ws.k = k;
        ws.n = n_big;
        RunResult res = run_stream(gen_workload(ws), cfg, RunMode::direct, 100);
        add_summary(totals, res.summary);
        double p50 = sm_double(res.summary, "ratio_p50"), mx = sm_double(res.summary, "ratio_max");
        double live = std::max(2.0, sm_double(res.summary, "n_live_max"));
        double rec = sm_double(res.summary, "amortized_recourse");
        double mr = sm_double(res.summary, "amortized_makerobust");
        double rec_bound = 10 * std::log2(live), mr_bound = 5 * std::log2(std::sqrt(2.0) * ws.delta);
        bool ok = p50 <= 5 && mx <= 50 && rec <= rec_bound && mr <= mr_bound;
        if (!ok) ++viol;
        det << " k=" << k << ":ratio_p50=" << num(p50) << ",ratio_max=" << num(mx) << ",recourse=" << num(rec)
            << "/" << num(rec_bound) << ",makerobust=" << num(mr) << "/" << num(mr_bound);
        if (k == 5) {
            time_big = sm_double(res.summary, "amortized_time_us");
            base_big = sm_double(res.summary, "baseline_time_us_avg");
        }
    }
    finish(q, viol, "n=" + std::to_string(n_big) + det.str());
    q.seconds = std::chrono::duration<double>(Clock::now() - sc.t0).count();

    auto t0 = Clock::now();
    ws.k = 5;
    ws.n = n_small;
    RunResult small = run_stream(gen_workload(ws), cfg, RunMode::direct, 100);
    add_summary(totals, small.summary);
    double time_small = sm_double(small.summary, "amortized_time_us");
    double base_small = sm_double(small.summary, "baseline_time_us_avg");
    double growth = time_small > 0 ? time_big / time_small : 0;
    double base_growth = base_small > 0 ? base_big / base_small : 0;
    s.status = growth < 5 ? Status::pass : (growth < 10 ? Status::soft : Status::fail);
    s.detail = "time_growth=" + num(growth) + " baseline_growth=" + num(base_growth) + " n=" +
               std::to_string(n_small) + "->" + std::to_string(n_big) + " us_per_update=" + num(time_small) + "->" +
               num(time_big);
    s.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    return {q, s};
}

CheckResult check_sparsified(const CheckOptions& o) {
    CheckResult r = start(16, "sparsifier.contract");
    Scope sc(r);
    const uint64_t n = static_cast<uint64_t>(scaled(5000, o.scale, 300));
    WorkloadSpec ws;
    ws.mode = "clustered";
    ws.d = 2;
    ws.delta = 1024;
    ws.k = 5;
    ws.n = n;
    ws.seed = derive_seed(o.cfg.seed, "sparsified");
    UpdateStream stream = gen_workload(ws);
    SparsifierConfig cfg = o.cfg.sparsifier(ws.d, ws.delta, ws.k, n);
    if (!o.cfg.overrides.count("alpha")) {
        WorkloadSpec cal = ws;
        cal.n = std::max<uint64_t>(200, n / 10);
        cal.seed = derive_seed(o.cfg.seed, "sparsified-calibration");
        auto ratios = calibration_ratios(cfg, gen_workload(cal).ops);
        cfg.alpha = std::max(2.0, quantile(ratios, 0.99));
    }
    SparsifiedRunner run(cfg);
    uint64_t contract = 0, size_viol = 0;
    size_t max_u = 0;
    for (const auto& op : stream.ops) {
        run.update(op);
        if (!close_le(run.cost_u(), cfg.alpha * run.estimate())) ++contract;
        double live = std::max<double>(2, static_cast<double>(run.points().size()));
        double cap = cfg.c_u * ws.k * std::log2(live) * std::log2(live);
        max_u = std::max(max_u, run.sample().size());
        if (static_cast<double>(run.sample().size()) > std::max(cap, live)) ++size_viol;
    }
    double burst_bound = 10 * std::log2(static_cast<double>(n));
    uint64_t burst_viol = run.max_burst() > burst_bound ? 1 : 0;
    // A corrupted primary must be detected and replaced.
    run.corrupt_primary();
    double corrupted = run.ratio();
    int fault_resets = run.audit();
    bool recovered = close_le(run.cost_u(), cfg.alpha * run.estimate()) && (corrupted <= cfg.alpha || fault_resets > 0);
    finish(r, contract + size_viol + burst_viol + (recovered ? 0 : 1),
           "alpha=" + num(cfg.alpha) + " contract=" + std::to_string(contract) + " size=" +
               std::to_string(size_viol) + " max_sample=" + std::to_string(max_u) + " max_burst=" +
               std::to_string(run.max_burst()) + "/" + num(burst_bound) + " resets=" + std::to_string(run.resets()) +
               " corrupted_ratio=" + num(corrupted) + " fault_resets=" + std::to_string(fault_resets) + " verifiers=" + std::to_string(run.verifier_count()));
    return r;
}

CheckResult check_lemmas(const CheckOptions& o) {
    CheckResult r = start(17, "lemmas.projection_lazy");
    Scope sc(r);
    const int n = scaled(200, o.scale, 20);
    const int d = 2;
    const int64_t delta = 4;
    auto g = grid(d, delta);
    const int gn = static_cast<int>(g.size());
    auto opt_grid = [&](const WeightedSet& x, int k) {
        if (x.empty()) return 0.0;
        if (k >= gn) return 0.0;
        return brute_opt_restricted(x, g, gn - k).cost;
    };
    uint64_t proj_viol = 0, lazy_viol = 0;
    double proj_worst = 0, lazy_worst = 0;
    for (int i = 0; i < n; ++i) {
        CounterRng rng(o.cfg.seed, "lemma-projection", i);
        WeightedSet x;
        int nx = 3 + static_cast<int>(rng.below(8));
        for (int j = 0; j < nx; ++j) x.insert(j, random_point(rng, d, delta), 0.5 + rng.uniform() * 2);
        int k = 1 + static_cast<int>(rng.below(3));
        std::set<Point> cs;
        int nc = k + static_cast<int>(rng.below(4));
        while (static_cast<int>(cs.size()) < nc) cs.insert(random_point(rng, d, delta));
        std::vector<Point> c(cs.begin(), cs.end());
        double opt_c = static_cast<int>(c.size()) > k ? brute_opt_restricted(x, c, static_cast<int>(c.size()) - k).cost
                                                      : cost(x, c);
        double rhs = 2 * cost(x, c) + 8 * opt_grid(x, k);
        if (rhs > 0) proj_worst = std::max(proj_worst, opt_c / rhs);
        if (!close_le(opt_c, rhs)) ++proj_viol;
    }
    for (int i = 0; i < n; ++i) {
        CounterRng rng(o.cfg.seed, "lemma-lazy", i);
        WeightedSet x;
        int nx = 3 + static_cast<int>(rng.below(8));
        for (int j = 0; j < nx; ++j) x.insert(j, random_point(rng, d, delta), 1.0);
        int k = 1 + static_cast<int>(rng.below(3));
        int s = 1 + static_cast<int>(rng.below(3));
        WeightedSet y = x;
        uint64_t next = nx;
        for (int j = 0; j < s; ++j) {
            if (!y.empty() && rng.uniform() < 0.5) {
                auto it = y.entries().begin();
                std::advance(it, rng.below(y.size()));
                y.erase(it->first);
            } else {
                y.insert(next++, random_point(rng, d, delta), 1.0);
            }
        }
        double lhs = opt_grid(y, k + s), rhs = opt_grid(x, k);
        if (rhs > 0) lazy_worst = std::max(lazy_worst, lhs / rhs);
        if (!close_le(lhs, rhs)) ++lazy_viol;
    }
    finish(r, proj_viol + lazy_viol,
           "projection=" + std::to_string(proj_viol) + " lazy=" + std::to_string(lazy_viol) +
               " instances=" + std::to_string(n) + " projection_worst=" + num(proj_worst) +
               " lazy_worst=" + num(lazy_worst));
    return r;
}

const std::vector<std::string>& suite_names() {
    static const std::vector<std::string> names = {"hashing",    "range",      "assignment", "subroutines",
                                                   "controller", "sparsifier", "lemmas",     "all"};
    return names;
}

std::vector<CheckResult> run_suite(const std::string& suite, const CheckOptions& o) {
    if (std::find(suite_names().begin(), suite_names().end(), suite) == suite_names().end())
        throw UsageError("unknown suite: " + suite);
    std::vector<CheckResult> out;
    auto want = [&](const char* s) { return suite == "all" || suite == s; };
    // A check that throws is reported as a failure of every criterion it covers.
    auto run = [&](std::vector<std::pair<int, const char*>> ids, auto&& fn) {
        try {
            auto v = fn();
            out.insert(out.end(), v.begin(), v.end());
        } catch (const std::exception& e) {
            for (const auto& [id, name] : ids) {
                CheckResult r = start(id, name);
                r.detail = std::string("exception: ") + e.what();
                out.push_back(r);
            }
        }
    };
    auto one = [](CheckResult r) { return std::vector<CheckResult>{std::move(r)}; };
    if (want("hashing")) {
        run({{1, "hashing.diameter"}}, [&] { return one(check_hash_diameter(o)); });
        run({{2, "hashing.consistency"}}, [&] { return one(check_hash_consistency(o)); });
        run({{3, "hashing.phi_sandwich"}}, [&] { return one(check_phi_sandwich(o)); });
    }
    if (want("range")) {
        run({{4, "range.ann_ratio"}}, [&] { return one(check_ann_ratio(o)); });
        run({{5, "range.indicators"}}, [&] { return one(check_indicators(o)); });
        run({{6, "range.ball_1means"}}, [&] { return one(check_ball_1means(o)); });
    }
    if (want("assignment")) {
        run({{7, "assignment.partition_equidistance"}, {8, "assignment.weight_conservation"}}, [&] { return check_assignment(o); });
        run({{9, "assignment.d2_dominance"}}, [&] { return one(check_d2_sampling(o)); });
    }
    if (want("subroutines")) {
        run({{10, "subroutines.restricted"}}, [&] { return one(check_restricted(o)); });
        run({{11, "subroutines.augmented"}}, [&] { return one(check_augmented(o)); });
    }
    if (want("controller")) {
        ControllerTotals totals;
        run({{12, "controller.makerobust_certificates"}}, [&] { return check_make_robust(o, totals); });
        run({{14, "controller.end_to_end"}, {15, "controller.sublinearity"}}, [&] { return check_end_to_end(o, totals); });
        Params p = o.cfg.params(2, 1024);
        run({{13, "controller.calls_once_chain"}}, [&] { return one(check_calls_once(totals, std::log2(p.aspect()))); });
    }
    if (want("sparsifier")) run({{16, "sparsifier.contract"}}, [&] { return one(check_sparsified(o)); });
    if (want("lemmas")) run({{17, "lemmas.projection_lazy"}}, [&] { return one(check_lemmas(o)); });
    std::sort(out.begin(), out.end(), [](const CheckResult& a, const CheckResult& b) { return a.id < b.id; });
    return out;
}

}  // namespace dkm
