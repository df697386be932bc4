#include "dkm/subroutines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dkm {

ClusterState::ClusterState(const Params& params, uint64_t seed)
    : params_(params),
      levels_(std::make_shared<HashLevels>(params, derive_seed(seed, "range"))),
      xi_(levels_),
      asg_(params, derive_seed(seed, "assignment")),
      ann_(levels_),
      bits_(levels_) {}

std::vector<Point> ClusterState::locations() const {
    std::vector<Point> out;
    for (const auto& [p, c] : loc_count_) out.push_back(p);
    return out;
}

void ClusterState::insert_point(uint64_t id, const Point& p, double w) {
    if (static_cast<int>(p.size()) != params_.d) throw UsageError("point dimension mismatch");
    for (auto c : p)
        if (c < 1 || c > params_.delta) throw UsageError("coordinate outside [1, delta]");
    x_.insert(id, p, w);
    xi_.insert(id, p, w);
    asg_.insert_point(id, p, w);
    ++loc_count_[p];
}

void ClusterState::erase_point(uint64_t id) {
    Point p = x_.at(id).p;
    x_.erase(id);
    xi_.erase(id);
    asg_.erase_point(id);
    auto it = loc_count_.find(p);
    if (--it->second == 0) loc_count_.erase(it);
}

std::vector<BitFlip> ClusterState::insert_center(const Point& s) {
    if (!s_.insert(s).second) throw UsageError("center already present");
    asg_.insert_center(s);
    ann_.insert(s, s, 1.0);
    return bits_.insert(s);
}

std::vector<BitFlip> ClusterState::erase_center(const Point& s) {
    if (!s_.erase(s)) throw UsageError("center not present");
    asg_.erase_center(s);
    ann_.erase(s);
    return bits_.erase(s);
}

std::vector<Point> ClusterState::ordering() const {
    std::vector<std::pair<double, Point>> keyed;
    keyed.reserve(s_.size());
    for (const auto& c : s_) {
        double w = asg_.weight(c);
        double dh = bits_.dist_hat(c);
        double key = w > 0 ? w * dh * dh : 0.0;
        keyed.emplace_back(key, c);
    }
    std::sort(keyed.begin(), keyed.end());
    std::vector<Point> out;
    for (auto& [k, c] : keyed) out.push_back(std::move(c));
    return out;
}

std::optional<Point> ClusterState::ann(const Point& x, bool exclude_self) const {
    return ann_query(ann_, x, exclude_self);
}

double ClusterState::proxy_cost(const std::vector<Point>& subset) const {
    if (subset.empty()) throw UsageError("proxy cost needs a nonempty subset");
    double total = 0;
    for (const auto& s : s_) {
        const Point* best = &subset.front();
        double bd = std::numeric_limits<double>::infinity();
        for (const auto& c : subset) {
            double t = dist2(s, c);
            if (t < bd) {
                bd = t;
                best = &c;
            }
        }
        total += asg_.assigned_moments(s).cost_at(*best);
    }
    return total;
}

WeightedPoints merge_duplicates(const std::vector<Point>& pts, const std::vector<double>& w) {
    if (pts.size() != w.size()) throw UsageError("points and weights differ in length");
    std::map<Point, double> acc;
    for (size_t i = 0; i < pts.size(); ++i) acc[pts[i]] += w[i];
    WeightedPoints out;
    for (auto& [p, x] : acc) {
        out.pts.push_back(p);
        out.w.push_back(x);
    }
    return out;
}

double weighted_cost(const WeightedPoints& t, const std::vector<Point>& centers) {
    double c = 0;
    for (size_t i = 0; i < t.pts.size(); ++i) {
        double m = std::numeric_limits<double>::infinity();
        for (const auto& s : centers) m = std::min(m, dist2(t.pts[i], s));
        c += t.w[i] * m;
    }
    return c;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr size_t kFullScan = 256;

struct NearTable {
    std::vector<int> near;
    std::vector<double> d1, d2;
};

NearTable nearest_two(const WeightedPoints& t, const std::vector<Point>& c) {
    size_t n = t.pts.size();
    NearTable nt{std::vector<int>(n, -1), std::vector<double>(n, kInf), std::vector<double>(n, kInf)};
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < c.size(); ++j) {
            double d = dist2(t.pts[i], c[j]);
            if (d < nt.d1[i]) {
                nt.d2[i] = nt.d1[i];
                nt.d1[i] = d;
                nt.near[i] = static_cast<int>(j);
            } else if (d < nt.d2[i]) {
                nt.d2[i] = d;
            }
        }
    return nt;
}

double table_cost(const WeightedPoints& t, const NearTable& nt) {
    double c = 0;
    for (size_t i = 0; i < t.pts.size(); ++i) c += t.w[i] * nt.d1[i];
    return c;
}

// Best center to swap out for candidate q and the resulting cost.
std::pair<int, double> best_swap(const WeightedPoints& t, const NearTable& nt, size_t k, const Point& q) {
    double base = 0;
    std::vector<double> delta(k, 0.0);
    for (size_t i = 0; i < t.pts.size(); ++i) {
        double dq = dist2(t.pts[i], q);
        double keep = std::min(dq, nt.d1[i]);
        base += t.w[i] * keep;
        if (nt.near[i] >= 0) delta[nt.near[i]] += t.w[i] * (std::min(dq, nt.d2[i]) - keep);
    }
    int bj = 0;
    for (size_t j = 1; j < k; ++j)
        if (delta[j] < delta[bj]) bj = static_cast<int>(j);
    return {bj, base + delta[bj]};
}

size_t weighted_pick(const std::vector<double>& mass, CounterRng& rng) {
    double total = 0;
    for (double m : mass) total += m;
    if (!(total > 0)) return mass.size();
    double u = rng.uniform() * total;
    for (size_t i = 0; i < mass.size(); ++i) {
        if (u < mass[i]) return i;
        u -= mass[i];
    }
    for (size_t i = mass.size(); i-- > 0;)
        if (mass[i] > 0) return i;
    return mass.size();
}

}  // namespace

std::vector<Point> local_search(const WeightedPoints& t, std::vector<Point> centers, CounterRng& rng) {
    size_t k = centers.size();
    size_t n = t.pts.size();
    if (k == 0 || k >= n) return centers;
    std::set<Point> in(centers.begin(), centers.end());
    NearTable nt = nearest_two(t, centers);
    double cur = table_cost(t, nt);
    size_t swaps = 0;
    const size_t max_swaps = 50 * k;
    auto try_candidate = [&](size_t q) {
        if (in.count(t.pts[q])) return false;
        auto [j, c] = best_swap(t, nt, k, t.pts[q]);
        if (!(c < cur * (1 - 1e-9))) return false;
        in.erase(centers[j]);
        centers[j] = t.pts[q];
        in.insert(centers[j]);
        nt = nearest_two(t, centers);
        cur = table_cost(t, nt);
        ++swaps;
        return true;
    };
    if (n <= kFullScan) {
        bool improved = true;
        while (improved && swaps < max_swaps) {
            improved = false;
            for (size_t q = 0; q < n && swaps < max_swaps; ++q)
                if (try_candidate(q)) improved = true;
        }
    } else {
        size_t fails = 0;
        const size_t patience = std::max<size_t>(32, 2 * k);
        while (fails < patience && swaps < max_swaps) {
            std::vector<double> mass(n);
            for (size_t i = 0; i < n; ++i) mass[i] = t.w[i] * nt.d1[i];
            size_t q = weighted_pick(mass, rng);
            if (q >= n) break;
            if (try_candidate(q))
                fails = 0;
            else
                ++fails;
        }
    }
    std::sort(centers.begin(), centers.end());
    return centers;
}

std::vector<Point> static_weighted_kmeans(const std::vector<Point>& pts, const std::vector<double>& w,
                                          int k, CounterRng& rng) {
    WeightedPoints t = merge_duplicates(pts, w);
    size_t n = t.pts.size();
    if (k < 1 || static_cast<size_t>(k) > n) throw UsageError("k out of range for static solver");
    if (static_cast<size_t>(k) == n) return t.pts;
    std::vector<Point> centers;
    std::vector<bool> chosen(n, false);
    std::vector<double> d1(n, kInf);
    for (int c = 0; c < k; ++c) {
        std::vector<double> mass(n, 0.0);
        for (size_t i = 0; i < n; ++i)
            if (!chosen[i]) mass[i] = c == 0 ? t.w[i] : t.w[i] * d1[i];
        size_t pick = weighted_pick(mass, rng);
        if (pick >= n) pick = static_cast<size_t>(std::find(chosen.begin(), chosen.end(), false) - chosen.begin());
        chosen[pick] = true;
        centers.push_back(t.pts[pick]);
        for (size_t i = 0; i < n; ++i) d1[i] = std::min(d1[i], dist2(t.pts[i], t.pts[pick]));
    }
    return local_search(t, std::move(centers), rng);
}

std::vector<Point> restricted_kmeans(ClusterState& st, int r, CounterRng& rng, RestrictedTrace* trace) {
    int n = static_cast<int>(st.centers().size());
    if (r < 1 || r > n - 1) throw UsageError("r must lie in [1, |S|-1]");
    std::vector<Point> order = st.ordering();
    std::vector<Point> t;
    if (6 * r >= n) {
        t = order;
    } else {
        std::vector<Point> t1(order.begin(), order.begin() + 6 * r);
        std::set<Point> tset(t1.begin(), t1.end());
        CenterIndex& idx = st.ann_index();
        std::vector<Point> removed;
        std::vector<std::pair<Point, Point>> partners;
        try {
            for (const auto& c : t1) {
                idx.erase(c);
                removed.push_back(c);
            }
            for (const auto& c : t1) {
                auto s = ann_query(idx, c, true);
                if (!s) continue;
                partners.emplace_back(c, *s);
                tset.insert(*s);
            }
        } catch (...) {
            for (const auto& c : removed) idx.insert(c, c, 1.0);
            throw;
        }
        for (const auto& c : removed) idx.insert(c, c, 1.0);
        if (trace) {
            trace->t1 = t1;
            trace->partners = partners;
        }
        t.assign(tset.begin(), tset.end());
    }
    std::vector<double> w;
    for (const auto& c : t) w.push_back(st.weight(c));
    if (trace) trace->t = t;
    int keep = static_cast<int>(t.size()) - r;
    auto kept = static_weighted_kmeans(t, w, keep, rng);
    std::set<Point> ks(kept.begin(), kept.end());
    std::vector<Point> out;
    for (const auto& c : t)
        if (!ks.count(c)) out.push_back(c);
    return out;
}

int augment_sample_count(const Params& params, double c_t, int cap) {
    double v = c_t * std::pow(params.epsilon, -6.0) * params.d * std::log2(static_cast<double>(params.delta));
    int t = std::max(1, static_cast<int>(std::ceil(v - 1e-9)));
    if (cap > 0) t = std::min(t, cap);
    return t;
}

std::vector<Point> augmented_kmeans(ClusterState& st, int a, int t, CounterRng& rng, AugmentTrace* trace) {
    if (a < 0 || t < 1) throw UsageError("augmented k-means needs a >= 0 and t >= 1");
    Assignment& asg = st.assignment();
    std::vector<Point> out;
    std::vector<Point> scratch;
    try {
        for (int round = 0; round <= a; ++round) {
            std::vector<Point> drawn;
            for (int i = 0; i < t; ++i) {
                auto id = asg.d2_sample(rng);
                if (!id) break;
                drawn.push_back(st.points().at(*id).p);
            }
            if (drawn.empty()) break;
            for (const auto& p : drawn) {
                out.push_back(p);
                if (!asg.has_center(p)) {
                    asg.insert_center(p);
                    scratch.push_back(p);
                }
            }
            if (trace) trace->rounds.push_back(drawn);
        }
    } catch (...) {
        for (const auto& p : scratch) asg.erase_center(p);
        throw;
    }
    for (const auto& p : scratch) asg.erase_center(p);
    return out;
}

}  // namespace dkm
