#include "dkm/range_query.hpp"

#include <algorithm>
#include <cmath>

#include "dkm/rng.hpp"

namespace dkm {

HashLevels::HashLevels(const Params& params, uint64_t seed) : params_(params) {
    top_ = std::max(1, static_cast<int>(std::ceil(std::log2(params.aspect()) - 1e-12)));
    hashes_.resize(top_ + 1);
    for (int i = 1; i <= top_; ++i)
        hashes_[i] = std::make_unique<ConsistentHash>(params, params.gamma * std::ldexp(1.0, i),
                                                      derive_seed(seed, "level", i));
}

int HashLevels::level_for_radius(double r) const {
    if (r < 1) return 0;
    int j = 1;
    while (j < top_ && std::ldexp(1.0, j) <= r) ++j;
    return j;
}

HashKey HashLevels::key(int level, const Point& p) const {
    if (level == 0) {
        HashKey k;
        k.reserve(p.size() + 1);
        k.push_back(0);
        k.insert(k.end(), p.begin(), p.end());
        return k;
    }
    return hashes_.at(level)->eval(p);
}

std::vector<HashKey> HashLevels::ball(int level, const Point& p) const {
    if (level == 0) return {key(0, p)};
    return hashes_.at(level)->ball_buckets(p);
}

BallOneMeansAnswer ball_1means(const PointIndex& index, const Point& x, double r, bool witness) {
    BallOneMeansAnswer ans;
    auto buckets = index.query(x, r);
    long double b = 0;
    std::vector<long double> sum(x.size(), 0);
    for (const auto* bk : buckets) {
        b += bk->moments.s0;
        bk->moments.accumulate_sum(sum);
    }
    if (witness) {
        std::vector<uint64_t> ids;
        for (const auto* bk : buckets) ids.insert(ids.end(), bk->ids.begin(), bk->ids.end());
        std::sort(ids.begin(), ids.end());
        ans.witness = std::move(ids);
    }
    ans.c_star = x;
    if (b <= 0) return ans;
    ans.b = static_cast<double>(b);
    const int64_t delta = index.levels().params().delta;
    for (size_t i = 0; i < x.size(); ++i) {
        auto v = static_cast<int64_t>(std::llround(static_cast<double>(sum[i] / b)));
        ans.c_star[i] = std::clamp<int64_t>(v, 1, delta);
    }
    for (const auto* bk : buckets) {
        ans.cost_at_cstar += bk->moments.cost_at(ans.c_star);
        ans.cost_at_x += bk->moments.cost_at(x);
    }
    return ans;
}

std::optional<Point> ann_query(const CenterIndex& index, const Point& x, bool exclude_self) {
    const HashLevels& hl = index.levels();
    if (!exclude_self && index.contains(x)) return x;
    const Point* skip = exclude_self ? &x : nullptr;
    for (int level = 1; level <= hl.top(); ++level) {
        const Point* best = nullptr;
        double bd = 0;
        for (const auto* b : index.query_level(level, x)) {
            const Point* rep = b->representative(skip);
            if (!rep) continue;
            double t = dist2(x, *rep);
            if (!best || t < bd || (t == bd && *rep < *best)) {
                best = rep;
                bd = t;
            }
        }
        if (best) return *best;
    }
    return std::nullopt;
}

NeighborBits::NeighborBits(std::shared_ptr<const HashLevels> levels)
    : hl_(std::move(levels)), sizes_(hl_->top() + 1), watchers_(hl_->top() + 1) {}

std::vector<BitFlip> NeighborBits::insert(const Point& s) {
    if (state_.count(s)) throw UsageError("center already present");
    std::vector<BitFlip> flips;
    State st;
    int top = hl_->top();
    st.phi.resize(top + 1);
    st.own.resize(top + 1);
    st.count.assign(top + 1, 0);
    for (int j = 1; j <= top; ++j) {
        st.own[j] = hl_->key(j, s);
        auto w = watchers_[j].find(st.own[j]);
        if (w != watchers_[j].end()) {
            for (const auto& u : w->second) {
                auto& c = state_.at(u).count[j];
                if (c++ == 0) flips.push_back({u, j, true});
            }
        }
        sizes_[j][st.own[j]] += 1;
        st.phi[j] = hl_->ball(j, s);
        int64_t c = 0;
        for (const auto& z : st.phi[j]) {
            auto it = sizes_[j].find(z);
            if (it != sizes_[j].end()) c += it->second;
            watchers_[j][z].insert(s);
        }
        // The own bucket is always part of the ball image and holds s itself.
        st.count[j] = c - 1;
        if (st.count[j] > 0) flips.push_back({s, j, true});
    }
    state_.emplace(s, std::move(st));
    return flips;
}

std::vector<BitFlip> NeighborBits::erase(const Point& s) {
    auto it = state_.find(s);
    if (it == state_.end()) throw UsageError("center not present");
    State st = std::move(it->second);
    state_.erase(it);
    std::vector<BitFlip> flips;
    for (int j = 1; j <= hl_->top(); ++j) {
        for (const auto& z : st.phi[j]) {
            auto w = watchers_[j].find(z);
            w->second.erase(s);
            if (w->second.empty()) watchers_[j].erase(w);
        }
        auto sz = sizes_[j].find(st.own[j]);
        if (--sz->second == 0) sizes_[j].erase(sz);
        auto w = watchers_[j].find(st.own[j]);
        if (w == watchers_[j].end()) continue;
        for (const auto& u : w->second) {
            auto& c = state_.at(u).count[j];
            if (--c == 0) flips.push_back({u, j, false});
        }
    }
    return flips;
}

bool NeighborBits::bit(const Point& s, int level) const {
    return state_.at(s).count.at(level) > 0;
}

int NeighborBits::level_for_gamma(double gamma) const {
    if (gamma < 1) return -1;
    int j = 1;
    while (j < hl_->top() && std::ldexp(1.0, j) < gamma) ++j;
    return j;
}

bool NeighborBits::indicator(const Point& s, double gamma) const {
    int j = level_for_gamma(gamma);
    return j >= 1 && bit(s, j);
}

double NeighborBits::dist_hat(const Point& s) const {
    const State& st = state_.at(s);
    for (int j = 1; j <= hl_->top(); ++j)
        if (st.count[j] > 0) return (1.0 + hl_->params().gamma) * std::ldexp(1.0, j);
    return std::numeric_limits<double>::infinity();
}

std::vector<bool> NeighborBits::bits(const Point& s) const {
    const State& st = state_.at(s);
    std::vector<bool> out(hl_->top() + 1, false);
    for (int j = 1; j <= hl_->top(); ++j) out[j] = st.count[j] > 0;
    return out;
}

}  // namespace dkm
