#include "dkm/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "dkm/rng.hpp"

namespace dkm {

Preset parse_preset(const std::string& s) {
    if (s == "paper_faithful") return Preset::paper_faithful;
    if (s == "practical") return Preset::practical;
    throw UsageError("unknown preset: " + s);
}

const char* preset_name(Preset p) {
    return p == Preset::paper_faithful ? "paper_faithful" : "practical";
}

double min_gamma() { return 2.0 * std::sqrt(2.0 * M_PI); }

Params Params::make(int d, int64_t delta, double epsilon, Preset preset, uint64_t seed) {
    Params p;
    p.d = d;
    p.delta = delta;
    p.epsilon = epsilon;
    p.preset = preset;
    p.seed = seed;
    p.gamma = std::max(std::ceil(std::pow(epsilon, -1.5)), std::ceil(min_gamma()));
    p.colors = std::max(1, static_cast<int>(std::ceil(d * std::log2(static_cast<double>(delta)))));
    p.lambda_cap = 4LL * p.colors * static_cast<int64_t>(std::ceil(p.gamma)) * d;
    if (preset == Preset::paper_faithful) {
        p.theta = 6.0 * p.gamma;
        p.lambda = p.theta * p.theta;
    } else {
        p.theta = 2.0;
        p.lambda = 2.0;
    }
    return p;
}

void Params::validate() const {
    if (!(epsilon > 0 && epsilon < 1)) throw UsageError("epsilon must lie in (0,1)");
    if (d < 1) throw UsageError("d must be >= 1");
    if (delta < 2) throw UsageError("delta must be >= 2");
    if (gamma < min_gamma() - 1e-12) throw UsageError("gamma below 2*sqrt(2*pi)");
    if (colors < 1) throw UsageError("colors must be >= 1");
    if (lambda_cap < 0) throw UsageError("lambda_cap must be >= 0");
    if (lambda <= 1 || theta <= 0) throw UsageError("lambda must exceed 1, theta positive");
    if (preset == Preset::paper_faithful &&
        std::abs(lambda - theta * theta) > 1e-9 * lambda)
        throw UsageError("paper_faithful requires lambda = theta^2");
}

double Params::aspect() const { return std::sqrt(static_cast<double>(d)) * static_cast<double>(delta); }

size_t VecHash::operator()(const std::vector<int64_t>& v) const noexcept {
    uint64_t h = 0x84222325cbf29ce4ULL ^ v.size();
    for (int64_t x : v) h = mix64(h ^ static_cast<uint64_t>(x)) + 0x9e3779b97f4a7c15ULL;
    return static_cast<size_t>(h);
}

double dist2(const Point& p, const Point& q) {
    if (p.size() != q.size()) throw UsageError("dimension mismatch");
    double s = 0;
    for (size_t i = 0; i < p.size(); ++i) {
        double t = static_cast<double>(p[i] - q[i]);
        s += t * t;
    }
    return s;
}

double dist(const Point& p, const Point& q) { return std::sqrt(dist2(p, q)); }

void WeightedSet::insert(uint64_t id, const Point& p, double w) {
    if (w < 0 || !std::isfinite(w)) throw UsageError("weight must be finite and nonnegative");
    if (!entries_.emplace(id, WeightedEntry{p, w}).second)
        throw UsageError("duplicate id " + std::to_string(id));
    total_ += w;
}

void WeightedSet::erase(uint64_t id) {
    auto it = entries_.find(id);
    if (it == entries_.end()) throw UsageError("unknown id " + std::to_string(id));
    total_ -= it->second.w;
    entries_.erase(it);
    if (entries_.empty()) total_ = 0;
}

const WeightedEntry& WeightedSet::at(uint64_t id) const {
    auto it = entries_.find(id);
    if (it == entries_.end()) throw UsageError("unknown id " + std::to_string(id));
    return it->second;
}

std::vector<Point> center_points(const CenterSet& s) {
    std::vector<Point> out;
    out.reserve(s.size());
    for (const auto& [p, m] : s) out.push_back(p);
    return out;
}

double cost(const WeightedSet& x, const std::vector<Point>& s) {
    if (s.empty()) throw UsageError("cost needs a nonempty center set");
    double total = 0;
    for (const auto& [id, e] : x.entries()) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& c : s) best = std::min(best, dist2(e.p, c));
        total += e.w * best;
    }
    return total;
}

double cost(const WeightedSet& x, const CenterSet& s) { return cost(x, center_points(s)); }

std::pair<Point, double> brute_nn(const Point& x, const std::vector<Point>& s, bool exclude_self) {
    const Point* best = nullptr;
    double bd = std::numeric_limits<double>::infinity();
    for (const auto& c : s) {
        if (exclude_self && c == x) continue;
        double t = dist2(x, c);
        if (t < bd || (t == bd && best && c < *best)) {
            bd = t;
            best = &c;
        }
    }
    if (!best) throw UsageError("no candidate center");
    return {*best, std::sqrt(bd)};
}

double binomial(int n, int r) {
    if (r < 0 || r > n) return 0;
    r = std::min(r, n - r);
    double v = 1;
    for (int i = 1; i <= r; ++i) v = v * (n - r + i) / i;
    return v;
}

namespace {

// Calls fn(idx) for every r-combination of [0, n) in lexicographic order.
template <class F>
void for_each_combination(int n, int r, F&& fn) {
    std::vector<int> idx(r);
    std::iota(idx.begin(), idx.end(), 0);
    if (r > n) return;
    while (true) {
        fn(idx);
        int i = r - 1;
        while (i >= 0 && idx[i] == n - r + i) --i;
        if (i < 0) return;
        ++idx[i];
        for (int j = i + 1; j < r; ++j) idx[j] = idx[j - 1] + 1;
    }
}

std::vector<Point> sorted_unique(std::vector<Point> v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
}

// Squared distance from every point of x to every candidate, row-major.
std::vector<double> distance_table(const WeightedSet& x, const std::vector<Point>& c) {
    std::vector<double> t;
    t.reserve(x.size() * c.size());
    for (const auto& [id, e] : x.entries())
        for (const auto& p : c) t.push_back(dist2(e.p, p));
    return t;
}

}  // namespace

SubsetResult brute_opt_restricted(const WeightedSet& x, const std::vector<Point>& s0, int r) {
    auto s = sorted_unique(s0);
    int n = static_cast<int>(s.size());
    if (r < 1 || r > n - 1) throw UsageError("r must lie in [1, |S|-1]");
    if (binomial(n, r) > 1e6) throw UsageError("restricted oracle guard exceeded");
    auto table = distance_table(x, s);
    std::vector<double> w;
    for (const auto& [id, e] : x.entries()) w.push_back(e.w);
    int keep = n - r;
    double best = std::numeric_limits<double>::infinity();
    std::vector<int> best_idx;
    for_each_combination(n, keep, [&](const std::vector<int>& idx) {
        double c = 0;
        for (size_t i = 0; i < w.size(); ++i) {
            double m = std::numeric_limits<double>::infinity();
            for (int j : idx) m = std::min(m, table[i * n + j]);
            c += w[i] * m;
        }
        if (c < best) {
            best = c;
            best_idx = idx;
        }
    });
    SubsetResult out;
    out.cost = x.empty() ? 0.0 : best;
    std::vector<bool> kept(n, false);
    for (int j : best_idx) kept[j] = true;
    for (int j = 0; j < n; ++j)
        if (!kept[j]) out.chosen.push_back(s[j]);
    return out;
}

SubsetResult brute_opt_augmented(const WeightedSet& x, const std::vector<Point>& s0, int a,
                                 const std::vector<Point>& candidates) {
    auto s = sorted_unique(s0);
    auto cand = sorted_unique(candidates);
    int n = static_cast<int>(cand.size());
    if (a < 0) throw UsageError("a must be nonnegative");
    a = std::min(a, n);
    if (binomial(n, a) > 1e6) throw UsageError("augmented oracle guard exceeded");
    std::vector<double> base;
    std::vector<double> w;
    for (const auto& [id, e] : x.entries()) {
        double m = std::numeric_limits<double>::infinity();
        for (const auto& c : s) m = std::min(m, dist2(e.p, c));
        base.push_back(m);
        w.push_back(e.w);
    }
    auto table = distance_table(x, cand);
    double best = std::numeric_limits<double>::infinity();
    std::vector<int> best_idx;
    for_each_combination(n, a, [&](const std::vector<int>& idx) {
        double c = 0;
        for (size_t i = 0; i < w.size(); ++i) {
            double m = base[i];
            for (int j : idx) m = std::min(m, table[i * n + j]);
            c += w[i] * m;
        }
        if (c < best) {
            best = c;
            best_idx = idx;
        }
    });
    SubsetResult out;
    for (int j : best_idx) out.chosen.push_back(cand[j]);
    out.cost = std::isfinite(best) ? best : 0.0;
    return out;
}

void Moments::add(const Point& p, double w) {
    if (anchor.empty()) {
        anchor = p;
        s1.assign(p.size(), 0);
    }
    long double q = 0;
    for (size_t i = 0; i < p.size(); ++i) {
        long double t = static_cast<long double>(p[i] - anchor[i]);
        s1[i] += w * t;
        q += t * t;
    }
    s0 += w;
    s2 += w * q;
}

void Moments::remove(const Point& p, double w) {
    long double q = 0;
    for (size_t i = 0; i < p.size(); ++i) {
        long double t = static_cast<long double>(p[i] - anchor[i]);
        s1[i] -= w * t;
        q += t * t;
    }
    s0 -= w;
    s2 -= w * q;
}

void Moments::merge(const Moments& o, int sign) {
    if (o.anchor.empty()) return;
    if (anchor.empty()) {
        anchor = o.anchor;
        s1.assign(anchor.size(), 0);
    }
    long double cross = 0, shift2 = 0;
    for (size_t i = 0; i < anchor.size(); ++i) {
        long double a = static_cast<long double>(o.anchor[i] - anchor[i]);
        cross += a * o.s1[i];
        shift2 += a * a;
        s1[i] += sign * (o.s1[i] + o.s0 * a);
    }
    s0 += sign * o.s0;
    s2 += sign * (o.s2 + 2 * cross + o.s0 * shift2);
}

double Moments::cost_at(const Point& c) const {
    if (anchor.empty()) return 0.0;
    long double v = s2, cc = 0;
    for (size_t i = 0; i < c.size(); ++i) {
        long double t = static_cast<long double>(c[i] - anchor[i]);
        v -= 2 * t * s1[i];
        cc += t * t;
    }
    v += cc * s0;
    return v > 0 ? static_cast<double>(v) : 0.0;
}

void Moments::accumulate_sum(std::vector<long double>& ws) const {
    if (anchor.empty()) return;
    for (size_t i = 0; i < anchor.size(); ++i) ws[i] += s1[i] + s0 * anchor[i];
}

Matrix jl_matrix(int m, int d, uint64_t seed) {
    CounterRng rng(seed, "jl");
    std::normal_distribution<double> g(0.0, 1.0);
    Matrix a(m, std::vector<double>(d));
    double scale = 1.0 / std::sqrt(static_cast<double>(d));
    for (auto& row : a)
        for (auto& v : row) v = g(rng) * scale;
    return a;
}

Point jl_project(const std::vector<double>& x, const Matrix& a, const Params& params) {
    if (a.size() != x.size()) throw UsageError("projection matrix rows must equal input dimension");
    Point out(params.d, 0);
    for (int j = 0; j < params.d; ++j) {
        double v = 0;
        for (size_t i = 0; i < x.size(); ++i) {
            if (static_cast<int>(a[i].size()) != params.d)
                throw UsageError("projection matrix columns must equal d");
            v += a[i][j] * x[i];
        }
        auto r = static_cast<int64_t>(std::llround(v));
        out[j] = std::clamp<int64_t>(r, 1, params.delta);
    }
    return out;
}

}  // namespace dkm
