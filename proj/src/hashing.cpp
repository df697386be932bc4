#include "dkm/hashing.hpp"

#include <cmath>
#include <algorithm>

#include "dkm/rng.hpp"

namespace dkm {

WeakHash::WeakHash(int d, double rho, uint64_t seed)
    : rho_(rho), cell_(rho / std::sqrt(static_cast<double>(d))), shift_(d) {
    if (!(rho > 0)) throw UsageError("rho must be positive");
    CounterRng rng(seed);
    for (auto& v : shift_) v = rng.uniform() * cell_;
}

WeakHash::WeakHash(double rho, std::vector<double> shift)
    : rho_(rho), cell_(rho / std::sqrt(static_cast<double>(shift.size()))), shift_(std::move(shift)) {
    for (double v : shift_)
        if (v < 0 || v >= cell_) throw UsageError("shift outside [0, cell)");
}

Cell WeakHash::eval(const Point& x) const {
    if (x.size() != shift_.size()) throw UsageError("dimension mismatch");
    Cell z(x.size());
    for (size_t i = 0; i < x.size(); ++i)
        z[i] = static_cast<int64_t>(std::floor((static_cast<double>(x[i]) + shift_[i]) / cell_));
    return z;
}

// The preimage of z is the half-open box [z*cell - v, (z+1)*cell - v); the upper faces
// are excluded, so a gap measured to one of them is not attained.
bool WeakHash::within(const Point& x, const Cell& z, double r) const {
    double g2 = 0;
    bool open = false;
    for (size_t i = 0; i < x.size(); ++i) {
        double lo = static_cast<double>(z[i]) * cell_ - shift_[i];
        double hi = lo + cell_;
        double xi = static_cast<double>(x[i]);
        if (xi < lo) {
            g2 += (lo - xi) * (lo - xi);
        } else if (xi >= hi) {
            g2 += (xi - hi) * (xi - hi);
            open = true;
        }
    }
    double r2 = r * r;
    return open ? g2 < r2 : g2 <= r2;
}

std::optional<std::vector<Cell>> WeakHash::ball_cells(const Point& x, double r, size_t cap) const {
    // Breadth-first over face neighbors; the output doubles as the visited set since a small
    // ball meets few cells.
    std::vector<Cell> out{eval(x)};
    if (cap < 1) return std::nullopt;
    Cell n;
    for (size_t head = 0; head < out.size(); ++head) {
        for (size_t i = 0; i < x.size(); ++i) {
            for (int delta : {-1, +1}) {
                n = out[head];
                n[i] += delta;
                if (!within(x, n, r) || std::find(out.begin(), out.end(), n) != out.end()) continue;
                if (out.size() == cap) return std::nullopt;
                out.push_back(n);
            }
        }
    }
    return out;
}

ConsistentHash::ConsistentHash(const Params& params, double rho, uint64_t seed)
    : rho_(rho), gamma_(params.gamma) {
    int c = params.colors;
    if (c < 1) throw UsageError("colors must be >= 1");
    per_color_cap_ = static_cast<size_t>((params.lambda_cap + c - 1) / c);
    weak_.reserve(c);
    for (int i = 0; i < c; ++i) weak_.emplace_back(params.d, rho, derive_seed(seed, "weak", i));
}

std::optional<HashKey> ConsistentHash::try_eval(const Point& x) const {
    double r = 2.0 * rho_ / gamma_;
    for (int c = 1; c <= colors(); ++c) {
        const auto& h = weak_[c - 1];
        if (!h.ball_cells(x, r, per_color_cap_)) continue;
        HashKey key;
        key.reserve(x.size() + 1);
        key.push_back(c);
        for (auto v : h.eval(x)) key.push_back(v);
        return key;
    }
    return std::nullopt;
}

HashKey ConsistentHash::eval(const Point& x) const {
    auto k = try_eval(x);
    if (!k) throw NoColorError("every color exceeded its cap");
    return *k;
}

std::vector<HashKey> ConsistentHash::ball_buckets(const Point& x) const {
    if (auto it = memo_.find(x); it != memo_.end()) return it->second;
    std::vector<HashKey> out;
    double r = rho_ / gamma_;
    for (int c = 1; c <= colors(); ++c) {
        auto cells = weak_[c - 1].ball_cells(x, r, per_color_cap_);
        if (!cells) continue;
        for (auto& z : *cells) {
            HashKey key;
            key.reserve(z.size() + 1);
            key.push_back(c);
            key.insert(key.end(), z.begin(), z.end());
            out.push_back(std::move(key));
        }
    }
    if (memo_.size() >= 4096) memo_.clear();
    memo_.emplace(x, out);
    return out;
}

}  // namespace dkm
