#include "dkm/sampler.hpp"

#include <algorithm>
#include <stdexcept>

namespace dkm {

void FenwickSampler::grow() {
    size_t old = weight_.size();
    size_t n = std::max<size_t>(16, old * 2);
    weight_.resize(n, 0.0);
    used_.resize(n, false);
    tree_.assign(n + 1, 0.0);
    for (size_t i = 0; i < old; ++i)
        if (weight_[i] != 0) bump(i, weight_[i]);
    for (size_t i = n; i-- > old;) free_.push_back(i);
}

void FenwickSampler::bump(size_t slot, double delta) {
    for (size_t i = slot + 1; i < tree_.size(); i += i & (~i + 1)) tree_[i] += delta;
}

size_t FenwickSampler::add(double w) {
    if (free_.empty()) grow();
    size_t slot = free_.back();
    free_.pop_back();
    used_[slot] = true;
    ++live_;
    weight_[slot] = 0;
    set(slot, w);
    return slot;
}

void FenwickSampler::set(size_t slot, double w) {
    if (slot >= used_.size() || !used_[slot]) throw std::out_of_range("sampler slot not live");
    if (w < 0) w = 0;
    bump(slot, w - weight_[slot]);
    weight_[slot] = w;
}

void FenwickSampler::remove(size_t slot) {
    set(slot, 0.0);
    used_[slot] = false;
    free_.push_back(slot);
    --live_;
}

double FenwickSampler::total() const {
    double s = 0;
    for (size_t i = tree_.size() - (tree_.empty() ? 0 : 1); i > 0; i -= i & (~i + 1)) s += tree_[i];
    return s;
}

size_t FenwickSampler::find(double u) const {
    if (tree_.empty()) return npos;
    size_t pos = 0;
    size_t step = 1;
    while (step * 2 < tree_.size()) step *= 2;
    for (; step > 0; step /= 2) {
        if (pos + step < tree_.size() && tree_[pos + step] <= u) {
            pos += step;
            u -= tree_[pos];
        }
    }
    // pos is the count of slots fully below u; skip zero-weight tails caused by rounding.
    size_t slot = pos;
    while (slot < weight_.size() && (!used_[slot] || weight_[slot] <= 0)) ++slot;
    if (slot >= weight_.size()) {
        slot = pos;
        while (slot-- > 0)
            if (used_[slot] && weight_[slot] > 0) return slot;
        return npos;
    }
    return slot;
}

}  // namespace dkm
