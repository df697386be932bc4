#pragma once

#include <cstddef>
#include <vector>

namespace dkm {

// Dynamic weighted sampling over integer slots via a Fenwick tree.
class FenwickSampler {
public:
    size_t add(double w);
    void set(size_t slot, double w);
    void remove(size_t slot);
    double weight(size_t slot) const { return weight_.at(slot); }
    double total() const;
    // Slot whose cumulative interval contains u in [0, total()); npos if empty.
    size_t find(double u) const;
    size_t live() const { return live_; }

    static constexpr size_t npos = static_cast<size_t>(-1);

private:
    void bump(size_t slot, double delta);
    void grow();

    std::vector<double> tree_;
    std::vector<double> weight_;
    std::vector<bool> used_;
    std::vector<size_t> free_;
    size_t live_ = 0;
};

}  // namespace dkm
