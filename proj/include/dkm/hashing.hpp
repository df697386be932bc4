#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "dkm/geometry.hpp"

namespace dkm {

using Cell = std::vector<int64_t>;
// Hash value packed as [color, cell...]; color 0 is reserved for the exact level.
using HashKey = std::vector<int64_t>;

struct NoColorError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

class WeakHash {
public:
    WeakHash(int d, double rho, uint64_t seed);
    WeakHash(double rho, std::vector<double> shift);

    double rho() const { return rho_; }
    double cell() const { return cell_; }
    const std::vector<double>& shift() const { return shift_; }

    Cell eval(const Point& x) const;
    // Cells whose preimage meets the closed ball; nullopt once more than cap cells are found.
    std::optional<std::vector<Cell>> ball_cells(const Point& x, double r, size_t cap) const;
    bool within(const Point& x, const Cell& z, double r) const;

private:
    double rho_;
    double cell_;
    std::vector<double> shift_;
};

class ConsistentHash {
public:
    ConsistentHash(const Params& params, double rho, uint64_t seed);

    double rho() const { return rho_; }
    double gamma() const { return gamma_; }
    size_t per_color_cap() const { return per_color_cap_; }
    int colors() const { return static_cast<int>(weak_.size()); }
    const WeakHash& weak(int color) const { return weak_.at(color - 1); }
    void set_per_color_cap(size_t cap) {
        per_color_cap_ = cap;
        memo_.clear();
    }

    std::optional<HashKey> try_eval(const Point& x) const;
    HashKey eval(const Point& x) const;  // throws NoColorError
    std::vector<HashKey> ball_buckets(const Point& x) const;

private:
    double rho_;
    double gamma_;
    size_t per_color_cap_;
    std::vector<WeakHash> weak_;
    // Memo of recent ball images; centers are inserted and removed repeatedly.
    mutable std::unordered_map<Point, std::vector<HashKey>, VecHash> memo_;
};

}  // namespace dkm
