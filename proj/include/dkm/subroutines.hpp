#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <vector>

#include "dkm/assignment.hpp"
#include "dkm/geometry.hpp"
#include "dkm/range_query.hpp"
#include "dkm/rng.hpp"

namespace dkm {

// Dataset and center set with every structure the subroutines query: the point range index,
// the assignment, the center ANN index and the neighbor bits.
class ClusterState {
public:
    ClusterState(const Params& params, uint64_t seed);

    const Params& params() const { return params_; }
    std::shared_ptr<const HashLevels> levels() const { return levels_; }

    void insert_point(uint64_t id, const Point& p, double w);
    void erase_point(uint64_t id);
    const WeightedSet& points() const { return x_; }
    size_t distinct_locations() const { return loc_count_.size(); }
    std::vector<Point> locations() const;

    std::vector<BitFlip> insert_center(const Point& s);
    std::vector<BitFlip> erase_center(const Point& s);
    bool has_center(const Point& s) const { return s_.count(s) != 0; }
    const std::set<Point>& centers() const { return s_; }

    double weight(const Point& s) const { return asg_.weight(s); }
    double dist_hat(const Point& s) const { return bits_.dist_hat(s); }
    // Centers sorted by w_S(c) * dist_hat(c)^2, ties lexicographic.
    std::vector<Point> ordering() const;
    std::optional<Point> ann(const Point& x, bool exclude_self = true) const;
    // Cost of X when each center's assigned points move to its nearest member of `subset`.
    double proxy_cost(const std::vector<Point>& subset) const;

    CenterIndex& ann_index() { return ann_; }
    const CenterIndex& ann_index() const { return ann_; }
    const NeighborBits& bits() const { return bits_; }
    const PointIndex& point_index() const { return xi_; }
    Assignment& assignment() { return asg_; }
    const Assignment& assignment() const { return asg_; }

private:
    Params params_;
    std::shared_ptr<const HashLevels> levels_;
    WeightedSet x_;
    std::map<Point, int> loc_count_;
    PointIndex xi_;
    Assignment asg_;
    std::set<Point> s_;
    CenterIndex ann_;
    NeighborBits bits_;
};

struct WeightedPoints {
    std::vector<Point> pts;
    std::vector<double> w;
};

WeightedPoints merge_duplicates(const std::vector<Point>& pts, const std::vector<double>& w);

double weighted_cost(const WeightedPoints& t, const std::vector<Point>& centers);

// k-means++ seeding followed by single-swap local search (at most 50k swaps).
std::vector<Point> static_weighted_kmeans(const std::vector<Point>& pts, const std::vector<double>& w,
                                          int k, CounterRng& rng);
std::vector<Point> local_search(const WeightedPoints& t, std::vector<Point> centers, CounterRng& rng);

struct RestrictedTrace {
    std::vector<Point> t1;
    std::vector<std::pair<Point, Point>> partners;  // (c in T1, its ANN partner in S - T1)
    std::vector<Point> t;
};

std::vector<Point> restricted_kmeans(ClusterState& st, int r, CounterRng& rng,
                                     RestrictedTrace* trace = nullptr);

int augment_sample_count(const Params& params, double c_t, int cap);

struct AugmentTrace {
    std::vector<std::vector<Point>> rounds;
};

std::vector<Point> augmented_kmeans(ClusterState& st, int a, int t, CounterRng& rng,
                                    AugmentTrace* trace = nullptr);

}  // namespace dkm
