#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <unordered_map>
#include <vector>

#include "dkm/geometry.hpp"
#include "dkm/hashing.hpp"
#include "dkm/rng.hpp"
#include "dkm/sampler.hpp"

namespace dkm {

// Two-level bucket system implicitly assigning the non-center points of X to S.
class Assignment {
public:
    Assignment(const Params& params, uint64_t seed);

    int levels() const { return m_; }
    double rho(int i) const;
    double base() const { return base_; }

    void insert_point(uint64_t id, const Point& p, double w);
    void erase_point(uint64_t id);
    void insert_center(const Point& s);
    void erase_center(const Point& s);

    bool has_center(const Point& s) const { return centers_.count(s) != 0; }
    size_t num_centers() const { return centers_.size(); }
    size_t num_points() const { return points_.size(); }
    std::vector<Point> centers() const;

    double weight(const Point& s) const;
    // Moments of the points implicitly assigned to s, anchored at s.
    const Moments& assigned_moments(const Point& s) const;
    // cost of X under the implicit assignment.
    double assigned_cost() const;

    // Three-stage D^2 sample; nullopt when no non-center point carries weight.
    std::optional<uint64_t> d2_sample(CounterRng& rng) const;
    // Probability that d2_sample returns id (exact under the sampling weights).
    double sample_probability(uint64_t id) const;

    struct Part {
        int level;
        HashKey key;
        Point sigma;
        std::vector<uint64_t> ids;
    };
    // The parts set(i,z) for (i,z) in H' with f(i,z) nonempty.
    std::vector<Part> partition() const;
    // Audit helper: number of f entries whose low bucket is empty or whose S(i-1,z') is nonempty.
    size_t orphan_f_entries() const;
    uint64_t bucket_touches() const { return touches_; }
    bool empty_state() const;

private:
    struct Low {
        double w = 0;
        Moments m;
        FenwickSampler bag;
        std::unordered_map<uint64_t, size_t> slot_of;
        std::vector<uint64_t> id_of;
        bool in_f = false;
        size_t slot = FenwickSampler::npos;
    };
    struct High {
        std::unordered_map<HashKey, Low, VecHash> lows;
        double w_h = 0;
        Moments m;
    };
    struct PointRec {
        Point p;
        double w;
        std::vector<HashKey> keys;
    };
    struct CenterRec {
        std::vector<std::vector<HashKey>> phi;
        double w_s = 0;
        Moments m;
    };
    struct LowRef {
        int level;
        HashKey z;
        HashKey zp;
    };

    HashKey key(int level, const Point& p) const;
    bool s_empty(int level, const HashKey& z) const;
    bool in_h_prime(int level, const HashKey& z) const { return !s_empty(level, z); }
    double scale(int level) const { return scales_[level]; }

    void refresh_slot(int level, const HashKey& z, const HashKey& zp, Low& low, bool active);
    void low_weight(int level, const HashKey& z, const HashKey& zp, uint64_t id, const Point& p,
                    double w, int sign);
    void toggle_f(int level, const HashKey& z, const HashKey& zp, bool on);
    void toggle_h_prime(int level, const HashKey& z, const Point& sigma, bool on);
    void move_sigma(int level, const HashKey& z, const Point& from, const Point& to);
    void s_emptiness_changed(int level, const HashKey& z, bool now_empty);
    void credit(const Point& s, double w, const Moments& m, int sign);

    Params params_;
    int m_;
    double base_;
    std::vector<double> scales_;
    std::vector<std::unique_ptr<ConsistentHash>> hashes_;
    std::unordered_map<uint64_t, PointRec> points_;
    std::unordered_map<HashKey, double, VecHash> loc_weight_;
    std::unordered_map<HashKey, std::vector<uint64_t>, VecHash> loc_ids_;
    std::map<Point, CenterRec> centers_;
    std::vector<std::unordered_map<HashKey, std::set<Point>, VecHash>> close_;
    std::vector<std::unordered_map<HashKey, Point, VecHash>> sigma_;
    std::vector<std::unordered_map<HashKey, High, VecHash>> high_;
    std::vector<std::unordered_map<HashKey, std::set<HashKey>, VecHash>> rev_;
    FenwickSampler sampler_;
    std::vector<LowRef> slot_ref_;
    uint64_t touches_ = 0;
};

}  // namespace dkm
