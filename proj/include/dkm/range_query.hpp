#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <set>
#include <unordered_map>
#include <vector>

#include "dkm/geometry.hpp"
#include "dkm/hashing.hpp"

namespace dkm {

// Level 0 is the identity map; level i >= 1 is a consistent hash with rho = gamma * 2^i
// queried at radius 2^i.
class HashLevels {
public:
    HashLevels(const Params& params, uint64_t seed);

    const Params& params() const { return params_; }
    int top() const { return top_; }
    double radius(int level) const { return level == 0 ? 0.0 : std::ldexp(1.0, level); }
    int level_for_radius(double r) const;
    double outer_factor() const { return 3.0 * params_.gamma; }

    HashKey key(int level, const Point& p) const;
    std::vector<HashKey> ball(int level, const Point& p) const;
    const ConsistentHash& hash(int level) const { return *hashes_.at(level); }

private:
    Params params_;
    int top_;
    std::vector<std::unique_ptr<ConsistentHash>> hashes_;
};

struct MassBucket {
    Moments moments;
    std::set<uint64_t> ids;

    void add(const uint64_t& id, const Point& p, double w) {
        moments.add(p, w);
        ids.insert(id);
    }
    void remove(const uint64_t& id, const Point& p, double w) {
        moments.remove(p, w);
        ids.erase(id);
    }
    bool empty() const { return ids.empty(); }
};

struct CenterBucket {
    std::set<Point> points;

    void add(const Point& id, const Point&, double) { points.insert(id); }
    void remove(const Point& id, const Point&, double) { points.erase(id); }
    bool empty() const { return points.empty(); }
    size_t size() const { return points.size(); }
    // Lexicographically smallest member other than `skip`.
    const Point* representative(const Point* skip) const {
        for (const auto& p : points)
            if (!skip || p != *skip) return &p;
        return nullptr;
    }
};

// Routes each stored item to one bucket per level and answers approximate ball queries
// with the summaries of the buckets hit by the query point's ball image.
template <class Id, class Bucket, class IdHash = std::hash<Id>>
class RangeIndex {
public:
    explicit RangeIndex(std::shared_ptr<const HashLevels> levels)
        : hl_(std::move(levels)), buckets_(hl_->top() + 1) {}

    const HashLevels& levels() const { return *hl_; }
    std::shared_ptr<const HashLevels> shared_levels() const { return hl_; }
    size_t size() const { return items_.size(); }
    bool contains(const Id& id) const { return items_.count(id) != 0; }

    void insert(const Id& id, const Point& p, double w) {
        if (items_.count(id)) throw UsageError("duplicate insert into range index");
        Item item{p, w, {}};
        item.keys.reserve(buckets_.size());
        for (int i = 0; i <= hl_->top(); ++i) item.keys.push_back(hl_->key(i, p));
        for (int i = 0; i <= hl_->top(); ++i) buckets_[i][item.keys[i]].add(id, p, w);
        items_.emplace(id, std::move(item));
    }

    void erase(const Id& id) {
        auto it = items_.find(id);
        if (it == items_.end()) throw UsageError("delete of missing item from range index");
        const Item& item = it->second;
        for (int i = 0; i <= hl_->top(); ++i) {
            auto b = buckets_[i].find(item.keys[i]);
            b->second.remove(id, item.p, item.w);
            if (b->second.empty()) buckets_[i].erase(b);
        }
        items_.erase(it);
    }

    const HashKey& key_of(const Id& id, int level) const { return items_.at(id).keys.at(level); }

    const Bucket* bucket(int level, const HashKey& key) const {
        auto it = buckets_[level].find(key);
        return it == buckets_[level].end() ? nullptr : &it->second;
    }

    std::vector<const Bucket*> query_level(int level, const Point& x) const {
        std::vector<const Bucket*> out;
        for (const auto& key : hl_->ball(level, x))
            if (const Bucket* b = bucket(level, key)) out.push_back(b);
        return out;
    }

    std::vector<const Bucket*> query(const Point& x, double r) const {
        return query_level(hl_->level_for_radius(r), x);
    }

    template <class F>
    void for_each_bucket(int level, F&& fn) const {
        for (const auto& [key, b] : buckets_[level]) fn(key, b);
    }

    size_t bucket_count(int level) const { return buckets_[level].size(); }

private:
    struct Item {
        Point p;
        double w;
        std::vector<HashKey> keys;
    };
    std::shared_ptr<const HashLevels> hl_;
    std::vector<std::unordered_map<HashKey, Bucket, VecHash>> buckets_;
    std::unordered_map<Id, Item, IdHash> items_;
};

using PointIndex = RangeIndex<uint64_t, MassBucket>;
using CenterIndex = RangeIndex<Point, CenterBucket, VecHash>;

struct BallOneMeansAnswer {
    double b = 0;
    Point c_star;
    double cost_at_cstar = 0;
    double cost_at_x = 0;
    std::optional<std::vector<uint64_t>> witness;
};

BallOneMeansAnswer ball_1means(const PointIndex& index, const Point& x, double r,
                               bool witness = false);

// Returns a center of the index other than x (when exclude_self) within 2(1+gamma) times the
// distance to the nearest one, or nullopt if no candidate exists.
std::optional<Point> ann_query(const CenterIndex& index, const Point& x, bool exclude_self = true);

struct BitFlip {
    Point center;
    int level;
    bool bit;
};

// For every stored center s and level j in [1, top], bit_j(s) is 1 iff a bucket of the ball
// image of s at level j holds another center. Flips are reported exactly.
class NeighborBits {
public:
    explicit NeighborBits(std::shared_ptr<const HashLevels> levels);

    std::vector<BitFlip> insert(const Point& s);
    std::vector<BitFlip> erase(const Point& s);
    bool contains(const Point& s) const { return state_.count(s) != 0; }
    size_t size() const { return state_.size(); }
    int top() const { return hl_->top(); }

    bool bit(const Point& s, int level) const;
    // Level answering the indicator at scale gamma, or -1 when the bit is identically 0.
    int level_for_gamma(double gamma) const;
    bool indicator(const Point& s, double gamma) const;
    double dist_hat(const Point& s) const;
    std::vector<bool> bits(const Point& s) const;

private:
    struct State {
        std::vector<std::vector<HashKey>> phi;
        std::vector<HashKey> own;
        std::vector<int64_t> count;
    };
    std::shared_ptr<const HashLevels> hl_;
    std::vector<std::unordered_map<HashKey, int64_t, VecHash>> sizes_;
    std::vector<std::unordered_map<HashKey, std::set<Point>, VecHash>> watchers_;
    std::map<Point, State> state_;
};

}  // namespace dkm
