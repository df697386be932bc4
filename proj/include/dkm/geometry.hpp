#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace dkm {

using Point = std::vector<int64_t>;

struct UsageError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

enum class Preset { paper_faithful, practical };

Preset parse_preset(const std::string& s);
const char* preset_name(Preset p);

struct Params {
    double epsilon = 0.3;
    int d = 2;
    int64_t delta = 1024;
    double gamma = 7.0;
    double lambda = 2.0;
    double theta = 2.0;
    int64_t lambda_cap = 0;
    int colors = 0;
    uint64_t seed = 1;
    Preset preset = Preset::practical;

    // Fill gamma, colors, lambda_cap, theta and lambda from epsilon, d, delta and preset.
    static Params make(int d, int64_t delta, double epsilon = 0.3,
                       Preset preset = Preset::practical, uint64_t seed = 1);

    void validate() const;
    double aspect() const;  // sqrt(d) * delta
};

double min_gamma();

struct VecHash {
    size_t operator()(const std::vector<int64_t>& v) const noexcept;
};

double dist2(const Point& p, const Point& q);
double dist(const Point& p, const Point& q);

struct WeightedEntry {
    Point p;
    double w = 1.0;
};

class WeightedSet {
public:
    void insert(uint64_t id, const Point& p, double w);
    void erase(uint64_t id);
    bool contains(uint64_t id) const { return entries_.count(id) != 0; }
    const WeightedEntry& at(uint64_t id) const;
    size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    double total_weight() const { return total_; }
    const std::map<uint64_t, WeightedEntry>& entries() const { return entries_; }

private:
    std::map<uint64_t, WeightedEntry> entries_;
    double total_ = 0.0;
};

struct CenterMeta {
    int t_level = 0;
    uint64_t inserted_at = 0;
};

using CenterSet = std::map<Point, CenterMeta>;

std::vector<Point> center_points(const CenterSet& s);

double cost(const WeightedSet& x, const std::vector<Point>& s);
double cost(const WeightedSet& x, const CenterSet& s);

std::pair<Point, double> brute_nn(const Point& x, const std::vector<Point>& s,
                                  bool exclude_self);

struct SubsetResult {
    std::vector<Point> chosen;
    double cost = 0.0;
};

SubsetResult brute_opt_restricted(const WeightedSet& x, const std::vector<Point>& s,
                                  int r);
SubsetResult brute_opt_augmented(const WeightedSet& x, const std::vector<Point>& s,
                                 int a, const std::vector<Point>& candidates);

double binomial(int n, int r);

// Weighted first and second moments about a fixed anchor.
struct Moments {
    Point anchor;
    long double s0 = 0;
    std::vector<long double> s1;
    long double s2 = 0;

    Moments() = default;
    explicit Moments(const Point& a) : anchor(a), s1(a.size(), 0) {}
    void add(const Point& p, double w);
    void remove(const Point& p, double w);
    // Adds (sign = +1) or subtracts (sign = -1) another summary, re-expressed about this anchor.
    void merge(const Moments& o, int sign);
    double cost_at(const Point& c) const;
    void accumulate_sum(std::vector<long double>& weighted_sum) const;
};

using Matrix = std::vector<std::vector<double>>;

Matrix jl_matrix(int m, int d, uint64_t seed);
Point jl_project(const std::vector<double>& x, const Matrix& a, const Params& params);

}  // namespace dkm
