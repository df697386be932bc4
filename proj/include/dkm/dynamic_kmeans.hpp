#pragma once

#include <chrono>
#include <deque>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dkm/geometry.hpp"
#include "dkm/range_query.hpp"
#include "dkm/rng.hpp"
#include "dkm/subroutines.hpp"

namespace dkm {

struct UpdateOp {
    enum Kind { insert, erase } kind = insert;
    uint64_t id = 0;
    double w = 1.0;
    Point p;

    static UpdateOp ins(uint64_t id, Point p, double w = 1.0) { return {insert, id, w, std::move(p)}; }
    static UpdateOp del(uint64_t id) { return {erase, id, 0.0, {}}; }
};

// Every threshold the controller compares against, read from one table so both presets share
// code paths. Exponents are applied to lambda; the count-like factors are stored directly.
struct ExponentSchedule {
    double lambda = 2;
    double theta = 2;
    double ell_stop = 2;         // epoch-length stop factor on cost(X, S_hat_i) / cost(X, S_init)
    double ell_div = 2;          // ell = floor(ell_hat / ell_div)
    double aug_mult = 1;         // augmented k-means gets a = aug_mult * (ell + 1)
    double mr_div_exp = 7;       // MakeRobust: lambda^{3t} >= dist_hat / lambda^{mr_div_exp}
    double yellow_div_exp = 10;  // yellow test: lambda^{3t} >= dist_hat / lambda^{yellow_div_exp}
    double contam_add = 1.5;     // contamination radius lambda^{3i + contam_add}
    double thresh_add = -3;      // MakeRobust average-cost threshold lambda^{6j + thresh_add} / theta
    double cert_outer = 0;       // certificate outer radius factor; 0 means lambda^{3j+1}
    int t_max = 0;

    static ExponentSchedule make(const Params& params);
    // Applies key=value overrides; returns false for an unknown key.
    bool set(const std::string& key, double value);

    double pow(double e) const { return std::pow(lambda, e); }
    double ball_radius(int j) const { return pow(3.0 * j); }
    double contam_radius(int i) const { return pow(3.0 * i + contam_add); }
    double mr_threshold(int j) const { return pow(6.0 * j + thresh_add) / theta; }
    double outer_radius(int j) const { return cert_outer > 0 ? cert_outer * ball_radius(j) : pow(3.0 * j + 1); }
    // Smallest t >= 0 with lambda^{3t} >= dist / lambda^{div_exp}, clamped to t_max.
    int t_for(double dist, double div_exp, bool* clamped = nullptr) const;
};

struct ControllerConfig {
    int k = 5;
    Params params;
    ExponentSchedule sched;
    double c_t = 1.0;
    int t_cap = 2;   // 0 disables the cap
    bool witness = false;

    static ControllerConfig make(const Params& params, int k);
};

struct UpdateReport {
    int recourse = 0;
    int makerobust_calls = 0;
    bool epoch_boundary = false;
};

struct MakeRobustStep {
    int j;
    Point x;
    double radius;
    BallOneMeansAnswer ans;
    Point next;
};

struct MakeRobustRecord {
    Point u;
    Point v;
    int t;
    int type;  // 1: new center, 2: contaminated, 3: yellow
    std::vector<MakeRobustStep> steps;
};

// Validates a MakeRobust record against X; returns a description per violated condition.
std::vector<std::string> check_certificate(const MakeRobustRecord& rec, const WeightedSet& x,
                                           const ExponentSchedule& sched);

struct ControllerStats {
    uint64_t updates = 0;
    uint64_t epochs = 0;
    uint64_t recourse = 0;
    uint64_t makerobust_calls = 0;
    uint64_t calls_once_violations = 0;
    uint64_t chain_violations = 0;
    uint64_t t_increase_violations = 0;
    uint64_t drift_violations = 0;
    uint64_t t_clamps = 0;
    uint64_t contamination_multi = 0;
    uint64_t size_violations = 0;
    int max_chain = 0;
    int last_ell = 0;
    int last_ell_hat = 0;
    std::vector<int> ell_hat_trace;  // s_i values visited by the last Step 1 loop
};

struct ModuleTimes {
    double ell_search = 0, restrict_begin = 0, augment = 0, restrict_end = 0, robustify = 0, apply = 0;
};

class DynamicKMeans {
public:
    explicit DynamicKMeans(const ControllerConfig& cfg);

    UpdateReport update(const UpdateOp& op);
    const std::set<Point>& solution() const { return st_.centers(); }
    const WeightedSet& points() const { return st_.points(); }
    double cost() const;
    int t_of(const Point& c) const;

    const ControllerConfig& config() const { return cfg_; }
    const ControllerStats& stats() const { return stats_; }
    const ModuleTimes& times() const { return times_; }
    int epoch_length() const { return active_ ? ell_ + 1 : 0; }
    bool degenerate() const { return !active_; }

    void set_observer(std::function<void(const MakeRobustRecord&)> fn) { observer_ = std::move(fn); }
    // Test hook: replaces the solution with `s` outside the normal update path.
    void corrupt_solution(const std::vector<Point>& s);

private:
    struct Meta {
        int t = 0;
        int chain = 0;
    };
    struct LogEntry {
        bool insert;
        uint64_t id;
        Point p;
        double w;
    };

    void add_center(const Point& c);
    void remove_center(const Point& c);
    void track(const Point& c);
    int settle_recourse();
    void absorb(const std::vector<BitFlip>& flips);

    void sync_degenerate();
    void activate();
    void begin_epoch();
    void end_epoch();
    void robustify(const std::set<Point>& w_prime, const std::set<Point>& s_init,
                   const std::vector<Point>& touched);
    void make_robust(const Point& u, int type);
    void drop_meta(const Point& c);
    void set_meta(const Point& c, int t, int chain);
    double removal_proxy(const std::vector<Point>& removed) const;
    std::vector<Point> restricted(int r);

    ControllerConfig cfg_;
    ClusterState st_;
    CounterRng rng_;
    std::vector<std::unique_ptr<CenterIndex>> robust_;
    std::map<Point, Meta> meta_;
    bool active_ = false;

    bool in_epoch_ = false;
    int ell_ = 0;
    int done_ = 0;
    std::set<Point> s_init_;
    std::vector<Point> removed_;
    std::vector<LogEntry> log_;
    std::map<Point, std::vector<bool>> snapshot_;

    std::map<Point, bool> touched_;
    std::set<Point> yellow_set_;
    std::deque<Point> yellow_;
    std::set<Point> outputs_;
    bool collecting_ = false;
    int calls_this_update_ = 0;

    ControllerStats stats_;
    ModuleTimes times_;
    std::function<void(const MakeRobustRecord&)> observer_;
};

}  // namespace dkm
