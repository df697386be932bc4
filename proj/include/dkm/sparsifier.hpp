#pragma once

#include <map>
#include <memory>
#include <set>
#include <vector>

#include "dkm/dynamic_kmeans.hpp"

namespace dkm {

struct SparsifierConfig {
    ControllerConfig ctrl;
    int verifiers = 0;       // 0 selects max(2, ceil(log2 n)) capped at 8
    double alpha = 2.0;
    double c_u = 4.0;        // target sample size c_u * k * log2 n
    int rebuild_every = 0;   // 0 selects k
    int max_resets = 1000;
    int n_hint = 1024;       // stream size used to pick the verifier count
};

struct SparsifierReport {
    int recourse = 0;
    int resets = 0;
    int u_changes = 0;
};

// Maintains a weighted sample U of X by Poisson sensitivity sampling and runs a primary
// controller plus verifier controllers on U, resetting the primary whenever its cost on U
// exceeds alpha times the best verifier cost.
class SparsifiedRunner {
public:
    explicit SparsifiedRunner(const SparsifierConfig& cfg);

    SparsifierReport update(const UpdateOp& op);
    const std::set<Point>& solution() const { return primary_->solution(); }
    const WeightedSet& points() const { return x_; }
    const WeightedSet& sample() const { return u_; }
    double cost_u() const;
    double estimate() const;
    double ratio() const;
    int verifier_count() const { return static_cast<int>(verifiers_.size()); }
    uint64_t resets() const { return resets_; }
    int max_burst() const { return max_burst_; }
    const DynamicKMeans& primary() const { return *primary_; }
    const SparsifierConfig& config() const { return cfg_; }

    // Test hook: collapses the primary solution to a single center.
    void corrupt_primary();
    // Runs the expiry check without an update; returns the number of resets.
    int audit();

private:
    double keep_probability(uint64_t id) const;
    void rebuild();
    std::vector<UpdateOp> sync_sample();
    void feed(const std::vector<UpdateOp>& ops);
    std::unique_ptr<DynamicKMeans> fresh(uint64_t seed) const;
    void enforce(SparsifierReport& rep);

    SparsifierConfig cfg_;
    WeightedSet x_;
    WeightedSet u_;
    std::map<uint64_t, double> prob_;  // absent: inserted since the last rebuild, p = 1
    std::unique_ptr<DynamicKMeans> primary_;
    std::vector<std::unique_ptr<DynamicKMeans>> verifiers_;
    uint64_t since_rebuild_ = 0;
    uint64_t rebuilds_ = 0;
    uint64_t resets_ = 0;
    uint64_t next_seed_ = 0;
    int max_burst_ = 0;
};

// Ratio cost(U, S*) / E after each update of a run with resets disabled; used to set alpha.
std::vector<double> calibration_ratios(const SparsifierConfig& cfg, const std::vector<UpdateOp>& ops);

}  // namespace dkm
