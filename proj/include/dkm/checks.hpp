#pragma once

#include <functional>
#include <string>
#include <vector>

#include "dkm/harness.hpp"

namespace dkm {

enum class Status { pass, soft, fail };
const char* status_name(Status s);

struct CheckResult {
    int id = 0;
    std::string name;
    Status status = Status::fail;
    std::string detail;
    double seconds = 0;
};

// Shared options: `scale` shrinks operation counts (1 = acceptance scale), `cfg` carries seed,
// preset and parameter overrides.
struct CheckOptions {
    RunConfig cfg;
    double scale = 1.0;
};

CheckResult check_hash_diameter(const CheckOptions& o);
CheckResult check_hash_consistency(const CheckOptions& o);
CheckResult check_phi_sandwich(const CheckOptions& o);
CheckResult check_ann_ratio(const CheckOptions& o);
CheckResult check_indicators(const CheckOptions& o);
CheckResult check_ball_1means(const CheckOptions& o);
std::vector<CheckResult> check_assignment(const CheckOptions& o);  // partition audit, weights
CheckResult check_d2_sampling(const CheckOptions& o);
CheckResult check_restricted(const CheckOptions& o);
CheckResult check_augmented(const CheckOptions& o);

struct ControllerTotals {
    uint64_t calls = 0, calls_once = 0, chain = 0, t_increase = 0, streams = 0;
    int max_chain = 0;
    void add(const ControllerStats& s);
};

std::vector<CheckResult> check_make_robust(const CheckOptions& o, ControllerTotals& totals);
CheckResult check_calls_once(const ControllerTotals& totals, double chain_bound);
std::vector<CheckResult> check_end_to_end(const CheckOptions& o, ControllerTotals& totals);  // quality, sublinearity
CheckResult check_sparsified(const CheckOptions& o);
CheckResult check_lemmas(const CheckOptions& o);

// Verify suites: hashing, range, assignment, subroutines, controller, sparsifier, lemmas, all.
std::vector<CheckResult> run_suite(const std::string& suite, const CheckOptions& o);
const std::vector<std::string>& suite_names();

std::string format_result(const CheckResult& r);

}  // namespace dkm
