#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "dkm/dynamic_kmeans.hpp"
#include "dkm/sparsifier.hpp"

namespace dkm {

struct ParseError : UsageError {
    ParseError(size_t line, const std::string& what)
        : UsageError("line " + std::to_string(line) + ": " + what), line(line) {}
    size_t line;
};

struct StreamHeader {
    int d = 1;
    int64_t delta = 2;
    uint64_t n = 0;
    int k = 1;
    bool operator==(const StreamHeader&) const = default;
};

struct UpdateStream {
    StreamHeader header;
    std::vector<UpdateOp> ops;
};

bool operator==(const UpdateOp& a, const UpdateOp& b);
bool operator==(const UpdateStream& a, const UpdateStream& b);

std::string serialize_stream(const UpdateStream& s);
UpdateStream parse_stream(std::istream& in);
UpdateStream parse_stream_text(const std::string& text);
UpdateStream load_stream(const std::string& path);

struct WorkloadSpec {
    std::string mode = "clustered";  // uniform | clustered | sliding-window | adversarial-churn
    uint64_t n = 1000;
    int d = 2;
    int64_t delta = 1024;
    int k = 5;
    double ins_frac = 0.7;
    uint64_t seed = 1;
    uint64_t window = 0;  // sliding-window size; 0 selects max(k, n/10)
    double spread = 0;    // cluster standard deviation; 0 selects max(1, delta/64)
};

UpdateStream gen_workload(const WorkloadSpec& spec);

using KeyValues = std::map<std::string, std::string>;

// Reads flat key=value lines; '#' starts a comment.
KeyValues parse_key_values(std::istream& in);
KeyValues load_key_values(const std::string& path);

struct RunConfig {
    double epsilon = 0.3;
    Preset preset = Preset::practical;
    uint64_t seed = 1;
    int k = 0;  // 0 takes the stream header
    KeyValues overrides;
    int jl_target_dim = 0;
    bool record_time = true;

    static RunConfig from_key_values(const KeyValues& kv);
    Params params(int d, int64_t delta) const;
    ControllerConfig controller(int d, int64_t delta, int k) const;
    SparsifierConfig sparsifier(int d, int64_t delta, int k, uint64_t n_hint) const;
};

struct MetricsRow {
    uint64_t update_index = 0;
    std::string op_kind;
    double cost_alg = 0;
    double cost_baseline = -1;  // negative: no baseline on this row
    double ratio = -1;
    int recourse_step = 0;
    uint64_t recourse_cum = 0;
    uint64_t makerobust_cum = 0;
    uint64_t resets_cum = 0;
    double time_us = 0;
    uint64_t n_live = 0;
    int epoch_len = 0;
};

extern const char* const kMetricsColumns;

std::string format_row(const MetricsRow& r);

struct RunResult {
    std::vector<MetricsRow> rows;
    KeyValues summary;
    std::vector<double> ratios;
};

enum class RunMode { direct, sparsified };
RunMode parse_mode(const std::string& s);

RunResult run_stream(const UpdateStream& stream, const RunConfig& cfg, RunMode mode, int baseline_every,
                     bool witness = false);

void write_metrics(const RunResult& r, const std::string& dir);
std::string format_summary(const KeyValues& kv);

double quantile(std::vector<double> v, double q);

}  // namespace dkm
