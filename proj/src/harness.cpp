#include "dkm/harness.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <deque>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>

namespace dkm {

namespace {

std::string fmt(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (std::isnan(v)) return "nan";
    char buf[64];
    auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

template <class T>
bool parse_num(std::string_view s, T& out) {
    auto r = std::from_chars(s.data(), s.data() + s.size(), out);
    return r.ec == std::errc() && r.ptr == s.data() + s.size();
}

std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> out;
    size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        size_t j = i;
        while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
        if (j > i) out.push_back(line.substr(i, j - i));
        i = j;
    }
    return out;
}

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

// Live-id pool with O(1) random removal.
class LivePool {
public:
    void add(uint64_t id) {
        pos_[id] = ids_.size();
        ids_.push_back(id);
    }
    void remove(uint64_t id) {
        size_t i = pos_.at(id);
        pos_[ids_.back()] = i;
        ids_[i] = ids_.back();
        ids_.pop_back();
        pos_.erase(id);
    }
    uint64_t random(CounterRng& rng) const { return ids_[rng.below(ids_.size())]; }
    size_t size() const { return ids_.size(); }
    bool empty() const { return ids_.empty(); }

private:
    std::vector<uint64_t> ids_;
    std::unordered_map<uint64_t, size_t> pos_;
};

}  // namespace

bool operator==(const UpdateOp& a, const UpdateOp& b) {
    if (a.kind != b.kind || a.id != b.id) return false;
    return a.kind == UpdateOp::erase || (a.w == b.w && a.p == b.p);
}

bool operator==(const UpdateStream& a, const UpdateStream& b) {
    return a.header == b.header && a.ops == b.ops;
}

std::string serialize_stream(const UpdateStream& s) {
    std::string out = "H d=" + std::to_string(s.header.d) + " delta=" + std::to_string(s.header.delta) +
                      " n=" + std::to_string(s.header.n) + " k=" + std::to_string(s.header.k) + "\n";
    for (const auto& op : s.ops) {
        if (op.kind == UpdateOp::erase) {
            out += "D " + std::to_string(op.id) + "\n";
            continue;
        }
        out += "I " + std::to_string(op.id) + " " + fmt(op.w);
        for (auto c : op.p) out += " " + std::to_string(c);
        out += "\n";
    }
    return out;
}

UpdateStream parse_stream(std::istream& in) {
    UpdateStream s;
    bool have_header = false;
    std::string line;
    size_t lineno = 0;
    std::unordered_map<uint64_t, bool> live;
    while (std::getline(in, line)) {
        ++lineno;
        auto tok = split_ws(line);
        if (tok.empty() || tok[0][0] == '#') continue;
        if (!have_header) {
            if (tok[0] != "H") throw ParseError(lineno, "expected header line");
            std::map<std::string, std::string_view> kv;
            for (size_t i = 1; i < tok.size(); ++i) {
                auto eq = tok[i].find('=');
                if (eq == std::string_view::npos) throw ParseError(lineno, "malformed header field");
                kv[std::string(tok[i].substr(0, eq))] = tok[i].substr(eq + 1);
            }
            for (const char* key : {"d", "delta", "n", "k"})
                if (!kv.count(key)) throw ParseError(lineno, std::string("header lacks ") + key);
            if (kv.size() != 4 || !parse_num(kv["d"], s.header.d) || !parse_num(kv["delta"], s.header.delta) ||
                !parse_num(kv["n"], s.header.n) || !parse_num(kv["k"], s.header.k))
                throw ParseError(lineno, "malformed header");
            if (s.header.d < 1 || s.header.delta < 2 || s.header.k < 1)
                throw ParseError(lineno, "header requires d >= 1, delta >= 2, k >= 1");
            have_header = true;
            continue;
        }
        UpdateOp op;
        if (tok[0] == "I") {
            if (tok.size() != 3 + static_cast<size_t>(s.header.d)) throw ParseError(lineno, "insert needs id, weight and d coordinates");
            op.kind = UpdateOp::insert;
            if (!parse_num(tok[1], op.id)) throw ParseError(lineno, "bad id");
            if (!parse_num(tok[2], op.w) || !std::isfinite(op.w) || op.w < 0) throw ParseError(lineno, "bad weight");
            op.p.resize(s.header.d);
            for (int i = 0; i < s.header.d; ++i)
                if (!parse_num(tok[3 + i], op.p[i]) || op.p[i] < 1 || op.p[i] > s.header.delta)
                    throw ParseError(lineno, "coordinate outside [1, delta]");
            if (live.count(op.id)) throw ParseError(lineno, "insert of live id " + std::to_string(op.id));
            live[op.id] = true;
        } else if (tok[0] == "D") {
            if (tok.size() != 2) throw ParseError(lineno, "delete needs exactly an id");
            op.kind = UpdateOp::erase;
            if (!parse_num(tok[1], op.id)) throw ParseError(lineno, "bad id");
            if (!live.erase(op.id)) throw ParseError(lineno, "delete of dead id " + std::to_string(op.id));
        } else {
            throw ParseError(lineno, "unknown record type");
        }
        s.ops.push_back(std::move(op));
    }
    if (!have_header) throw ParseError(lineno, "missing header");
    if (s.ops.size() != s.header.n) throw ParseError(lineno, "header n differs from record count");
    return s;
}

UpdateStream parse_stream_text(const std::string& text) {
    std::istringstream in(text);
    return parse_stream(in);
}

UpdateStream load_stream(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open stream " + path);
    return parse_stream(in);
}

UpdateStream gen_workload(const WorkloadSpec& spec) {
    if (spec.d < 1 || spec.delta < 2 || spec.k < 1) throw UsageError("workload needs d >= 1, delta >= 2, k >= 1");
    if (!(spec.ins_frac >= 0 && spec.ins_frac <= 1)) throw UsageError("ins_frac must lie in [0, 1]");
    const bool uniform = spec.mode == "uniform";
    const bool clustered = spec.mode == "clustered";
    const bool sliding = spec.mode == "sliding-window";
    const bool churn = spec.mode == "adversarial-churn";
    if (!uniform && !clustered && !sliding && !churn) throw UsageError("unknown workload mode " + spec.mode);

    UpdateStream s;
    s.header = {spec.d, spec.delta, spec.n, spec.k};
    CounterRng rng(spec.seed, "workload");
    std::normal_distribution<double> gauss(0.0, 1.0);
    double spread = spec.spread > 0 ? spec.spread : std::max(1.0, spec.delta / 64.0);
    uint64_t window = spec.window > 0 ? spec.window : std::max<uint64_t>(spec.k, spec.n / 10);
    if (sliding && window < 1) throw UsageError("window must be positive");

    auto uniform_point = [&] {
        Point p(spec.d);
        for (auto& c : p) c = 1 + static_cast<int64_t>(rng.below(spec.delta));
        return p;
    };
    std::vector<std::vector<double>> centers(spec.k, std::vector<double>(spec.d));
    double lo = 1 + 0.1 * (spec.delta - 1), hi = 1 + 0.9 * (spec.delta - 1);
    for (auto& c : centers)
        for (auto& v : c) v = lo + rng.uniform() * (hi - lo);
    auto cluster_point = [&] {
        const auto& c = centers[rng.below(centers.size())];
        Point p(spec.d);
        for (int i = 0; i < spec.d; ++i) {
            double v = std::round(c[i] + spread * gauss(rng));
            p[i] = std::clamp<int64_t>(static_cast<int64_t>(v), 1, spec.delta);
        }
        return p;
    };

    LivePool pool;
    std::deque<uint64_t> fifo;
    std::vector<uint64_t> outliers;
    uint64_t next_id = 1;
    for (uint64_t step = 0; step < spec.n; ++step) {
        bool insert;
        if (sliding) insert = fifo.size() < window;
        else insert = pool.empty() || rng.uniform() < spec.ins_frac;
        if (spec.ins_frac >= 1 && !sliding) insert = true;
        if (insert) {
            uint64_t id = next_id++;
            Point p;
            bool outlier = false;
            if (uniform) p = uniform_point();
            else if (churn && rng.uniform() < 0.5) {
                p = uniform_point();
                outlier = true;
            } else p = cluster_point();
            s.ops.push_back(UpdateOp::ins(id, std::move(p)));
            if (sliding) fifo.push_back(id);
            else pool.add(id);
            if (outlier) outliers.push_back(id);
        } else {
            uint64_t id;
            if (sliding) {
                id = fifo.front();
                fifo.pop_front();
            } else if (churn && !outliers.empty()) {
                id = outliers.back();
                outliers.pop_back();
                pool.remove(id);
            } else {
                id = pool.random(rng);
                pool.remove(id);
                if (churn) outliers.erase(std::remove(outliers.begin(), outliers.end(), id), outliers.end());
            }
            s.ops.push_back(UpdateOp::del(id));
        }
    }
    return s;
}

KeyValues parse_key_values(std::istream& in) {
    KeyValues kv;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError(lineno, "expected key=value");
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return kv;
}

KeyValues load_key_values(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config " + path);
    return parse_key_values(in);
}

namespace {

double as_double(const std::string& key, const std::string& v) {
    double out;
    if (!parse_num(std::string_view(v), out)) throw UsageError("config " + key + ": not a number: " + v);
    return out;
}

int as_int(const std::string& key, const std::string& v) {
    int out;
    if (!parse_num(std::string_view(v), out)) throw UsageError("config " + key + ": not an integer: " + v);
    return out;
}

const std::set<std::string> kParamKeys = {"gamma", "theta", "lambda", "lambda_cap", "colors"};
const std::set<std::string> kScheduleKeys = {"ell_stop", "ell_div", "aug_mult", "mr_div_exp", "yellow_div_exp",
                                             "contam_add", "thresh_add", "cert_outer"};
const std::set<std::string> kRunnerKeys = {"c_t", "t_cap", "alpha", "c_u", "verifiers", "rebuild_every", "max_resets"};

}  // namespace

RunConfig RunConfig::from_key_values(const KeyValues& kv) {
    RunConfig c;
    for (const auto& [key, v] : kv) {
        if (key == "epsilon") c.epsilon = as_double(key, v);
        else if (key == "preset") c.preset = parse_preset(v);
        else if (key == "seed") c.seed = static_cast<uint64_t>(as_double(key, v));
        else if (key == "k") c.k = as_int(key, v);
        else if (key == "jl_target_dim") c.jl_target_dim = as_int(key, v);
        else if (key == "record_time") c.record_time = as_int(key, v) != 0;
        else if (kParamKeys.count(key) || kScheduleKeys.count(key) || kRunnerKeys.count(key)) {
            as_double(key, v);
            c.overrides[key] = v;
        } else throw UsageError("unknown config key " + key);
    }
    return c;
}

Params RunConfig::params(int d, int64_t delta) const {
    Params p = Params::make(d, delta, epsilon, preset, seed);
    auto get = [&](const char* key) -> std::optional<double> {
        auto it = overrides.find(key);
        if (it == overrides.end()) return std::nullopt;
        return as_double(key, it->second);
    };
    if (auto v = get("gamma")) p.gamma = *v;
    if (auto v = get("colors")) p.colors = static_cast<int>(*v);
    p.lambda_cap = 4LL * p.colors * static_cast<int64_t>(std::ceil(p.gamma)) * d;
    if (auto v = get("lambda_cap")) p.lambda_cap = static_cast<int64_t>(*v);
    if (preset == Preset::paper_faithful && !overrides.count("theta")) {
        p.theta = 6 * p.gamma;
        p.lambda = p.theta * p.theta;
    }
    if (auto v = get("theta")) {
        p.theta = *v;
        if (preset == Preset::paper_faithful) p.lambda = p.theta * p.theta;
    }
    if (auto v = get("lambda")) p.lambda = *v;
    p.validate();
    return p;
}

ControllerConfig RunConfig::controller(int d, int64_t delta, int k_) const {
    ControllerConfig c = ControllerConfig::make(params(d, delta), k_);
    for (const auto& [key, v] : overrides)
        if (kScheduleKeys.count(key)) c.sched.set(key, as_double(key, v));
    if (auto it = overrides.find("c_t"); it != overrides.end()) c.c_t = as_double("c_t", it->second);
    if (auto it = overrides.find("t_cap"); it != overrides.end()) c.t_cap = as_int("t_cap", it->second);
    return c;
}

SparsifierConfig RunConfig::sparsifier(int d, int64_t delta, int k_, uint64_t n_hint) const {
    SparsifierConfig s;
    s.ctrl = controller(d, delta, k_);
    s.n_hint = static_cast<int>(std::min<uint64_t>(n_hint, 1u << 30));
    auto get = [&](const char* key, auto& field) {
        auto it = overrides.find(key);
        if (it != overrides.end()) field = static_cast<std::decay_t<decltype(field)>>(as_double(key, it->second));
    };
    get("alpha", s.alpha);
    get("c_u", s.c_u);
    get("verifiers", s.verifiers);
    get("rebuild_every", s.rebuild_every);
    get("max_resets", s.max_resets);
    return s;
}

const char* const kMetricsColumns =
    "update_index,op_kind,cost_alg,cost_baseline,ratio,recourse_step,recourse_cum,makerobust_cum,resets_cum,"
    "time_us,n_live,epoch_len";

std::string format_row(const MetricsRow& r) {
    std::string out = std::to_string(r.update_index) + "," + r.op_kind + "," + fmt(r.cost_alg) + ",";
    out += (r.cost_baseline >= 0 ? fmt(r.cost_baseline) : "") + ",";
    out += (r.cost_baseline >= 0 ? fmt(r.ratio) : "") + ",";
    out += std::to_string(r.recourse_step) + "," + std::to_string(r.recourse_cum) + "," +
           std::to_string(r.makerobust_cum) + "," + std::to_string(r.resets_cum) + "," + fmt(r.time_us) + "," +
           std::to_string(r.n_live) + "," + std::to_string(r.epoch_len);
    return out;
}

RunMode parse_mode(const std::string& s) {
    if (s == "direct") return RunMode::direct;
    if (s == "sparsified") return RunMode::sparsified;
    throw UsageError("unknown mode " + s);
}

double quantile(std::vector<double> v, double q) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    double pos = q * (v.size() - 1);
    size_t i = static_cast<size_t>(std::floor(pos));
    size_t j = std::min(i + 1, v.size() - 1);
    return v[i] + (pos - i) * (v[j] - v[i]);
}

namespace {

double solution_cost(const WeightedSet& x, const std::set<Point>& s) {
    if (x.empty() || s.empty()) return 0.0;
    return cost(x, std::vector<Point>(s.begin(), s.end()));
}

double baseline_cost(const WeightedSet& x, int k, CounterRng& rng) {
    std::vector<Point> pts;
    std::vector<double> w;
    for (const auto& [id, e] : x.entries()) {
        pts.push_back(e.p);
        w.push_back(e.w);
    }
    WeightedPoints t = merge_duplicates(pts, w);
    if (t.pts.size() <= static_cast<size_t>(k)) return 0.0;
    auto c = static_weighted_kmeans(t.pts, t.w, k, rng);
    return weighted_cost(t, c);
}

}  // namespace

RunResult run_stream(const UpdateStream& stream, const RunConfig& cfg, RunMode mode, int baseline_every,
                     bool witness) {
    using Clock = std::chrono::steady_clock;
    const int k = cfg.k > 0 ? cfg.k : stream.header.k;
    int d = stream.header.d;
    std::vector<UpdateOp> ops = stream.ops;
    if (cfg.jl_target_dim > 0) {
        // Projection is centered on the grid midpoint so rounding and clamping stay symmetric.
        int m = cfg.jl_target_dim;
        Matrix a = jl_matrix(d, m, derive_seed(cfg.seed, "jl"));
        double mid = (1 + stream.header.delta) / 2.0;
        for (auto& op : ops) {
            if (op.kind != UpdateOp::insert) continue;
            Point q(m);
            for (int j = 0; j < m; ++j) {
                double v = mid;
                for (int i = 0; i < d; ++i) v += a[i][j] * (op.p[i] - mid);
                q[j] = std::clamp<int64_t>(std::llround(v), 1, stream.header.delta);
            }
            op.p = std::move(q);
        }
        d = m;
    }

    std::unique_ptr<DynamicKMeans> direct;
    std::unique_ptr<SparsifiedRunner> sparse;
    if (mode == RunMode::direct) {
        ControllerConfig c = cfg.controller(d, stream.header.delta, k);
        c.witness = witness;
        direct = std::make_unique<DynamicKMeans>(c);
    } else {
        SparsifierConfig c = cfg.sparsifier(d, stream.header.delta, k, std::max<uint64_t>(stream.ops.size(), 2));
        c.ctrl.witness = witness;
        sparse = std::make_unique<SparsifiedRunner>(c);
    }

    RunResult res;
    CounterRng base_rng(cfg.seed, "baseline");
    uint64_t recourse_cum = 0, mr_cum = 0, resets_cum = 0, n_live_max = 0, baselines = 0;
    double time_total = 0, base_time = 0;
    for (size_t i = 0; i < ops.size(); ++i) {
        MetricsRow row;
        row.update_index = i + 1;
        row.op_kind = ops[i].kind == UpdateOp::insert ? "ins" : "del";
        auto t0 = Clock::now();
        if (direct) {
            auto rep = direct->update(ops[i]);
            row.recourse_step = rep.recourse;
            mr_cum += rep.makerobust_calls;
        } else {
            uint64_t before = sparse->primary().stats().makerobust_calls;
            auto rep = sparse->update(ops[i]);
            uint64_t now = sparse->primary().stats().makerobust_calls;
            mr_cum += rep.resets > 0 ? now : now - before;
            row.recourse_step = rep.recourse;
            resets_cum += rep.resets;
        }
        double us = std::chrono::duration<double, std::micro>(Clock::now() - t0).count();
        time_total += us;
        row.time_us = cfg.record_time ? us : 0.0;
        const WeightedSet& x = direct ? direct->points() : sparse->points();
        const std::set<Point>& s = direct ? direct->solution() : sparse->solution();
        recourse_cum += row.recourse_step;
        row.recourse_cum = recourse_cum;
        row.makerobust_cum = mr_cum;
        row.resets_cum = resets_cum;
        row.n_live = x.size();
        n_live_max = std::max<uint64_t>(n_live_max, x.size());
        row.epoch_len = direct ? direct->epoch_length() : sparse->primary().epoch_length();
        row.cost_alg = solution_cost(x, s);
        if (baseline_every > 0 && (i + 1) % baseline_every == 0) {
            auto b0 = Clock::now();
            row.cost_baseline = baseline_cost(x, k, base_rng);
            base_time += std::chrono::duration<double, std::micro>(Clock::now() - b0).count();
            ++baselines;
            if (row.cost_baseline > 0) row.ratio = row.cost_alg / row.cost_baseline;
            else row.ratio = row.cost_alg > 0 ? std::numeric_limits<double>::infinity() : 1.0;
            res.ratios.push_back(row.ratio);
        }
        res.rows.push_back(std::move(row));
    }

    KeyValues& sm = res.summary;
    double n = std::max<double>(1, ops.size());
    sm["mode"] = mode == RunMode::direct ? "direct" : "sparsified";
    sm["preset"] = preset_name(cfg.preset);
    sm["k"] = std::to_string(k);
    sm["d"] = std::to_string(d);
    sm["delta"] = std::to_string(stream.header.delta);
    sm["updates"] = std::to_string(ops.size());
    sm["n_live_max"] = std::to_string(n_live_max);
    sm["recourse_total"] = std::to_string(recourse_cum);
    sm["amortized_recourse"] = fmt(recourse_cum / n);
    sm["makerobust_total"] = std::to_string(mr_cum);
    sm["amortized_makerobust"] = fmt(mr_cum / n);
    sm["resets_total"] = std::to_string(resets_cum);
    sm["ratio_p50"] = fmt(quantile(res.ratios, 0.5));
    sm["ratio_p95"] = fmt(quantile(res.ratios, 0.95));
    sm["ratio_max"] = res.ratios.empty() ? "nan" : fmt(*std::max_element(res.ratios.begin(), res.ratios.end()));
    sm["baselines"] = std::to_string(baselines);
    sm["amortized_time_us"] = cfg.record_time ? fmt(time_total / n) : "0";
    sm["baseline_time_us_avg"] = cfg.record_time && baselines ? fmt(base_time / baselines) : "0";
    const DynamicKMeans& ctl = direct ? *direct : sparse->primary();
    const ControllerStats& st = ctl.stats();
    sm["epochs"] = std::to_string(st.epochs);
    sm["calls_once_violations"] = std::to_string(st.calls_once_violations);
    sm["chain_violations"] = std::to_string(st.chain_violations);
    sm["t_increase_violations"] = std::to_string(st.t_increase_violations);
    sm["drift_violations"] = std::to_string(st.drift_violations);
    sm["size_violations"] = std::to_string(st.size_violations);
    sm["t_clamps"] = std::to_string(st.t_clamps);
    sm["max_chain"] = std::to_string(st.max_chain);
    if (cfg.record_time) {
        const ModuleTimes& tm = ctl.times();
        sm["time_ell_search_s"] = fmt(tm.ell_search);
        sm["time_restrict_begin_s"] = fmt(tm.restrict_begin);
        sm["time_augment_s"] = fmt(tm.augment);
        sm["time_restrict_end_s"] = fmt(tm.restrict_end);
        sm["time_robustify_s"] = fmt(tm.robustify);
        sm["time_apply_s"] = fmt(tm.apply);
    }
    if (sparse) {
        sm["verifiers"] = std::to_string(sparse->verifier_count());
        sm["max_reset_burst"] = std::to_string(sparse->max_burst());
        sm["sample_size_final"] = std::to_string(sparse->sample().size());
    }
    return res;
}

std::string format_summary(const KeyValues& kv) {
    std::string out;
    for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
    return out;
}

void write_metrics(const RunResult& r, const std::string& dir) {
    std::filesystem::create_directories(dir);
    std::ofstream m(std::filesystem::path(dir) / "metrics.csv");
    m << kMetricsColumns << "\n";
    for (const auto& row : r.rows) m << format_row(row) << "\n";
    std::ofstream s(std::filesystem::path(dir) / "summary.txt");
    s << format_summary(r.summary);
    if (!m || !s) throw std::runtime_error("failed to write metrics to " + dir);
}

}  // namespace dkm
