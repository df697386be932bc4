#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dkm/checks.hpp"
#include "dkm/harness.hpp"

namespace {

using namespace dkm;

struct Common {
    std::string config;
    uint64_t seed = 0;
    bool seed_set = false;
    std::string preset;
};

void add_common(CLI::App* app, Common& c) {
    app->add_option("--config", c.config, "key=value config file");
    app->add_option("--seed", c.seed, "root seed")->each([&](const std::string&) { c.seed_set = true; });
    app->add_option("--preset", c.preset, "paper_faithful | practical");
}

RunConfig make_config(const Common& c) {
    RunConfig cfg;
    if (!c.config.empty()) cfg = RunConfig::from_key_values(load_key_values(c.config));
    if (c.seed_set) cfg.seed = c.seed;
    if (!c.preset.empty()) cfg.preset = parse_preset(c.preset);
    return cfg;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path);
    f << text;
    if (!f) throw std::runtime_error("cannot write " + path);
}

int cmd_gen(const WorkloadSpec& spec, const std::string& out) {
    std::string text = serialize_stream(gen_workload(spec));
    if (out.empty()) std::cout << text;
    else write_text(out, text);
    return 0;
}

int cmd_run(const std::string& stream_path, const RunConfig& cfg, const std::string& mode, int baseline_every,
            const std::string& out, bool witness) {
    UpdateStream stream = load_stream(stream_path);
    std::vector<std::pair<std::string, RunMode>> modes;
    if (mode == "both") modes = {{"direct", RunMode::direct}, {"sparsified", RunMode::sparsified}};
    else modes = {{mode, parse_mode(mode)}};
    for (const auto& [name, m] : modes) {
        RunResult r = run_stream(stream, cfg, m, baseline_every, witness);
        if (!out.empty()) write_metrics(r, modes.size() > 1 ? out + "/" + name : out);
        if (modes.size() > 1) std::cout << "[" << name << "]\n";
        std::cout << format_summary(r.summary);
    }
    return 0;
}

int cmd_verify(const std::string& suite, const RunConfig& cfg, double scale, const std::string& out) {
    CheckOptions o;
    o.cfg = cfg;
    o.scale = scale;
    auto results = run_suite(suite, o);
    bool ok = true;
    nlohmann::json report = {{"suite", suite}, {"seed", cfg.seed}, {"scale", scale}};
    report["checks"] = nlohmann::json::array();
    for (const auto& r : results) {
        std::cout << format_result(r) << "\n";
        ok = ok && r.status != Status::fail;
        report["checks"].push_back({{"id", r.id},
                                    {"name", r.name},
                                    {"status", status_name(r.status)},
                                    {"detail", r.detail},
                                    {"seconds", r.seconds}});
    }
    report["result"] = ok ? "pass" : "fail";
    std::cout << "result=" << (ok ? "pass" : "fail") << "\n";
    if (!out.empty()) write_text(out, report.dump(2) + "\n");
    return ok ? 0 : 1;
}

int cmd_bench(WorkloadSpec spec, const std::vector<uint64_t>& sizes, RunConfig cfg, const std::string& mode,
              int baseline_every, const std::string& out) {
    cfg.record_time = true;
    std::ostringstream csv;
    csv << "n,k,mode,amortized_time_us,baseline_time_us_avg,ratio_p50,ratio_max,amortized_recourse,"
           "amortized_makerobust,n_live_max\n";
    double first_time = 0, first_base = 0;
    for (size_t i = 0; i < sizes.size(); ++i) {
        spec.n = sizes[i];
        RunResult r = run_stream(gen_workload(spec), cfg, parse_mode(mode), baseline_every);
        auto& s = r.summary;
        csv << spec.n << "," << spec.k << "," << mode << "," << s["amortized_time_us"] << ","
            << s["baseline_time_us_avg"] << "," << s["ratio_p50"] << "," << s["ratio_max"] << ","
            << s["amortized_recourse"] << "," << s["amortized_makerobust"] << "," << s["n_live_max"] << "\n";
        double t = std::stod(s["amortized_time_us"]), b = std::stod(s["baseline_time_us_avg"]);
        if (i == 0) {
            first_time = t;
            first_base = b;
        }
        std::printf("n=%llu time_us=%.1f growth=%.2f baseline_us=%.1f baseline_growth=%.2f ratio_p50=%s\n",
                    static_cast<unsigned long long>(spec.n), t, first_time > 0 ? t / first_time : 0.0, b,
                    first_base > 0 ? b / first_base : 0.0, s["ratio_p50"].c_str());
    }
    if (!out.empty()) write_text(out, csv.str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dynamic k-means harness"};
    app.require_subcommand(1);

    Common rc, vc, bc;
    WorkloadSpec spec;
    std::string gen_out;
    auto* gen = app.add_subcommand("gen", "generate an update stream");
    gen->add_option("--mode", spec.mode, "uniform | clustered | sliding-window | adversarial-churn");
    gen->add_option("--n", spec.n, "number of updates");
    gen->add_option("--d", spec.d, "dimension");
    gen->add_option("--delta", spec.delta, "grid side");
    gen->add_option("--k", spec.k, "cluster count hint");
    gen->add_option("--ins-frac", spec.ins_frac, "insertion fraction");
    gen->add_option("--window", spec.window, "sliding-window size");
    gen->add_option("--seed", spec.seed, "workload seed");
    gen->add_option("--out", gen_out, "output file (stdout if absent)");

    std::string stream_path, run_mode = "direct", run_out;
    int baseline_every = 100;
    bool witness = false;
    int run_k = 0;
    auto* run = app.add_subcommand("run", "replay a stream");
    run->add_option("stream", stream_path, "stream file")->required();
    add_common(run, rc);
    run->add_option("--mode", run_mode, "direct | sparsified | both");
    run->add_option("--baseline-every", baseline_every, "baseline period (0 disables)");
    run->add_option("--out", run_out, "metrics directory");
    run->add_flag("--witness", witness, "record witnesses and check certificates (slower)");
    run->add_option("--k", run_k, "override the header k");

    std::string suite = "all", verify_out;
    double scale = 0.1;
    auto* verify = app.add_subcommand("verify", "run invariant suites");
    verify->add_option("--suite", suite, "hashing | range | assignment | subroutines | controller | sparsifier | lemmas | all");
    verify->add_option("--scale", scale, "operation-count scale (1 = acceptance size)");
    add_common(verify, vc);
    verify->add_option("--out", verify_out, "JSON report path");

    WorkloadSpec bspec;
    std::vector<uint64_t> sizes = {1000, 10000};
    std::string bench_mode = "direct", bench_out;
    int bench_baseline = 100;
    auto* bench = app.add_subcommand("bench", "time the controller across stream sizes");
    bench->add_option("--sizes", sizes, "stream sizes")->delimiter(',');
    bench->add_option("--k", bspec.k, "k");
    bench->add_option("--d", bspec.d, "dimension");
    bench->add_option("--delta", bspec.delta, "grid side");
    bench->add_option("--workload", bspec.mode, "workload mode");
    add_common(bench, bc);
    bench->add_option("--mode", bench_mode, "direct | sparsified");
    bench->add_option("--baseline-every", bench_baseline, "baseline period");
    bench->add_option("--out", bench_out, "CSV output path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*gen) return cmd_gen(spec, gen_out);
        if (*run) {
            RunConfig cfg = make_config(rc);
            if (run_k > 0) cfg.k = run_k;
            if (run_mode != "both") parse_mode(run_mode);
            return cmd_run(stream_path, cfg, run_mode, baseline_every, run_out, witness);
        }
        if (*verify) return cmd_verify(suite, make_config(vc), scale, verify_out);
        if (*bench) {
            RunConfig cfg = make_config(bc);
            bspec.seed = cfg.seed;
            return cmd_bench(bspec, sizes, cfg, bench_mode, bench_baseline, bench_out);
        }
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "failure: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
