#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "dkm/checks.hpp"
#include "dkm/harness.hpp"

using namespace dkm;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream f(path);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

RunConfig quiet() {
    RunConfig c;
    c.record_time = false;
    return c;
}

}  // namespace

TEST_SUITE("harness") {
    TEST_CASE("stream round-trip is byte exact") {
        for (const char* mode : {"uniform", "clustered", "sliding-window", "adversarial-churn"}) {
            WorkloadSpec w;
            w.mode = mode;
            w.n = 300;
            w.d = 3;
            w.seed = 11;
            auto s = gen_workload(w);
            std::string text = serialize_stream(s);
            auto back = parse_stream_text(text);
            CHECK(back == s);
            CHECK(serialize_stream(back) == text);
        }
    }

    TEST_CASE("workload edge cases") {
        WorkloadSpec w;
        w.n = 0;
        CHECK(gen_workload(w).ops.empty());
        w.n = 200;
        w.ins_frac = 1;
        auto s = gen_workload(w);
        for (const auto& op : s.ops) CHECK(op.kind == UpdateOp::insert);
        w.mode = "sliding-window";
        w.ins_frac = 0.7;
        w.window = 25;
        size_t live = 0;
        for (const auto& op : gen_workload(w).ops) {
            live += op.kind == UpdateOp::insert ? 1 : -1;
            CHECK(live <= 25);
        }
        w.mode = "spiral";
        CHECK_THROWS_AS(gen_workload(w), UsageError);
    }

    TEST_CASE("parse errors carry the line number") {
        try {
            parse_stream_text("H d=1 delta=8 n=2 k=1\nI 1 1 3\nD 2\n");
            FAIL("expected a parse error");
        } catch (const ParseError& e) {
            CHECK(e.line == 3);
        }
        CHECK_THROWS_AS(parse_stream_text("H d=1 delta=8 n=1 k=1\nI 1 1 9\n"), ParseError);
        CHECK_THROWS_AS(parse_stream_text("H d=1 delta=8 n=2 k=1\nI 1 1 3\n"), ParseError);
    }

    TEST_CASE("metrics columns match the golden header") {
        auto dir = std::filesystem::temp_directory_path() / "dkm_golden";
        std::filesystem::remove_all(dir);
        WorkloadSpec w;
        w.n = 50;
        auto r = run_stream(gen_workload(w), quiet(), RunMode::direct, 10);
        write_metrics(r, dir.string());
        std::string csv = read_file((dir / "metrics.csv").string());
        std::string golden = read_file(DKM_GOLDEN_DIR "/metrics_header.csv");
        CHECK(csv.substr(0, csv.find('\n') + 1) == golden);
        CHECK(std::string(kMetricsColumns) + "\n" == golden);
        CHECK(std::count(csv.begin(), csv.end(), '\n') == 51);
    }

    TEST_CASE("k insertions give ratio 1 rows") {
        UpdateStream s;
        s.header = {2, 64, 4, 4};
        for (uint64_t i = 1; i <= 4; ++i) s.ops.push_back(UpdateOp::ins(i, {int64_t(i), int64_t(2 * i)}));
        auto r = run_stream(s, quiet(), RunMode::direct, 1);
        for (const auto& row : r.rows) {
            CHECK(row.cost_alg == 0);
            CHECK(row.ratio == 1);
        }
    }

    TEST_CASE("replay is deterministic and cumulative columns never decrease") {
        WorkloadSpec w;
        w.n = 200;
        w.mode = "adversarial-churn";
        auto s = gen_workload(w);
        for (auto mode : {RunMode::direct, RunMode::sparsified}) {
            auto a = run_stream(s, quiet(), mode, 50);
            auto b = run_stream(s, quiet(), mode, 50);
            REQUIRE(a.rows.size() == b.rows.size());
            for (size_t i = 0; i < a.rows.size(); ++i) CHECK(format_row(a.rows[i]) == format_row(b.rows[i]));
            for (size_t i = 1; i < a.rows.size(); ++i) {
                CHECK(a.rows[i].recourse_cum >= a.rows[i - 1].recourse_cum);
                CHECK(a.rows[i].makerobust_cum >= a.rows[i - 1].makerobust_cum);
                CHECK(a.rows[i].resets_cum >= a.rows[i - 1].resets_cum);
            }
            for (const auto& row : a.rows)
                if (row.cost_baseline > 0) CHECK(row.ratio == doctest::Approx(row.cost_alg / row.cost_baseline));
        }
    }

    TEST_CASE("config parsing") {
        std::istringstream in("# comment\npreset = paper_faithful\nseed=9\nlambda_cap=3\n");
        auto cfg = RunConfig::from_key_values(parse_key_values(in));
        CHECK(cfg.preset == Preset::paper_faithful);
        CHECK(cfg.seed == 9);
        CHECK(cfg.params(2, 1024).lambda_cap == 3);
        CHECK_THROWS_AS(RunConfig::from_key_values({{"bogus", "1"}}), UsageError);
        CHECK_THROWS_AS(parse_mode("both"), UsageError);
    }

    TEST_CASE("verify hashing passes and a unit bucket cap fails") {
        CheckOptions o;
        o.scale = 0.05;
        for (const auto& r : run_suite("hashing", o)) CHECK_MESSAGE(r.status != Status::fail, format_result(r));
        o.cfg.overrides["lambda_cap"] = "1";
        bool named = false;
        for (const auto& r : run_suite("hashing", o))
            if (r.status == Status::fail && r.name.find("consisten") != std::string::npos) named = true;
        CHECK(named);
    }

    TEST_CASE("verify lemmas passes") {
        CheckOptions o;
        o.scale = 0.1;
        for (const auto& r : run_suite("lemmas", o)) CHECK_MESSAGE(r.status != Status::fail, format_result(r));
    }
}
