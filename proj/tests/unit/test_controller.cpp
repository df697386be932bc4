#include <doctest.h>

#include "dkm/dynamic_kmeans.hpp"
#include "dkm/harness.hpp"

using namespace dkm;

TEST_SUITE("controller") {
    TEST_CASE("solution size stays within k plus the epoch drift") {
        WorkloadSpec w;
        w.n = 600;
        w.mode = "adversarial-churn";
        auto s = gen_workload(w);
        auto cfg = ControllerConfig::make(Params::make(2, 1024), 5);
        DynamicKMeans dk(cfg);
        int since = 0;
        for (const auto& op : s.ops) {
            auto rep = dk.update(op);
            since = rep.epoch_boundary ? 0 : since + 1;
            CHECK(dk.solution().size() <= static_cast<size_t>(5 + since));
            if (rep.epoch_boundary) CHECK(dk.solution().size() <= 5);
        }
        CHECK(dk.stats().calls_once_violations == 0);
        CHECK(dk.stats().chain_violations == 0);
    }

    TEST_CASE("few distinct points are all centers") {
        auto cfg = ControllerConfig::make(Params::make(2, 64), 4);
        DynamicKMeans dk(cfg);
        dk.update(UpdateOp::ins(1, {3, 3}));
        dk.update(UpdateOp::ins(2, {9, 9}));
        dk.update(UpdateOp::ins(3, {3, 3}, 2.0));
        CHECK(dk.solution().size() == 2);
        CHECK(dk.cost() == 0);
        dk.update(UpdateOp::del(2));
        CHECK(dk.solution() == std::set<Point>{{3, 3}});
    }

    TEST_CASE("witness records satisfy the certificate check") {
        WorkloadSpec w;
        w.n = 500;
        auto s = gen_workload(w);
        auto cfg = ControllerConfig::make(Params::make(2, 1024), 5);
        cfg.witness = true;
        DynamicKMeans dk(cfg);
        int records = 0;
        dk.set_observer([&](const MakeRobustRecord& rec) {
            ++records;
            auto bad = check_certificate(rec, dk.points(), dk.config().sched);
            CHECK_MESSAGE(bad.empty(), (bad.empty() ? "" : bad.front()));
        });
        for (const auto& op : s.ops) dk.update(op);
        CHECK(records > 0);
    }

    TEST_CASE("schedule overrides reject unknown keys") {
        auto sched = ExponentSchedule::make(Params::make(2, 1024));
        CHECK(sched.set("ell_stop", 3));
        CHECK(sched.ell_stop == 3);
        CHECK_FALSE(sched.set("nonsense", 1));
    }
}
