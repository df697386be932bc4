#include <doctest.h>

#include <cmath>

#include "dkm/harness.hpp"
#include "dkm/sparsifier.hpp"

using namespace dkm;

namespace {

SparsifierConfig config(double alpha, uint64_t n) {
    RunConfig rc;
    auto c = rc.sparsifier(2, 1024, 5, n);
    c.alpha = alpha;
    c.verifiers = 2;
    return c;
}

}  // namespace

TEST_SUITE("sparsifier") {
    TEST_CASE("contract holds after every update") {
        WorkloadSpec w;
        w.n = 300;
        auto s = gen_workload(w);
        SparsifiedRunner r(config(8, s.ops.size()));
        for (const auto& op : s.ops) {
            r.update(op);
            CHECK(r.cost_u() <= 8 * r.estimate() * (1 + 1e-9) + 1e-9);
            CHECK(r.sample().size() <= r.points().size());
        }
    }

    TEST_CASE("a low alpha forces resets") {
        WorkloadSpec w;
        w.n = 150;
        auto s = gen_workload(w);
        SparsifiedRunner r(config(1.2, s.ops.size()));
        for (const auto& op : s.ops) r.update(op);
        CHECK(r.resets() > 0);
        CHECK(r.max_burst() >= 1);
    }

    TEST_CASE("a corrupted primary is reset by the audit") {
        WorkloadSpec w;
        w.n = 300;
        auto s = gen_workload(w);
        SparsifiedRunner r(config(4, s.ops.size()));
        for (const auto& op : s.ops) r.update(op);
        r.corrupt_primary();
        REQUIRE(r.cost_u() > 4 * r.estimate());
        CHECK(r.audit() >= 1);
        CHECK(r.cost_u() <= 4 * r.estimate() * (1 + 1e-9) + 1e-9);
    }
}
