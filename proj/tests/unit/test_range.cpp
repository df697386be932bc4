#include <doctest.h>

#include "dkm/range_query.hpp"
#include "dkm/rng.hpp"
#include "dkm/sampler.hpp"

using namespace dkm;

TEST_SUITE("range") {
    TEST_CASE("ann query stays within the approximation factor") {
        auto p = Params::make(2, 256);
        auto hl = std::make_shared<HashLevels>(p, 4);
        CenterIndex idx(hl);
        CounterRng rng(2, "ann");
        std::vector<Point> s;
        for (int i = 0; i < 60; ++i) {
            Point c{int64_t(1 + rng.below(256)), int64_t(1 + rng.below(256))};
            if (std::find(s.begin(), s.end(), c) != s.end()) continue;
            s.push_back(c);
            idx.insert(c, c, 1.0);
        }
        for (int i = 0; i < 300; ++i) {
            Point x{int64_t(1 + rng.below(256)), int64_t(1 + rng.below(256))};
            auto got = ann_query(idx, x, false);
            REQUIRE(got.has_value());
            double best = brute_nn(x, s, false).second;
            CHECK(dist(x, *got) <= 6 * p.gamma * best + 1e-9);
        }
    }

    TEST_CASE("range index rejects duplicate and missing ids") {
        auto hl = std::make_shared<HashLevels>(Params::make(1, 64), 1);
        CenterIndex idx(hl);
        idx.insert({3}, {3}, 1.0);
        CHECK_THROWS_AS(idx.insert({3}, {3}, 1.0), UsageError);
        CHECK_THROWS_AS(idx.erase({4}), UsageError);
    }

    TEST_CASE("neighbor bits track an isolated pair") {
        auto hl = std::make_shared<HashLevels>(Params::make(2, 1024), 8);
        NeighborBits nb(hl);
        nb.insert({100, 100});
        for (int j = 1; j <= nb.top(); ++j) CHECK_FALSE(nb.bit({100, 100}, j));
        auto flips = nb.insert({101, 100});
        CHECK_FALSE(flips.empty());
        CHECK(nb.dist_hat({100, 100}) >= 1.0);
        CHECK(nb.dist_hat({100, 100}) <= 2 * (1 + hl->params().gamma));
        nb.erase({101, 100});
        for (int j = 1; j <= nb.top(); ++j) CHECK_FALSE(nb.bit({100, 100}, j));
    }

    TEST_CASE("fenwick sampler follows its weights") {
        FenwickSampler f;
        auto a = f.add(1.0), b = f.add(3.0);
        CHECK(f.total() == 4.0);
        CHECK(f.find(0.5) == a);
        CHECK(f.find(1.5) == b);
        f.remove(a);
        CHECK(f.find(0.1) == b);
        f.remove(b);
        CHECK(f.find(0.0) == FenwickSampler::npos);
    }
}
