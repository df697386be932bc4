#include <doctest.h>

#include <set>

#include "dkm/hashing.hpp"
#include "dkm/rng.hpp"

using namespace dkm;

TEST_SUITE("hashing") {
    TEST_CASE("counter rng is reproducible and tag separated") {
        CounterRng a(5, "x", 1), b(5, "x", 1), c(5, "x", 2), e(5, "y", 1);
        auto va = a(), vb = b();
        CHECK(va == vb);
        CHECK(va != c());
        CHECK(va != e());
        for (int i = 0; i < 1000; ++i) {
            double u = a.uniform();
            CHECK(u >= 0);
            CHECK(u < 1);
            CHECK(a.below(7) < 7);
        }
    }

    TEST_CASE("weak hash cells have diameter at most rho") {
        WeakHash h(2, 4.0, 3);
        std::map<Cell, std::vector<Point>> cells;
        for (int64_t x = 1; x <= 16; ++x)
            for (int64_t y = 1; y <= 16; ++y) cells[h.eval({x, y})].push_back({x, y});
        for (const auto& [z, pts] : cells)
            for (const auto& p : pts)
                for (const auto& q : pts) CHECK(dist(p, q) <= 4.0 + 1e-9);
    }

    TEST_CASE("ball cells cover the ball and respect the cap") {
        WeakHash h(2, 4.0, 9);
        Point x{8, 8};
        auto cells = h.ball_cells(x, 3.0, 1000);
        REQUIRE(cells.has_value());
        std::set<Cell> got(cells->begin(), cells->end());
        for (int64_t a = 1; a <= 16; ++a)
            for (int64_t b = 1; b <= 16; ++b)
                if (dist({a, b}, x) <= 3.0) CHECK(got.count(h.eval({a, b})));
        CHECK_FALSE(h.ball_cells(x, 3.0, 1).has_value());
    }

    TEST_CASE("consistent hash is deterministic and has bounded ball images") {
        auto p = Params::make(2, 1024);
        ConsistentHash h1(p, 8 * p.gamma, 17), h2(p, 8 * p.gamma, 17);
        CounterRng rng(1, "pts");
        for (int i = 0; i < 200; ++i) {
            Point x{int64_t(1 + rng.below(1024)), int64_t(1 + rng.below(1024))};
            CHECK(h1.eval(x) == h2.eval(x));
            auto ball = h1.ball_buckets(x);
            CHECK(static_cast<int64_t>(ball.size()) <= p.lambda_cap);
            CHECK(std::find(ball.begin(), ball.end(), h1.eval(x)) != ball.end());
        }
    }
}
