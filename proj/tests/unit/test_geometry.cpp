#include <doctest.h>

#include <cmath>

#include "dkm/geometry.hpp"

using namespace dkm;

namespace {

WeightedSet line(std::initializer_list<int64_t> xs) {
    WeightedSet x;
    uint64_t id = 1;
    for (auto v : xs) x.insert(id++, {v}, 1.0);
    return x;
}

}  // namespace

TEST_SUITE("geometry") {
    TEST_CASE("dist2 examples") {
        CHECK(dist2({3, 9}, {3, 9}) == 0);
        CHECK(dist2({1, 1}, {4, 5}) == 25);
        CHECK(dist2({1, 2, 3}, {2, 4, 6}) == 14);
        CHECK_THROWS_AS(dist2({1, 2}, {1}), UsageError);
    }

    TEST_CASE("cost examples") {
        WeightedSet x;
        x.insert(1, {1, 1}, 2.0);
        CHECK(cost(x, std::vector<Point>{{4, 5}}) == 50);
        CHECK(cost(x, std::vector<Point>{{1, 1}}) == 0);
        CHECK(cost(line({1, 3}), std::vector<Point>{{2}}) == 2);
        CHECK_THROWS_AS(cost(x, std::vector<Point>{}), UsageError);
    }

    TEST_CASE("brute_nn picks the nearest and breaks ties lexicographically") {
        CHECK(brute_nn({4}, {{4}}, false) == std::pair<Point, double>{{4}, 0.0});
        CHECK(brute_nn({5}, {{1}, {7}}, true) == std::pair<Point, double>{{7}, 2.0});
        CHECK(brute_nn({5}, {{7}, {3}}, true) == std::pair<Point, double>{{3}, 2.0});
        CHECK_THROWS_AS(brute_nn({5}, {{5}}, true), UsageError);
    }

    TEST_CASE("restricted oracle") {
        // Removing {1} or {2} both cost 2; removing {10} costs 49 + 64.
        auto r = brute_opt_restricted(line({1, 2, 9, 10}), {{1}, {2}, {10}}, 1);
        CHECK(r.cost == 2);
        CHECK(r.chosen == std::vector<Point>{{2}});
        auto only = brute_opt_restricted(line({1, 5}), {{1}, {5}}, 1);
        CHECK(only.chosen.size() == 1);
        CHECK(brute_opt_restricted(WeightedSet{}, {{1}, {2}}, 1).cost == 0);
    }

    TEST_CASE("augmented oracle") {
        auto x = line({1, 2, 3, 50});
        std::vector<Point> s{{2}};
        auto none = brute_opt_augmented(x, s, 0, {{1}, {50}});
        CHECK(none.chosen.empty());
        CHECK(none.cost == doctest::Approx(cost(x, s)));
        auto out = brute_opt_augmented(x, s, 1, {{1}, {2}, {3}, {50}});
        CHECK(out.chosen == std::vector<Point>{{50}});
        CHECK(out.cost == 2);
        CHECK(brute_opt_augmented(x, s, 1, {{2}}).cost == doctest::Approx(cost(x, s)));
    }

    TEST_CASE("params derive gamma and caps") {
        auto p = Params::make(2, 1024, 0.3);
        CHECK(p.gamma >= 6);
        CHECK(p.colors == 20);  // ceil(2 * log2 1024)
        CHECK(p.lambda_cap > 0);
        CHECK(p.aspect() == doctest::Approx(std::sqrt(2.0) * 1024));
    }

    TEST_CASE("jl projection clamps and is deterministic") {
        auto p = Params::make(2, 16);
        auto a = jl_matrix(5, 2, 7);
        CHECK(jl_project({0, 0, 0, 0, 0}, a, p) == Point{1, 1});
        Matrix id = {{1, 0}, {0, 1}};
        CHECK(jl_project({3.4, 40}, id, p) == Point{3, 16});
        CHECK(jl_project({1.5, -2, 3, 9, 4}, a, p) == jl_project({1.5, -2, 3, 9, 4}, jl_matrix(5, 2, 7), p));
    }
}
