#include <doctest.h>

#include "dkm/subroutines.hpp"

using namespace dkm;

namespace {

ClusterState make_state(uint64_t seed) {
    ClusterState st(Params::make(1, 64), seed);
    int64_t xs[] = {1, 2, 3, 20, 21, 22, 40, 41, 42, 60};
    uint64_t id = 1;
    for (auto v : xs) st.insert_point(id++, {v}, 1.0);
    return st;
}

}  // namespace

TEST_SUITE("subroutines") {
    TEST_CASE("merge duplicates adds weights") {
        auto t = merge_duplicates({{1}, {2}, {1}}, {1.0, 2.0, 3.0});
        REQUIRE(t.pts.size() == 2);
        CHECK(t.w[0] + t.w[1] == 6.0);
        CHECK(weighted_cost(t, {{1}}) == 2.0);
    }

    TEST_CASE("static k-means finds well separated clusters") {
        std::vector<Point> pts;
        std::vector<double> w;
        for (int64_t c : {10, 100, 200})
            for (int64_t o = -1; o <= 1; ++o) {
                pts.push_back({c + o});
                w.push_back(1.0);
            }
        CounterRng rng(3, "km");
        auto centers = static_weighted_kmeans(pts, w, 3, rng);
        CHECK(weighted_cost(merge_duplicates(pts, w), centers) <= 6.0 + 1e-9);
    }

    TEST_CASE("restricted k-means removes the requested count") {
        auto st = make_state(5);
        for (int64_t c : {2, 3, 21, 41, 60}) st.insert_center({c});
        CounterRng rng(5, "r");
        auto removed = restricted_kmeans(st, 2, rng);
        CHECK(removed.size() == 2);
        for (const auto& c : removed) CHECK(st.has_center(c));
    }

    TEST_CASE("augmented k-means draws t points of X per round") {
        auto st = make_state(6);
        st.insert_center({2});
        CounterRng rng(6, "a");
        auto added = augmented_kmeans(st, 2, 200, rng);
        // Ten points: sampling runs dry once every location is a center.
        CHECK(added.size() % 200 == 0);
        CHECK(added.size() >= 200);
        CHECK(added.size() <= 3 * 200);
        for (const auto& c : added) {
            bool in_x = false;
            for (const auto& [id, e] : st.points().entries()) in_x = in_x || e.p == c;
            CHECK(in_x);
        }
    }
}
