#include <doctest.h>

#include <map>

#include "dkm/assignment.hpp"

using namespace dkm;

TEST_SUITE("assignment") {
    TEST_CASE("weights are conserved and every point has one part") {
        auto p = Params::make(2, 256);
        Assignment a(p, 3);
        CounterRng rng(4, "asg");
        std::map<uint64_t, Point> live;
        std::vector<Point> centers;
        uint64_t next = 1;
        for (int step = 0; step < 400; ++step) {
            uint64_t r = rng.below(10);
            if (r < 6 || live.empty()) {
                Point x{int64_t(1 + rng.below(256)), int64_t(1 + rng.below(256))};
                a.insert_point(next, x, 1.0 + rng.below(3));
                live[next++] = x;
            } else if (r < 8) {
                auto it = std::next(live.begin(), rng.below(live.size()));
                a.erase_point(it->first);
                live.erase(it);
            } else if (r == 8 || centers.size() < 2) {
                Point c{int64_t(1 + rng.below(256)), int64_t(1 + rng.below(256))};
                if (a.has_center(c)) continue;
                a.insert_center(c);
                centers.push_back(c);
            } else {
                size_t i = rng.below(centers.size());
                a.erase_center(centers[i]);
                centers.erase(centers.begin() + i);
            }
            CHECK(a.orphan_f_entries() == 0);
            if (centers.empty()) continue;
            std::map<uint64_t, int> seen;
            for (const auto& part : a.partition()) {
                CHECK(a.has_center(part.sigma));
                for (auto id : part.ids) ++seen[id];
            }
            for (const auto& [id, c] : seen) CHECK(c == 1);
        }
    }

    TEST_CASE("sample probabilities sum to one") {
        auto p = Params::make(1, 64);
        Assignment a(p, 1);
        a.insert_center({10});
        a.insert_center({50});
        for (uint64_t i = 1; i <= 20; ++i) a.insert_point(i, {int64_t(2 * i + 1)}, 1.0);
        double total = 0;
        for (uint64_t i = 1; i <= 20; ++i) total += a.sample_probability(i);
        CHECK(total == doctest::Approx(1.0));
        CounterRng rng(1, "d2");
        for (int i = 0; i < 100; ++i) CHECK(a.d2_sample(rng).has_value());
    }
}
