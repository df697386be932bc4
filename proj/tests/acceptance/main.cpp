#include <cstdio>
#include <cstdlib>
#include <string>

#include "dkm/checks.hpp"

// Runs every acceptance criterion at full scale and prints one line per criterion.
// Optional arguments: a scale factor, a seed and a suite name.
int main(int argc, char** argv) {
    dkm::CheckOptions o;
    if (argc > 1) o.scale = std::atof(argv[1]);
    if (argc > 2) o.cfg.seed = std::strtoull(argv[2], nullptr, 10);
    o.cfg.record_time = true;
    int failed = 0;
    auto results = dkm::run_suite(argc > 3 ? argv[3] : "all", o);
    for (const auto& r : results) {
        std::printf("%s\n", dkm::format_result(r).c_str());
        if (r.status == dkm::Status::fail) ++failed;
    }
    std::printf("%zu criteria, %d failed\n", results.size(), failed);
    return failed ? 1 : 0;
}
