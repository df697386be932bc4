#pragma once

#include <cstdint>
#include <limits>
#include <string_view>

namespace dkm {

uint64_t mix64(uint64_t z);
uint64_t derive_seed(uint64_t root, std::string_view tag, uint64_t index = 0);

// Counter-based generator: the i-th output is mix64(key + i * golden).
class CounterRng {
public:
    using result_type = uint64_t;

    explicit CounterRng(uint64_t key = 0) : key_(key) {}
    CounterRng(uint64_t root, std::string_view tag, uint64_t index = 0)
        : key_(derive_seed(root, tag, index)) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<uint64_t>::max(); }

    result_type operator()();
    double uniform();  // [0, 1)
    uint64_t below(uint64_t n);
    uint64_t counter() const { return counter_; }

private:
    uint64_t key_;
    uint64_t counter_ = 0;
};

}  // namespace dkm
