#include "dkm/rng.hpp"

namespace dkm {

namespace {
constexpr uint64_t kGolden = 0x9e3779b97f4a7c15ULL;
}

uint64_t mix64(uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

uint64_t derive_seed(uint64_t root, std::string_view tag, uint64_t index) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : tag) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return mix64(mix64(root + kGolden) ^ mix64(h) ^ mix64(index * kGolden + 0x632be59bd9b4e019ULL));
}

CounterRng::result_type CounterRng::operator()() {
    ++counter_;
    return mix64(key_ + counter_ * kGolden);
}

double CounterRng::uniform() {
    return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
}

uint64_t CounterRng::below(uint64_t n) {
    if (n == 0) return 0;
    return static_cast<uint64_t>(uniform() * static_cast<double>(n)) % n;
}

}  // namespace dkm
