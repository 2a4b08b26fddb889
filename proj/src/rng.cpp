#include "kgfair/rng.hpp"

#include "kgfair/core.hpp"

namespace kgfair {

uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

uint64_t derive_seed(uint64_t seed, uint64_t a, uint64_t b) {
    return splitmix64(splitmix64(seed ^ splitmix64(a)) ^ splitmix64(~b));
}

uint64_t stage_seed(uint64_t seed, const std::string& stage) {
    return splitmix64(seed ^ fnv1a64(stage));
}

std::mt19937_64 make_rng(uint64_t seed) {
    return std::mt19937_64(seed);
}

}  // namespace kgfair
