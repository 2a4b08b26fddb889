#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace kgfair {

uint64_t splitmix64(uint64_t x);

// Stream seed for (seed, a, b). Gives each walk / stage its own generator so
// parallel and serial runs draw identical values.
uint64_t derive_seed(uint64_t seed, uint64_t a, uint64_t b = 0);

// Per-stage seed used by the CLI: splitmix64(seed ^ fnv1a64(stage)).
uint64_t stage_seed(uint64_t seed, const std::string& stage);

std::mt19937_64 make_rng(uint64_t seed);

}  // namespace kgfair
